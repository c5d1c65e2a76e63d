/*
 * Copyright 2026 The DynRAG Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dynrag/preference.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "dynrag/jsonl.hpp"

namespace dynrag::preference {

std::optional<PairSelection> select_pair_indices(std::span<const rerank::Trajectory> trajectories) {
    if (trajectories.size() < 2) throw std::invalid_argument("select_pair: need at least two trajectories");
    for (std::size_t i = 0; i < trajectories.size(); ++i)
        if (!trajectories[i].reward) throw Error("trajectory " + std::to_string(i) + " has no reward");
    PairSelection sel;
    for (std::size_t i = 1; i < trajectories.size(); ++i) {
        const double r = trajectories[i].reward->total;
        if (r > trajectories[sel.chosen].reward->total) sel.chosen = i;
        if (r < trajectories[sel.rejected].reward->total) sel.rejected = i;
    }
    if (trajectories[sel.chosen].reward->total == trajectories[sel.rejected].reward->total) return std::nullopt;
    if (trajectories[sel.chosen].raw_output == trajectories[sel.rejected].raw_output) return std::nullopt;
    return sel;
}

std::optional<PreferencePair> select_pair(std::span<const rerank::Trajectory> trajectories) {
    auto sel = select_pair_indices(trajectories);
    if (!sel) return std::nullopt;
    const auto& c = trajectories[sel->chosen];
    const auto& r = trajectories[sel->rejected];
    return PreferencePair{c.decision.query_id, c.prompt, c.raw_output, r.raw_output, c.reward->total,
                          r.reward->total};
}

double log_sigmoid(double x) {
    // log sigma(x) = -log(1 + e^-x), split so exp never overflows.
    double v = x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    // The exact value is negative for every finite x; underflow lands on the
    // largest negative double instead of -0.
    return std::min(v, -std::numeric_limits<double>::denorm_min());
}

double dpo_objective(double logp_policy_chosen, double logp_policy_rejected, double logp_ref_chosen,
                     double logp_ref_rejected, double beta) {
    for (double v : {logp_policy_chosen, logp_policy_rejected, logp_ref_chosen, logp_ref_rejected, beta})
        if (!std::isfinite(v)) throw std::invalid_argument("dpo_objective: non-finite input");
    if (beta <= 0) throw std::invalid_argument("dpo_objective: beta must be positive");
    const double margin = (logp_policy_chosen - logp_ref_chosen) - (logp_policy_rejected - logp_ref_rejected);
    return log_sigmoid(beta * margin);
}

void validate(const PreferencePair& pair) {
    if (!(pair.reward_chosen > pair.reward_rejected))
        throw Error("preference pair for query \"" + pair.query_id + "\" needs reward_chosen > reward_rejected");
    if (pair.chosen == pair.rejected)
        throw Error("preference pair for query \"" + pair.query_id + "\" has identical chosen and rejected text");
    for (double r : {pair.reward_chosen, pair.reward_rejected})
        if (!(r >= 0.0 && r <= 1.0)) throw Error("preference pair reward outside [0, 1]");
}

std::size_t export_dpo_pairs(std::span<const PreferencePair> pairs, std::ostream& sink) {
    for (const auto& p : pairs) validate(p);
    for (const auto& p : pairs) {
        jsonl::Json j;
        j["prompt"] = p.prompt;
        j["chosen"] = p.chosen;
        j["rejected"] = p.rejected;
        j["reward_chosen"] = p.reward_chosen;
        j["reward_rejected"] = p.reward_rejected;
        j["query_id"] = p.query_id;
        sink << j.dump() << '\n';
        if (!sink) throw IoError("failed writing preference pair");
    }
    return pairs.size();
}

std::vector<PreferencePair> read_dpo_pairs(std::istream& in) {
    std::vector<PreferencePair> out;
    jsonl::for_each_record(in, [&](const jsonl::Json& j, std::size_t line) {
        PreferencePair p;
        p.prompt = jsonl::require_string(j, "prompt", line);
        p.chosen = jsonl::require_string(j, "chosen", line);
        p.rejected = jsonl::require_string(j, "rejected", line);
        p.query_id = jsonl::require_string(j, "query_id", line);
        for (auto [key, dst] : {std::pair{"reward_chosen", &p.reward_chosen}, std::pair{"reward_rejected", &p.reward_rejected}}) {
            auto it = j.find(key);
            if (it == j.end() || !it->is_number()) throw FormatError(std::string("missing numeric \"") + key + "\"", line);
            *dst = it->get<double>();
        }
        out.push_back(std::move(p));
    });
    return out;
}

std::string manifest_json(const Manifest& m) {
    jsonl::Json j;
    j["beta"] = m.beta;
    j["n_samples"] = m.n_samples;
    j["reward_weights"] = {{"alpha", m.reward_weights.alpha},
                           {"beta", m.reward_weights.beta},
                           {"gamma", m.reward_weights.gamma},
                           {"lambda", m.reward_weights.lambda},
                           {"delta", m.reward_weights.delta}};
    j["seed"] = m.seed;
    return j.dump(2) + "\n";
}

}  // namespace dynrag::preference
