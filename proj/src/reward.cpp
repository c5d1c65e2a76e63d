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

#include "dynrag/reward.hpp"

#include <cmath>
#include <map>

#include "dynrag/text.hpp"

namespace dynrag::reward {

void RewardWeights::validate() const {
    for (double w : {alpha, beta, gamma, lambda, delta})
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("reward weights must be finite and non-negative");
    if (alpha + beta + gamma + lambda + delta > 1.0 + 1e-9) throw ConfigError("reward weights must sum to at most 1");
}

double exact_match(std::span<const std::string> gold_set, std::string_view response, EmMode mode) {
    if (mode == EmMode::literal) {
        for (const auto& g : gold_set)
            if (g == response) return 1.0;
        return 0.0;
    }
    const std::string r = text::normalize_answer(response);
    for (const auto& g : gold_set)
        if (text::normalize_answer(g) == r) return 1.0;
    return 0.0;
}

double token_f1(std::string_view gold, std::string_view response) {
    auto g = text::tokenize(gold);
    auto r = text::tokenize(response);
    if (g.empty() && r.empty()) return 1.0;
    if (g.empty() || r.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : g) ++counts[t];
    std::size_t common = 0;
    for (const auto& t : r) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(r.size());
    const double rc = static_cast<double>(common) / static_cast<double>(g.size());
    return 2.0 * p * rc / (p + rc);
}

double EmbeddingSimilarity::similarity(std::string_view gold, std::string_view response) {
    auto vecs = client_.embed({std::string(gold), std::string(response)});
    const auto& a = vecs.at(0);
    const auto& b = vecs.at(1);
    if (a.size() != b.size()) throw llm::MalformedResponseError("embedding dimensions differ");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double cos = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp((cos + 1.0) / 2.0, 0.0, 1.0);
}

double semantic_similarity(std::string_view gold, std::string_view response, SimilarityBackend& backend) {
    return backend.similarity(gold, response);
}

double rouge_l_from_lcs(std::size_t lcs, std::size_t gold_len, std::size_t response_len) {
    if (lcs == 0 || gold_len == 0 || response_len == 0) return 0.0;
    const double p = static_cast<double>(lcs) / static_cast<double>(response_len);
    const double r = static_cast<double>(lcs) / static_cast<double>(gold_len);
    return 2.0 * p * r / (p + r);
}

double textual_fluency(std::string_view gold, std::string_view response) {
    auto g = text::tokenize(gold);
    auto r = text::tokenize(response);
    return rouge_l<std::string>(g, r);
}

double length_penalty(std::string_view response) {
    return 1.0 / (1.0 + static_cast<double>(text::whitespace_tokens(response).size()));
}

LlmEvalResult llm_eval(llm::ChatBackend& judge, std::string_view instruction, std::string_view gold,
                       std::string_view response, const JudgeSettings& settings) {
    llm::CompletionRequest req;
    req.role = llm::Role::judge;
    req.prompt = prompts::render_reward_prompt(instruction, gold, response, settings.few_shot);
    req.temperature = settings.temperature;
    req.top_p = settings.top_p;
    req.max_tokens = settings.max_tokens;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (auto s = prompts::parse_llm_score(judge.complete(req).text)) return {*s, false};
    }
    return {0.0, true};
}

double weighted_total(const RewardWeights& w, const RewardBreakdown& b) {
    return w.alpha * b.em + w.beta * b.ss + w.gamma * b.tf + w.lambda * b.lp + w.delta * b.llm_eval;
}

RewardBreakdown compute_reward(const RewardWeights& weights, const RewardInputs& in, llm::ChatBackend& judge,
                               SimilarityBackend& similarity, const RewardOptions& opts) {
    weights.validate();
    const std::string& gold =
        !in.gold_primary.empty() || in.gold_set.empty() ? in.gold_primary : in.gold_set.front();
    RewardBreakdown b;
    b.em = exact_match(in.gold_set, in.response, opts.em_mode);
    b.ss = semantic_similarity(gold, in.response, similarity);
    b.tf = textual_fluency(gold, in.response);
    b.lp = length_penalty(in.response);
    auto judged = llm_eval(judge, in.instruction, gold, in.response, opts.judge);
    b.llm_eval = judged.score;
    b.llm_eval_failed = judged.failed;
    b.total = weighted_total(weights, b);
    return b;
}

}  // namespace dynrag::reward
