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

#include "dynrag/reranker.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "dynrag/jsonl.hpp"

namespace dynrag::rerank {

std::string_view source_name(DecisionSource s) {
    switch (s) {
        case DecisionSource::policy: return "policy";
        case DecisionSource::expert: return "expert";
        case DecisionSource::scripted: return "scripted";
    }
    return "policy";
}

namespace {

llm::CompletionRequest policy_request(const prompts::RenderedPrompt& prompt, const RerankConfig& cfg,
                                      const SamplingParams& sampling) {
    llm::CompletionRequest req;
    req.role = llm::Role::reranker;
    req.prompt = prompt;
    req.temperature = sampling.temperature;
    req.top_p = sampling.top_p;
    req.max_tokens = cfg.max_tokens;
    req.seed = sampling.seed;
    return req;
}

SamplingParams default_sampling(const RerankConfig& cfg) { return {cfg.temperature, cfg.top_p, cfg.seed}; }

}  // namespace

Trajectory decode_reply(const Query& query, std::span<const RetrievedDoc> docs, std::string prompt,
                        std::string raw, const RerankConfig& cfg, const SamplingParams& sampling) {
    auto parsed = prompts::parse_identifier_list(raw, docs.size(), cfg.parse_mode);
    auto& ids = parsed.list.ids;
    if (ids.size() > cfg.k_max) ids.resize(cfg.k_max);
    Trajectory t;
    t.decision.query_id = query.id;
    t.decision.source = cfg.source;
    t.decision.positions = ids;
    for (std::size_t p : ids) t.decision.doc_ids.push_back(docs[p - 1].doc.id);
    t.prompt = std::move(prompt);
    t.raw_output = std::move(raw);
    t.sampling = sampling;
    t.parse_warnings = parsed.warnings;
    return t;
}

Trajectory rerank(llm::ChatBackend& policy, const Query& query, std::span<const RetrievedDoc> docs,
                  const RerankConfig& cfg) {
    if (docs.empty()) throw std::invalid_argument("rerank: no documents");
    if (docs.size() > cfg.window) throw std::invalid_argument("rerank: more documents than the window size");
    auto prompt = prompts::render_reranker_prompt(query, docs, cfg.max_content_tokens);
    const auto sampling = default_sampling(cfg);
    auto reply = policy.complete(policy_request(prompt, cfg, sampling));
    return decode_reply(query, docs, prompt.full_text(), std::move(reply.text), cfg, sampling);
}

std::size_t sliding_window_calls(std::size_t n, std::size_t window, std::size_t stride) {
    if (n <= window) return 1;
    return (n - window + stride - 1) / stride + 1;
}

Trajectory sliding_window_rerank(llm::ChatBackend& policy, const Query& query, std::span<const RetrievedDoc> docs,
                                 const RerankConfig& cfg) {
    if (cfg.window < 1 || cfg.stride < 1 || cfg.stride > cfg.window)
        throw std::invalid_argument("sliding_window_rerank: need window >= stride >= 1");
    if (docs.size() <= cfg.window) return rerank(policy, query, docs, cfg);

    const auto sampling = default_sampling(cfg);
    std::vector<std::size_t> order(docs.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<RetrievedDoc> window_docs;

    auto load_window = [&](std::size_t start) {
        window_docs.clear();
        for (std::size_t i = start; i < start + cfg.window; ++i) window_docs.push_back(docs[order[i]]);
    };

    for (std::size_t start = docs.size() - cfg.window; start > 0;) {
        load_window(start);
        auto prompt = prompts::render_reranker_prompt(query, window_docs, cfg.max_content_tokens);
        auto reply = policy.complete(policy_request(prompt, cfg, sampling));
        auto parsed = prompts::parse_identifier_list(reply.text, window_docs.size(), cfg.parse_mode);

        std::vector<std::size_t> reordered;
        std::vector<char> taken(cfg.window, 0);
        for (std::size_t id : parsed.list.ids) {
            reordered.push_back(order[start + id - 1]);
            taken[id - 1] = 1;
        }
        for (std::size_t i = 0; i < cfg.window; ++i)
            if (!taken[i]) reordered.push_back(order[start + i]);
        std::copy(reordered.begin(), reordered.end(), order.begin() + static_cast<std::ptrdiff_t>(start));

        start = start > cfg.stride ? start - cfg.stride : 0;
    }

    load_window(0);
    auto prompt = prompts::render_reranker_prompt(query, window_docs, cfg.max_content_tokens);
    auto reply = policy.complete(policy_request(prompt, cfg, sampling));
    Trajectory t = decode_reply(query, window_docs, prompt.full_text(), std::move(reply.text), cfg, sampling);
    for (auto& p : t.decision.positions) p = order[p - 1] + 1;
    return t;
}

RerankDecision expert_rerank(const ExpertConfig& cfg, const ScoreTable& scores, const Query& query,
                             std::span<const RetrievedDoc> docs) {
    if (cfg.k_max < 1) throw std::invalid_argument("expert_rerank: k_max must be >= 1");
    struct Scored {
        std::size_t position;
        double score;
        const std::string* id;
    };
    std::vector<Scored> kept;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto s = scores.get(query.id, docs[i].doc.id);
        if (!s) throw Error("missing expert score for query \"" + query.id + "\", document \"" + docs[i].doc.id + "\"");
        if (*s >= cfg.tau) kept.push_back({i + 1, *s, &docs[i].doc.id});
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return *a.id < *b.id;
    });
    if (kept.size() > cfg.k_max) kept.resize(cfg.k_max);
    RerankDecision d;
    d.query_id = query.id;
    d.source = DecisionSource::expert;
    for (const auto& s : kept) {
        d.positions.push_back(s.position);
        d.doc_ids.push_back(*s.id);
    }
    return d;
}

std::vector<Trajectory> sample_trajectories(llm::ChatBackend& policy, const Query& query,
                                            std::span<const RetrievedDoc> docs, const RerankConfig& cfg,
                                            const SamplingConfig& sampling) {
    if (sampling.n_samples < 2) throw std::invalid_argument("sample_trajectories: n_samples must be >= 2");
    if (docs.empty()) throw std::invalid_argument("sample_trajectories: no documents");
    if (docs.size() > cfg.window) throw std::invalid_argument("sample_trajectories: more documents than the window size");

    const auto prompt = prompts::render_reranker_prompt(query, docs, cfg.max_content_tokens);
    const std::string prompt_text = prompt.full_text();
    std::vector<llm::CompletionRequest> reqs;
    std::vector<SamplingParams> params;
    for (std::size_t i = 0; i < sampling.n_samples; ++i) {
        params.push_back({sampling.temperature, sampling.top_p, sampling.base_seed + static_cast<std::int64_t>(i)});
        reqs.push_back(policy_request(prompt, cfg, params.back()));
    }
    auto results = llm::complete_batch(policy, reqs, {sampling.max_in_flight, false});

    std::vector<Trajectory> out;
    std::size_t succeeded = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].ok()) {
            try {
                out.push_back(decode_reply(query, docs, prompt_text, results[i].result->text, cfg, params[i]));
                ++succeeded;
                continue;
            } catch (const ParseError& e) {
                Trajectory t;
                t.decision.query_id = query.id;
                t.prompt = prompt_text;
                t.raw_output = results[i].result->text;
                t.sampling = params[i];
                t.error = e.what();
                out.push_back(std::move(t));
                continue;
            }
        }
        Trajectory t;
        t.decision.query_id = query.id;
        t.prompt = prompt_text;
        t.sampling = params[i];
        t.error = results[i].error_message();
        out.push_back(std::move(t));
    }
    if (succeeded < 2)
        throw SamplingError("query \"" + query.id + "\": only " + std::to_string(succeeded) + " of " +
                            std::to_string(sampling.n_samples) + " trajectories succeeded");
    return out;
}

std::size_t export_bc_dataset(std::span<const BcExample> examples, std::ostream& sink) {
    std::size_t n = 0;
    for (const auto& ex : examples) {
        jsonl::Json j;
        j["prompt"] = ex.prompt;
        j["completion"] = prompts::format_identifier_list(ex.decision.positions);
        j["query_id"] = ex.decision.query_id;
        j["k"] = ex.decision.k();
        sink << j.dump() << '\n';
        if (!sink) throw IoError("failed writing behavior-cloning record");
        ++n;
    }
    return n;
}

}  // namespace dynrag::rerank
