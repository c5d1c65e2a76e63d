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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynrag/corpus.hpp"
#include "dynrag/llm_client.hpp"
#include "dynrag/prompts.hpp"
#include "dynrag/reward.hpp"

namespace dynrag::rerank {

enum class DecisionSource { policy, expert, scripted };

std::string_view source_name(DecisionSource s);

/// Ordered, variable-length selection over a retrieval list.
struct RerankDecision {
    std::string query_id;
    std::vector<std::size_t> positions;  // 1-based into the retrieval list, distinct
    std::vector<std::string> doc_ids;    // positions resolved to document ids
    DecisionSource source = DecisionSource::policy;

    std::size_t k() const noexcept { return positions.size(); }
    bool operator==(const RerankDecision&) const = default;
};

struct SamplingParams {
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<std::int64_t> seed;
};

struct Trajectory {
    RerankDecision decision;
    std::string prompt;      // full text of the prompt that produced raw_output
    std::string raw_output;
    SamplingParams sampling;
    std::size_t parse_warnings = 0;
    std::optional<reward::RewardBreakdown> reward;
    std::string error;       // set when the policy call failed

    bool ok() const noexcept { return error.empty(); }
};

struct RerankConfig {
    std::size_t k_max = 15;
    std::size_t window = 20;
    std::size_t stride = 10;
    double temperature = 0.2;
    double top_p = 1.0;
    int max_tokens = 128;
    std::size_t max_content_tokens = 200;
    prompts::ParseMode parse_mode = prompts::ParseMode::lenient;
    std::optional<std::int64_t> seed;
    DecisionSource source = DecisionSource::policy;
};

/// Parses a policy reply over `docs` into a decision: bracketed ids in
/// emission order, truncated to k_max.
Trajectory decode_reply(const Query& query, std::span<const RetrievedDoc> docs, std::string prompt,
                        std::string raw, const RerankConfig& cfg, const SamplingParams& sampling);

/// One policy call over at most cfg.window documents.
Trajectory rerank(llm::ChatBackend& policy, const Query& query, std::span<const RetrievedDoc> docs,
                  const RerankConfig& cfg);

/// Back-to-front overlapping windows of cfg.window documents, moving by
/// cfg.stride. Each pass moves the policy's selection, in emitted order, to
/// the front of its window; unselected members keep their relative order
/// behind it. A final call over the top window yields the decision, whose
/// positions refer to the original `docs` order. Falls through to rerank()
/// when docs fit in one window.
Trajectory sliding_window_rerank(llm::ChatBackend& policy, const Query& query, std::span<const RetrievedDoc> docs,
                                 const RerankConfig& cfg);

/// Number of policy calls sliding_window_rerank makes for n documents.
std::size_t sliding_window_calls(std::size_t n, std::size_t window, std::size_t stride);

struct ExpertConfig {
    double tau = 0.8;
    std::size_t k_max = 15;
};

/// Keeps documents whose expert score is >= tau, best first (ties by
/// ascending doc id), at most k_max. Throws Error on a missing score.
RerankDecision expert_rerank(const ExpertConfig& cfg, const ScoreTable& scores, const Query& query,
                             std::span<const RetrievedDoc> docs);

class SamplingError : public Error {
public:
    using Error::Error;
};

struct SamplingConfig {
    std::size_t n_samples = 8;
    double temperature = 1.0;
    double top_p = 0.9;
    std::int64_t base_seed = 0;
    std::size_t max_in_flight = 4;
};

/// n_samples policy calls with seeds base_seed .. base_seed + n - 1. Failed
/// calls come back as trajectories with `error` set; throws SamplingError
/// when fewer than two calls succeed.
std::vector<Trajectory> sample_trajectories(llm::ChatBackend& policy, const Query& query,
                                            std::span<const RetrievedDoc> docs, const RerankConfig& cfg,
                                            const SamplingConfig& sampling);

struct BcExample {
    std::string prompt;  // full reranker prompt text
    RerankDecision decision;
};

/// Writes {"prompt","completion","query_id","k"} lines; returns the count.
std::size_t export_bc_dataset(std::span<const BcExample> examples, std::ostream& sink);

}  // namespace dynrag::rerank
