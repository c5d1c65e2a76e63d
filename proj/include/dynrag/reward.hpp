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

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynrag/llm_client.hpp"

namespace dynrag::reward {

/// Weights of EM, SS, TF, LP and LLM-Eval. Non-negative with a sum of at
/// most one, so the total stays in [0, 1].
struct RewardWeights {
    double alpha = 0.2;   // exact match
    double beta = 0.2;    // semantic similarity
    double gamma = 0.2;   // textual fluency
    double lambda = 0.2;  // length penalty
    double delta = 0.2;   // LLM-Eval

    /// Throws ConfigError when the invariant does not hold.
    void validate() const;
    bool operator==(const RewardWeights&) const = default;
};

struct RewardBreakdown {
    double em = 0.0;
    double ss = 0.0;
    double tf = 0.0;
    double lp = 0.0;
    double llm_eval = 0.0;
    double total = 0.0;
    bool llm_eval_failed = false;
};

enum class EmMode { normalized, literal };

/// 1 when the response matches any gold string, else 0. An empty gold set
/// never matches.
double exact_match(std::span<const std::string> gold_set, std::string_view response,
                   EmMode mode = EmMode::normalized);

/// Harmonic mean of token precision and recall over tokenized text. Two
/// empty token lists count as identical.
double token_f1(std::string_view gold, std::string_view response);

class SimilarityBackend {
public:
    virtual ~SimilarityBackend() = default;
    virtual double similarity(std::string_view gold, std::string_view response) = 0;
};

class TokenF1Similarity final : public SimilarityBackend {
public:
    double similarity(std::string_view gold, std::string_view response) override {
        return token_f1(gold, response);
    }
};

/// Cosine similarity of endpoint embeddings mapped from [-1, 1] to [0, 1].
class EmbeddingSimilarity final : public SimilarityBackend {
public:
    explicit EmbeddingSimilarity(llm::EmbeddingClient& client) : client_(client) {}
    double similarity(std::string_view gold, std::string_view response) override;

private:
    llm::EmbeddingClient& client_;
};

double semantic_similarity(std::string_view gold, std::string_view response, SimilarityBackend& backend);

/// Length of the longest common subsequence, two-row dynamic program.
template <typename T>
std::size_t lcs_length(std::span<const T> a, std::span<const T> b) {
    if (a.empty() || b.empty()) return 0;
    if (b.size() > a.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// ROUGE-L F-measure from an LCS length and the two sequence lengths.
double rouge_l_from_lcs(std::size_t lcs, std::size_t gold_len, std::size_t response_len);

template <typename T>
double rouge_l(std::span<const T> gold, std::span<const T> response) {
    return rouge_l_from_lcs(lcs_length(gold, response), gold.size(), response.size());
}

/// ROUGE-L F over tokenized text.
double textual_fluency(std::string_view gold, std::string_view response);

/// 1 / (1 + number of whitespace tokens).
double length_penalty(std::string_view response);

struct JudgeSettings {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 256;
    std::string few_shot;
};

struct LlmEvalResult {
    double score = 0.0;
    bool failed = false;
};

/// Asks the judge for a rubric score; re-asks once when the reply carries no
/// "Score: N". Returns (0, failed) when both replies are unparseable.
LlmEvalResult llm_eval(llm::ChatBackend& judge, std::string_view instruction, std::string_view gold,
                       std::string_view response, const JudgeSettings& settings = {});

struct RewardInputs {
    std::string instruction;
    std::vector<std::string> gold_set;
    std::string gold_primary;  // SS and TF reference; defaults to gold_set[0]
    std::string response;
};

struct RewardOptions {
    EmMode em_mode = EmMode::normalized;
    JudgeSettings judge;
};

RewardBreakdown compute_reward(const RewardWeights& weights, const RewardInputs& in, llm::ChatBackend& judge,
                               SimilarityBackend& similarity, const RewardOptions& opts = {});

/// alpha*em + beta*ss + gamma*tf + lambda*lp + delta*llm_eval.
double weighted_total(const RewardWeights& w, const RewardBreakdown& b);

}  // namespace dynrag::reward
