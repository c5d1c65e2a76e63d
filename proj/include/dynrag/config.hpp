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
#include <filesystem>
#include <string>

#include "dynrag/corpus.hpp"
#include "dynrag/eval.hpp"
#include "dynrag/jsonl.hpp"
#include "dynrag/llm_client.hpp"
#include "dynrag/reranker.hpp"
#include "dynrag/reward.hpp"

namespace dynrag {

struct RetrievalSettings {
    std::size_t n = 20;
    Bm25Params bm25;
    std::string scores_file;  // external retriever scores; empty = built-in BM25

    bool operator==(const RetrievalSettings& o) const {
        return n == o.n && bm25.k1 == o.bm25.k1 && bm25.b == o.bm25.b && scores_file == o.scores_file;
    }
};

struct RerankerSettings {
    std::size_t window = 20;
    std::size_t stride = 10;
    std::size_t k_max = 15;
    double temperature = 0.2;
    double top_p = 1.0;
    int max_tokens = 128;
    std::size_t max_content_tokens = 200;

    bool operator==(const RerankerSettings&) const = default;
};

struct ExpertSettings {
    std::string scores_file;
    double tau = 0.8;

    bool operator==(const ExpertSettings&) const = default;
};

struct SamplingSettings {
    std::size_t n_samples = 8;
    double temperature = 1.0;
    double top_p = 0.9;
    std::size_t max_in_flight = 4;

    bool operator==(const SamplingSettings&) const = default;
};

struct RewardSettings {
    reward::RewardWeights weights;
    std::string similarity = "token_f1";  // or "embedding"
    bool literal_em = false;
    double judge_temperature = 0.0;
    int judge_max_tokens = 256;
    std::string few_shot;

    bool operator==(const RewardSettings&) const = default;
};

struct EvalSettingsConfig {
    double failure_threshold = 0.1;
    std::vector<std::size_t> recall_ks{5, 10, 20};
    std::string containment = "token";  // or "substring"

    bool operator==(const EvalSettingsConfig&) const = default;
};

struct Endpoints {
    llm::EndpointConfig reranker;
    llm::EndpointConfig generator;
    llm::EndpointConfig judge;
    llm::EndpointConfig embeddings;

    bool operator==(const Endpoints&) const = default;
};

/// Every knob of the pipeline. Relative paths in the file resolve against
/// the directory holding the config file.
struct PipelineConfig {
    std::string corpus;
    std::int64_t seed = 0;
    RetrievalSettings retrieval;
    RerankerSettings reranker;
    ExpertSettings expert;
    SamplingSettings sampling;
    RewardSettings reward;
    eval::GeneratorSettings generator;
    double dpo_beta = 0.1;
    Endpoints endpoints;
    EvalSettingsConfig eval;
    std::string output_dir = "out";
    bool strict_parse = false;

    bool operator==(const PipelineConfig&) const = default;

    rerank::RerankConfig rerank_config() const;
    rerank::SamplingConfig sampling_config() const;
    rerank::ExpertConfig expert_config() const;
    eval::EvalSettings eval_settings() const;
    reward::RewardOptions reward_options() const;
};

/// Parses and validates; unknown keys are rejected. Throws ConfigError.
PipelineConfig config_from_json(const jsonl::Json& j, const std::filesystem::path& base_dir);

PipelineConfig load_config(const std::filesystem::path& path);

/// Fully resolved config with every default written out.
jsonl::Json config_to_json(const PipelineConfig& cfg);

/// Invariants: weights valid, k_max <= retrieval n, window >= stride >= 1,
/// referenced files exist.
void validate(const PipelineConfig& cfg);

}  // namespace dynrag
