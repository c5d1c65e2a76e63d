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

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynrag/corpus.hpp"
#include "dynrag/llm_client.hpp"
#include "dynrag/reranker.hpp"

namespace dynrag::eval {

/// How a gold answer "occurs" in a text: as a run of whole normalized
/// tokens, or as a raw substring of the normalized text.
enum class Containment { token, substring };

double metric_em(std::span<const std::string> gold_set, std::string_view answer);

double metric_accuracy(std::span<const std::string> gold_set, std::string_view answer,
                       Containment mode = Containment::token);

/// ROUGE-L F against the best-matching reference.
double metric_rouge_l(std::span<const std::string> references, std::string_view answer);

/// 1 when any of the first k documents (title + content) contains a gold answer.
double recall_at_k(std::span<const std::string> gold_set, std::span<const Document> ranked, std::size_t k,
                   Containment mode = Containment::token);

struct GeneratorSettings {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens_short = 50;
    int max_tokens_long = 256;
    std::size_t max_content_tokens = 200;

    bool operator==(const GeneratorSettings&) const = default;
};

/// One generator call over the selected documents.
std::string generate_answer(llm::ChatBackend& generator, const Query& query, std::span<const Document> selected,
                            const GeneratorSettings& settings, prompts::RenderedPrompt* rendered = nullptr);

struct EvalRecord {
    Query query;
    std::vector<RetrievedDoc> docs;
    rerank::RerankDecision decision;
    std::string answer;
    std::vector<std::pair<std::string, double>> scores;
};

struct MetricSummary {
    double mean = 0.0;
    std::size_t count = 0;
};

struct EvalReport {
    std::string dataset;
    std::size_t n = 0;
    std::vector<std::pair<std::string, MetricSummary>> metrics;
    std::vector<std::size_t> k_histogram;  // index k holds the number of records selecting k docs
    std::size_t failures = 0;
};

struct EvalSettings {
    std::size_t retrieval_n = 20;
    rerank::RerankConfig rerank;
    GeneratorSettings generator;
    std::vector<std::size_t> recall_ks{5, 10, 20};
    Containment containment = Containment::token;
    bool keep_prompts = false;
};

struct EvalBackends {
    const Retriever& retriever;
    llm::ChatBackend& reranker;
    llm::ChatBackend& generator;
};

struct DumpedPrompt {
    std::string query_id;
    prompts::RenderedPrompt prompt;
};

struct EvalRun {
    EvalReport report;
    std::vector<EvalRecord> records;
    std::vector<std::string> failure_log;
    std::vector<DumpedPrompt> prompts;  // filled when keep_prompts is set

    double failure_fraction() const;
};

/// retrieve -> rerank (sliding window when needed) -> generate -> score, per
/// query in dataset order. Malformed dataset lines and per-query errors are
/// logged and counted; the run continues.
EvalRun run_eval(const std::filesystem::path& dataset, const EvalBackends& backends, const EvalSettings& settings);

/// Aggregates means and the k histogram over finished records.
EvalReport summarize(std::string dataset, std::span<const EvalRecord> records, std::size_t k_max,
                     std::size_t failures);

std::string record_json(const EvalRecord& r);
std::string report_json(const EvalReport& r);
std::string report_table(const EvalReport& r);

}  // namespace dynrag::eval
