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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dynrag {

struct Document {
    std::string id;
    std::string title;
    std::string content;

    bool operator==(const Document&) const = default;
};

/// Evaluation task family; selects the answer instruction and length budget.
enum class Task { open_domain_qa, fever, eli5, arc };

std::string_view task_name(Task t);
std::optional<Task> parse_task(std::string_view name);

struct Query {
    std::string id;
    std::string text;
    std::vector<std::string> gold_answers;
    Task task = Task::open_domain_qa;
};

/// A scored hit. Ranks are 1-based and scores non-increasing within a result.
struct RetrievedDoc {
    Document doc;
    double score = 0.0;
    std::size_t rank = 0;
};

class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Document> docs);

    /// Adds a document; throws Error on an empty or duplicate id.
    void add(Document doc);

    std::size_t size() const noexcept { return docs_.size(); }
    bool empty() const noexcept { return docs_.empty(); }
    const std::vector<Document>& documents() const noexcept { return docs_; }
    const Document* find(std::string_view id) const;

private:
    std::vector<Document> docs_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Reads a newline-delimited {"id","title","text"} corpus file.
Corpus ingest_corpus(const std::filesystem::path& source);

struct DatasetLoad {
    std::vector<Query> queries;
    /// One message per malformed line (only populated in lenient mode).
    std::vector<std::string> failures;
};

/// Reads a newline-delimited {"id","question","answers","task"} dataset.
/// Strict mode throws on the first malformed record.
DatasetLoad load_dataset(const std::filesystem::path& path, bool lenient = false);

/// Retrieval strategy: returns up to n documents ordered by score
/// descending, ties by ascending document id.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<RetrievedDoc> retrieve(const Query& query, std::size_t n) const = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Immutable inverted index over tokenized "title content" with Okapi BM25
/// scoring. idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).
class Bm25Index final : public Retriever {
public:
    struct Posting {
        std::size_t doc;  // index into the corpus
        std::uint32_t tf;
    };

    static Bm25Index build(std::shared_ptr<const Corpus> corpus, Bm25Params params = {});

    std::vector<RetrievedDoc> retrieve(const Query& query, std::size_t n) const override;

    std::size_t document_frequency(std::string_view term) const;
    std::uint32_t term_frequency(std::string_view term, std::string_view doc_id) const;
    std::size_t doc_length(std::size_t doc) const { return doc_len_.at(doc); }
    double avgdl() const noexcept { return avgdl_; }
    std::size_t num_terms() const noexcept { return postings_.size(); }
    const Bm25Params& params() const noexcept { return params_; }
    const Corpus& corpus() const noexcept { return *corpus_; }

private:
    Bm25Index() = default;

    std::shared_ptr<const Corpus> corpus_;
    Bm25Params params_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<std::size_t> doc_len_;
    double avgdl_ = 0.0;
};

/// (query_id, doc_id) -> score, loaded from {"query_id","doc_id","score"} lines.
class ScoreTable {
public:
    static ScoreTable load(const std::filesystem::path& path);

    void set(const std::string& query_id, const std::string& doc_id, double score);
    std::optional<double> get(std::string_view query_id, std::string_view doc_id) const;
    /// All scored documents of one query, in doc-id order.
    std::vector<std::pair<std::string, double>> for_query(std::string_view query_id) const;
    std::size_t size() const noexcept;

private:
    std::map<std::string, std::map<std::string, double, std::less<>>, std::less<>> scores_;
};

/// Retriever backed by externally computed scores (e.g. a dense retriever).
class PrecomputedRetriever final : public Retriever {
public:
    PrecomputedRetriever(std::shared_ptr<const Corpus> corpus, ScoreTable scores);
    std::vector<RetrievedDoc> retrieve(const Query& query, std::size_t n) const override;

private:
    std::shared_ptr<const Corpus> corpus_;
    ScoreTable scores_;
};

/// Sort (score desc, id asc), keep n, assign ranks 1..n.
std::vector<RetrievedDoc> rank_hits(std::vector<RetrievedDoc> hits, std::size_t n);

}  // namespace dynrag
