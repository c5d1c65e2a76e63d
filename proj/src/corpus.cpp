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

#include "dynrag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dynrag/error.hpp"
#include "dynrag/jsonl.hpp"
#include "dynrag/text.hpp"

namespace dynrag {

std::string_view task_name(Task t) {
    switch (t) {
        case Task::open_domain_qa: return "open_domain_qa";
        case Task::fever: return "fever";
        case Task::eli5: return "eli5";
        case Task::arc: return "arc";
    }
    return "open_domain_qa";
}

std::optional<Task> parse_task(std::string_view name) {
    for (Task t : {Task::open_domain_qa, Task::fever, Task::eli5, Task::arc})
        if (task_name(t) == name) return t;
    return std::nullopt;
}

Corpus::Corpus(std::vector<Document> docs) {
    docs_.reserve(docs.size());
    for (auto& d : docs) add(std::move(d));
}

void Corpus::add(Document doc) {
    if (doc.id.empty()) throw Error("document id must be non-empty");
    auto [it, inserted] = by_id_.emplace(doc.id, docs_.size());
    if (!inserted) throw Error("duplicate document id \"" + doc.id + "\"");
    docs_.push_back(std::move(doc));
}

const Document* Corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &docs_[it->second];
}

Corpus ingest_corpus(const std::filesystem::path& source) {
    if (!std::filesystem::exists(source)) throw IoError("corpus file not found: " + source.string());
    Corpus corpus;
    jsonl::for_each_record(source, [&](const jsonl::Json& j, std::size_t line) {
        Document d;
        d.id = jsonl::require_string(j, "id", line);
        d.title = jsonl::require_string(j, "title", line);
        d.content = jsonl::require_string(j, "text", line);
        if (d.id.empty()) throw FormatError("empty document id", line);
        if (corpus.find(d.id)) throw FormatError("duplicate document id \"" + d.id + "\"", line);
        corpus.add(std::move(d));
    });
    return corpus;
}

namespace {

Query parse_query(const jsonl::Json& j, std::size_t line) {
    Query q;
    q.id = jsonl::require_string(j, "id", line);
    q.text = jsonl::require_string(j, "question", line);
    if (text::trim(q.text).empty()) throw FormatError("empty question", line);
    if (auto it = j.find("answers"); it != j.end()) {
        if (!it->is_array()) throw FormatError("\"answers\" must be an array", line);
        for (const auto& a : *it) {
            if (!a.is_string()) throw FormatError("\"answers\" entries must be strings", line);
            q.gold_answers.push_back(a.get<std::string>());
        }
    }
    if (auto it = j.find("task"); it != j.end()) {
        if (!it->is_string()) throw FormatError("\"task\" must be a string", line);
        auto t = parse_task(it->get<std::string>());
        if (!t) throw FormatError("unknown task \"" + it->get<std::string>() + "\"", line);
        q.task = *t;
    }
    return q;
}

}  // namespace

DatasetLoad load_dataset(const std::filesystem::path& path, bool lenient) {
    if (!std::filesystem::exists(path)) throw IoError("dataset file not found: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    DatasetLoad out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            jsonl::Json j;
            try {
                j = jsonl::Json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
            }
            if (!j.is_object()) throw FormatError("record is not a JSON object", lineno);
            out.queries.push_back(parse_query(j, lineno));
        } catch (const FormatError& e) {
            if (!lenient) throw;
            out.failures.push_back(path.filename().string() + ": " + e.what());
        }
    }
    return out;
}

std::vector<RetrievedDoc> rank_hits(std::vector<RetrievedDoc> hits, std::size_t n) {
    auto better = [](const RetrievedDoc& a, const RetrievedDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc.id < b.doc.id;
    };
    if (hits.size() > n) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(), better);
        hits.resize(n);
    } else {
        std::sort(hits.begin(), hits.end(), better);
    }
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i].rank = i + 1;
    return hits;
}

Bm25Index Bm25Index::build(std::shared_ptr<const Corpus> corpus, Bm25Params params) {
    Bm25Index idx;
    idx.corpus_ = std::move(corpus);
    idx.params_ = params;
    const auto& docs = idx.corpus_->documents();
    idx.doc_len_.reserve(docs.size());
    std::size_t total = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        auto toks = text::tokenize(docs[d].title + " " + docs[d].content);
        idx.doc_len_.push_back(toks.size());
        total += toks.size();
        std::map<std::string, std::uint32_t> counts;
        for (auto& t : toks) ++counts[std::move(t)];
        for (auto& [term, tf] : counts) idx.postings_[term].push_back({d, tf});
    }
    idx.avgdl_ = docs.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs.size());
    return idx;
}

std::size_t Bm25Index::document_frequency(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? 0 : it->second.size();
}

std::uint32_t Bm25Index::term_frequency(std::string_view term, std::string_view doc_id) const {
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return 0;
    for (const auto& p : it->second)
        if (corpus_->documents()[p.doc].id == doc_id) return p.tf;
    return 0;
}

std::vector<RetrievedDoc> Bm25Index::retrieve(const Query& query, std::size_t n) const {
    if (n == 0) throw std::invalid_argument("retrieve: n must be >= 1");
    const auto& docs = corpus_->documents();
    const double num_docs = static_cast<double>(docs.size());
    std::vector<double> acc(docs.size(), 0.0);
    std::vector<char> touched(docs.size(), 0);
    for (const auto& term : text::tokenize(query.text)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (num_docs - df + 0.5) / (df + 0.5));
        for (const auto& p : it->second) {
            const double tf = p.tf;
            const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc_len_[p.doc]) / avgdl_);
            acc[p.doc] += idf * tf * (params_.k1 + 1.0) / (tf + norm);
            touched[p.doc] = 1;
        }
    }
    std::vector<RetrievedDoc> hits;
    for (std::size_t d = 0; d < docs.size(); ++d)
        if (touched[d]) hits.push_back({docs[d], acc[d], 0});
    return rank_hits(std::move(hits), n);
}

ScoreTable ScoreTable::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("scores file not found: " + path.string());
    ScoreTable t;
    jsonl::for_each_record(path, [&](const jsonl::Json& j, std::size_t line) {
        auto q = jsonl::require_string(j, "query_id", line);
        auto d = jsonl::require_string(j, "doc_id", line);
        auto it = j.find("score");
        if (it == j.end() || !it->is_number()) throw FormatError("missing or non-numeric \"score\"", line);
        double s = it->get<double>();
        if (!std::isfinite(s)) throw FormatError("non-finite score", line);
        t.set(q, d, s);
    });
    return t;
}

void ScoreTable::set(const std::string& query_id, const std::string& doc_id, double score) {
    scores_[query_id][doc_id] = score;
}

std::optional<double> ScoreTable::get(std::string_view query_id, std::string_view doc_id) const {
    auto q = scores_.find(query_id);
    if (q == scores_.end()) return std::nullopt;
    auto d = q->second.find(doc_id);
    if (d == q->second.end()) return std::nullopt;
    return d->second;
}

std::vector<std::pair<std::string, double>> ScoreTable::for_query(std::string_view query_id) const {
    std::vector<std::pair<std::string, double>> out;
    auto q = scores_.find(query_id);
    if (q != scores_.end())
        for (const auto& [d, s] : q->second) out.emplace_back(d, s);
    return out;
}

std::size_t ScoreTable::size() const noexcept {
    std::size_t n = 0;
    for (const auto& [q, m] : scores_) n += m.size();
    return n;
}

PrecomputedRetriever::PrecomputedRetriever(std::shared_ptr<const Corpus> corpus, ScoreTable scores)
    : corpus_(std::move(corpus)), scores_(std::move(scores)) {}

std::vector<RetrievedDoc> PrecomputedRetriever::retrieve(const Query& query, std::size_t n) const {
    if (n == 0) throw std::invalid_argument("retrieve: n must be >= 1");
    std::vector<RetrievedDoc> hits;
    for (const auto& [doc_id, score] : scores_.for_query(query.id)) {
        const Document* d = corpus_->find(doc_id);
        if (!d) throw Error("scores reference unknown document \"" + doc_id + "\" for query \"" + query.id + "\"");
        hits.push_back({*d, score, 0});
    }
    return rank_hits(std::move(hits), n);
}

}  // namespace dynrag
