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

#include "dynrag/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dynrag/jsonl.hpp"
#include "dynrag/reward.hpp"
#include "dynrag/text.hpp"

namespace dynrag::eval {

namespace {

bool occurs(const std::string& gold, const std::string& normalized_text,
            const std::vector<std::string>& text_tokens, Containment mode) {
    const std::string g = text::normalize_answer(gold);
    if (g.empty()) return false;
    if (mode == Containment::substring) return normalized_text.find(g) != std::string::npos;
    return text::contains_run(text_tokens, text::whitespace_tokens(g));
}

bool any_gold_in(std::span<const std::string> gold_set, std::string_view haystack, Containment mode) {
    const std::string norm = text::normalize_answer(haystack);
    const auto toks = text::whitespace_tokens(norm);
    return std::any_of(gold_set.begin(), gold_set.end(),
                       [&](const std::string& g) { return occurs(g, norm, toks, mode); });
}

}  // namespace

double metric_em(std::span<const std::string> gold_set, std::string_view answer) {
    return reward::exact_match(gold_set, answer);
}

double metric_accuracy(std::span<const std::string> gold_set, std::string_view answer, Containment mode) {
    return any_gold_in(gold_set, answer, mode) ? 1.0 : 0.0;
}

double metric_rouge_l(std::span<const std::string> references, std::string_view answer) {
    double best = 0.0;
    for (const auto& ref : references) best = std::max(best, reward::textual_fluency(ref, answer));
    return best;
}

double recall_at_k(std::span<const std::string> gold_set, std::span<const Document> ranked, std::size_t k,
                   Containment mode) {
    if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
    const std::size_t limit = std::min(k, ranked.size());
    for (std::size_t i = 0; i < limit; ++i)
        if (any_gold_in(gold_set, ranked[i].title + " " + ranked[i].content, mode)) return 1.0;
    return 0.0;
}

std::string generate_answer(llm::ChatBackend& generator, const Query& query, std::span<const Document> selected,
                            const GeneratorSettings& settings, prompts::RenderedPrompt* rendered) {
    llm::CompletionRequest req;
    req.role = llm::Role::generator;
    req.prompt = prompts::render_generator_prompt(query, selected, settings.max_content_tokens);
    req.temperature = settings.temperature;
    req.top_p = settings.top_p;
    req.max_tokens = prompts::answer_max_tokens(query.task, settings.max_tokens_short, settings.max_tokens_long);
    if (rendered) *rendered = req.prompt;
    return generator.complete(req).text;
}

double EvalRun::failure_fraction() const {
    const std::size_t total = report.n + report.failures;
    return total == 0 ? 0.0 : static_cast<double>(report.failures) / static_cast<double>(total);
}

EvalRun run_eval(const std::filesystem::path& dataset, const EvalBackends& backends, const EvalSettings& settings) {
    EvalRun run;
    auto load = load_dataset(dataset, /*lenient=*/true);
    run.failure_log = load.failures;

    for (const auto& q : load.queries) {
        try {
            EvalRecord rec;
            rec.query = q;
            rec.docs = backends.retriever.retrieve(q, settings.retrieval_n);
            if (!rec.docs.empty()) {
                if (settings.keep_prompts && rec.docs.size() <= settings.rerank.window)
                    run.prompts.push_back(
                        {q.id, prompts::render_reranker_prompt(q, rec.docs, settings.rerank.max_content_tokens)});
                rec.decision = rerank::sliding_window_rerank(backends.reranker, q, rec.docs, settings.rerank).decision;
            } else {
                rec.decision.query_id = q.id;
            }
            std::vector<Document> selected;
            for (std::size_t p : rec.decision.positions) selected.push_back(rec.docs[p - 1].doc);
            prompts::RenderedPrompt gen_prompt;
            rec.answer = generate_answer(backends.generator, q, selected, settings.generator, &gen_prompt);
            if (settings.keep_prompts) run.prompts.push_back({q.id, gen_prompt});

            std::vector<Document> retrieved;
            for (const auto& d : rec.docs) retrieved.push_back(d.doc);
            const auto& gold = q.gold_answers;
            rec.scores.emplace_back("em", metric_em(gold, rec.answer));
            rec.scores.emplace_back("accuracy", metric_accuracy(gold, rec.answer, settings.containment));
            rec.scores.emplace_back("rouge_l", metric_rouge_l(gold, rec.answer));
            rec.scores.emplace_back("k", static_cast<double>(rec.decision.k()));
            for (std::size_t k : settings.recall_ks)
                rec.scores.emplace_back("recall@" + std::to_string(k), recall_at_k(gold, selected, k, settings.containment));
            for (std::size_t k : settings.recall_ks)
                rec.scores.emplace_back("retrieval_recall@" + std::to_string(k),
                                        recall_at_k(gold, retrieved, k, settings.containment));
            run.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
            run.failure_log.push_back("query \"" + q.id + "\": " + e.what());
        }
    }
    run.report = summarize(dataset.filename().string(), run.records, settings.rerank.k_max, run.failure_log.size());
    return run;
}

EvalReport summarize(std::string dataset, std::span<const EvalRecord> records, std::size_t k_max,
                     std::size_t failures) {
    EvalReport rep;
    rep.dataset = std::move(dataset);
    rep.n = records.size();
    rep.failures = failures;
    rep.k_histogram.assign(k_max + 1, 0);
    for (const auto& r : records) {
        const std::size_t k = r.decision.k();
        if (k > k_max) throw Error("record \"" + r.query.id + "\" selects more than k_max documents");
        ++rep.k_histogram[k];
        for (const auto& [name, value] : r.scores) {
            auto it = std::find_if(rep.metrics.begin(), rep.metrics.end(), [&](const auto& m) { return m.first == name; });
            if (it == rep.metrics.end()) {
                rep.metrics.push_back({name, {}});
                it = rep.metrics.end() - 1;
            }
            it->second.mean += value;
            ++it->second.count;
        }
    }
    for (auto& [name, m] : rep.metrics)
        if (m.count) m.mean /= static_cast<double>(m.count);
    return rep;
}

std::string record_json(const EvalRecord& r) {
    jsonl::Json j;
    j["query_id"] = r.query.id;
    j["k"] = r.decision.k();
    j["positions"] = r.decision.positions;
    j["doc_ids"] = r.decision.doc_ids;
    j["answer"] = r.answer;
    for (const auto& [name, value] : r.scores)
        if (name != "k") j[name] = jsonl::round12(value);
    return j.dump();
}

std::string report_json(const EvalReport& r) {
    jsonl::Json j;
    j["dataset"] = r.dataset;
    j["n"] = r.n;
    jsonl::Json metrics = jsonl::Json::object();
    for (const auto& [name, m] : r.metrics) metrics[name] = {{"mean", jsonl::round12(m.mean)}, {"count", m.count}};
    j["metrics"] = metrics;
    j["k_histogram"] = r.k_histogram;
    j["failures"] = r.failures;
    return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r) {
    std::ostringstream out;
    out << "dataset: " << r.dataset << "  n=" << r.n << "  failures=" << r.failures << "\n";
    char line[128];
    std::snprintf(line, sizeof line, "%-24s %10s %8s\n", "metric", "mean", "count");
    out << line;
    for (const auto& [name, m] : r.metrics) {
        std::snprintf(line, sizeof line, "%-24s %10.4f %8zu\n", name.c_str(), m.mean, m.count);
        out << line;
    }
    out << "k histogram:";
    for (std::size_t k = 0; k < r.k_histogram.size(); ++k)
        if (r.k_histogram[k]) out << ' ' << k << ':' << r.k_histogram[k];
    out << "\n";
    return out.str();
}

}  // namespace dynrag::eval
