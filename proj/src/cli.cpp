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

#include "dynrag/cli.hpp"

#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "dynrag/config.hpp"
#include "dynrag/corpus.hpp"
#include "dynrag/error.hpp"
#include "dynrag/eval.hpp"
#include "dynrag/preference.hpp"
#include "dynrag/reranker.hpp"
#include "dynrag/reward.hpp"

namespace dynrag::cli {

namespace fs = std::filesystem;
using jsonl::Json;

namespace {

/// Error that maps to the usage/config exit status.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Options {
    std::string config;
    std::string out;
    std::optional<std::int64_t> seed;
    bool strict_parse = false;
    bool dump_prompts = false;
    std::string dataset;
    std::string expert_scores;
    std::string trajectories;
    std::string scored;
    bool sft_for_generator = false;
};

struct Context {
    PipelineConfig cfg;
    Options opts;
    std::ostream& out;
    std::ostream& err;
    std::shared_ptr<Corpus> corpus;
    std::unique_ptr<Retriever> retriever;
    std::vector<Json> prompt_dump;

    fs::path output(const std::string& name) const { return fs::path(cfg.output_dir) / name; }

    void log(const std::string& msg) const { err << "[dynrag] " << msg << "\n"; }

    void dump(const std::string& stage, const std::string& query_id, const prompts::RenderedPrompt& p) {
        if (!opts.dump_prompts) return;
        Json j;
        j["stage"] = stage;
        j["query_id"] = query_id;
        j["template"] = prompts::template_name(p.template_id);
        j["system"] = p.system_text;
        j["user"] = p.user_text;
        prompt_dump.push_back(std::move(j));
    }

    void flush_prompts() const {
        if (!opts.dump_prompts) return;
        std::string body;
        for (const auto& j : prompt_dump) body += j.dump() + "\n";
        jsonl::write_atomic(output("prompts.jsonl"), body);
        log("wrote " + std::to_string(prompt_dump.size()) + " prompts to " + output("prompts.jsonl").string());
    }
};

void load_corpus(Context& ctx, bool want_retriever) {
    try {
        ctx.corpus = std::make_shared<Corpus>(ingest_corpus(ctx.cfg.corpus));
    } catch (const FormatError& e) {
        throw UsageError(ctx.cfg.corpus + ": " + e.what());
    }
    if (!want_retriever) return;
    if (!ctx.cfg.retrieval.scores_file.empty()) {
        ctx.retriever = std::make_unique<PrecomputedRetriever>(ctx.corpus, ScoreTable::load(ctx.cfg.retrieval.scores_file));
    } else {
        ctx.retriever = std::make_unique<Bm25Index>(Bm25Index::build(ctx.corpus, ctx.cfg.retrieval.bm25));
    }
}

std::vector<Query> load_queries(const Context& ctx) {
    if (ctx.opts.dataset.empty()) throw UsageError("--dataset is required");
    if (!fs::exists(ctx.opts.dataset)) throw UsageError("dataset file not found: " + ctx.opts.dataset);
    try {
        return load_dataset(ctx.opts.dataset).queries;
    } catch (const FormatError& e) {
        throw UsageError(ctx.opts.dataset + ": " + e.what());
    }
}

std::string k_histogram_line(const std::vector<std::size_t>& hist) {
    std::string s = "k histogram:";
    for (std::size_t k = 0; k < hist.size(); ++k)
        if (hist[k]) s += " " + std::to_string(k) + ":" + std::to_string(hist[k]);
    return s;
}

// Documents handed to a single reranker prompt: the top `window` hits.
std::vector<RetrievedDoc> window_hits(const Context& ctx, const Query& q) {
    const std::size_t n = std::min(ctx.cfg.retrieval.n, ctx.cfg.reranker.window);
    return ctx.retriever->retrieve(q, n);
}

int check_failures(const Context& ctx, std::size_t failures, std::size_t total) {
    if (total == 0 || failures == 0) return kOk;
    const double frac = static_cast<double>(failures) / static_cast<double>(total);
    if (frac > ctx.cfg.eval.failure_threshold) {
        ctx.log("failure fraction " + std::to_string(frac) + " exceeds threshold " +
                std::to_string(ctx.cfg.eval.failure_threshold));
        return kRuntimeFailure;
    }
    return kOk;
}

// --- index / retrieve --------------------------------------------------------------

int cmd_index(Context& ctx) {
    load_corpus(ctx, false);
    auto index = Bm25Index::build(ctx.corpus, ctx.cfg.retrieval.bm25);
    Json j;
    j["documents"] = ctx.corpus->size();
    j["terms"] = index.num_terms();
    j["avgdl"] = jsonl::round12(index.avgdl());
    j["k1"] = index.params().k1;
    j["b"] = index.params().b;
    jsonl::write_atomic(ctx.output("index_stats.json"), j.dump(2) + "\n");
    ctx.out << "indexed " << ctx.corpus->size() << " documents, " << index.num_terms() << " terms\n";
    return kOk;
}

int cmd_retrieve(Context& ctx) {
    load_corpus(ctx, true);
    auto queries = load_queries(ctx);
    std::string body;
    std::size_t records = 0;
    for (const auto& q : queries) {
        for (const auto& hit : ctx.retriever->retrieve(q, ctx.cfg.retrieval.n)) {
            Json j;
            j["query_id"] = q.id;
            j["doc_id"] = hit.doc.id;
            j["score"] = jsonl::round12(hit.score);
            j["rank"] = hit.rank;
            body += j.dump() + "\n";
            ++records;
        }
    }
    jsonl::write_atomic(ctx.output("retrieval.jsonl"), body);
    ctx.out << "retrieved " << records << " records for " << queries.size() << " queries\n";
    return kOk;
}

// --- behavior cloning ------------------------------------------------------------------

int cmd_bc_export(Context& ctx) {
    load_corpus(ctx, true);
    auto queries = load_queries(ctx);
    std::string scores_path = ctx.opts.expert_scores.empty() ? ctx.cfg.expert.scores_file : ctx.opts.expert_scores;
    if (scores_path.empty()) throw UsageError("expert scores required (--expert-scores or expert.scores_file)");
    if (!fs::exists(scores_path)) throw UsageError("expert scores file not found: " + scores_path);
    const auto scores = ScoreTable::load(scores_path);
    const auto expert = ctx.cfg.expert_config();

    std::vector<rerank::BcExample> examples;
    std::string sft_body;
    std::vector<std::size_t> hist(expert.k_max + 1, 0);
    for (const auto& q : queries) {
        auto docs = window_hits(ctx, q);
        if (docs.empty()) {
            ctx.log("query \"" + q.id + "\": no retrieved documents, skipped");
            continue;
        }
        auto decision = rerank::expert_rerank(expert, scores, q, docs);
        auto prompt = prompts::render_reranker_prompt(q, docs, ctx.cfg.reranker.max_content_tokens);
        ctx.dump("bc-export", q.id, prompt);
        ++hist[decision.k()];
        if (ctx.opts.sft_for_generator && !q.gold_answers.empty()) {
            std::vector<Document> selected;
            for (std::size_t p : decision.positions) selected.push_back(docs[p - 1].doc);
            auto gen = prompts::render_generator_prompt(q, selected, ctx.cfg.generator.max_content_tokens);
            Json j;
            j["prompt"] = gen.full_text();
            j["completion"] = q.gold_answers.front();
            j["query_id"] = q.id;
            sft_body += j.dump() + "\n";
        }
        examples.push_back({prompt.full_text(), std::move(decision)});
    }
    std::ostringstream sink;
    const std::size_t n = rerank::export_bc_dataset(examples, sink);
    jsonl::write_atomic(ctx.output("bc.jsonl"), sink.str());
    if (ctx.opts.sft_for_generator) jsonl::write_atomic(ctx.output("sft_generator.jsonl"), sft_body);
    ctx.flush_prompts();
    ctx.out << "bc records: " << n << "\n" << k_histogram_line(hist) << "\n";
    return kOk;
}

}  // namespace

// --- trajectory stage files -----------------------------------------------------------

Json trajectory_json(const rerank::Trajectory& t, std::size_t index) {
    Json j;
    j["query_id"] = t.decision.query_id;
    j["trajectory_index"] = index;
    j["seed"] = t.sampling.seed ? Json(*t.sampling.seed) : Json(nullptr);
    j["temperature"] = t.sampling.temperature;
    j["top_p"] = t.sampling.top_p;
    j["prompt"] = t.prompt;
    j["raw_output"] = t.raw_output;
    j["positions"] = t.decision.positions;
    j["doc_ids"] = t.decision.doc_ids;
    j["k"] = t.decision.k();
    j["parse_warnings"] = t.parse_warnings;
    if (!t.ok()) j["error"] = t.error;
    return j;
}

rerank::Trajectory trajectory_from_json(const Json& j, std::size_t line, std::size_t* index) {
    rerank::Trajectory t;
    try {
        t.decision.query_id = jsonl::require_string(j, "query_id", line);
        t.prompt = jsonl::require_string(j, "prompt", line);
        t.raw_output = jsonl::require_string(j, "raw_output", line);
        t.decision.positions = j.at("positions").get<std::vector<std::size_t>>();
        t.decision.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
        t.sampling.temperature = j.at("temperature").get<double>();
        t.sampling.top_p = j.at("top_p").get<double>();
        if (!j.at("seed").is_null()) t.sampling.seed = j.at("seed").get<std::int64_t>();
        t.parse_warnings = j.value("parse_warnings", std::size_t{0});
        if (j.contains("error")) t.error = j.at("error").get<std::string>();
        if (index) *index = j.at("trajectory_index").get<std::size_t>();
        if (auto r = j.find("reward"); r != j.end()) {
            reward::RewardBreakdown b;
            b.em = r->at("em").get<double>();
            b.ss = r->at("ss").get<double>();
            b.tf = r->at("tf").get<double>();
            b.lp = r->at("lp").get<double>();
            b.llm_eval = r->at("llm_eval").get<double>();
            b.llm_eval_failed = r->at("llm_eval_failed").get<bool>();
            b.total = r->at("total").get<double>();
            t.reward = b;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed trajectory record: ") + e.what(), line);
    }
    if (t.decision.positions.size() != t.decision.doc_ids.size())
        throw FormatError("positions and doc_ids differ in length", line);
    return t;
}

namespace {

Json reward_json(const reward::RewardBreakdown& b) {
    Json j;
    j["em"] = jsonl::round12(b.em);
    j["ss"] = jsonl::round12(b.ss);
    j["tf"] = jsonl::round12(b.tf);
    j["lp"] = jsonl::round12(b.lp);
    j["llm_eval"] = jsonl::round12(b.llm_eval);
    j["llm_eval_failed"] = b.llm_eval_failed;
    j["total"] = jsonl::round12(b.total);
    return j;
}

int cmd_sample(Context& ctx) {
    load_corpus(ctx, true);
    auto queries = load_queries(ctx);
    auto policy = llm::make_backend(ctx.cfg.endpoints.reranker);
    const auto rc = ctx.cfg.rerank_config();
    const auto sc = ctx.cfg.sampling_config();
    std::string body;
    std::size_t written = 0, failures = 0;
    for (const auto& q : queries) {
        auto docs = window_hits(ctx, q);
        if (docs.empty()) {
            ctx.log("query \"" + q.id + "\": no retrieved documents, skipped");
            ++failures;
            continue;
        }
        ctx.dump("sample", q.id, prompts::render_reranker_prompt(q, docs, rc.max_content_tokens));
        try {
            auto trajs = rerank::sample_trajectories(*policy, q, docs, rc, sc);
            for (std::size_t i = 0; i < trajs.size(); ++i) {
                if (!trajs[i].ok()) ctx.log("query \"" + q.id + "\" trajectory " + std::to_string(i) + ": " + trajs[i].error);
                body += trajectory_json(trajs[i], i).dump() + "\n";
                ++written;
            }
        } catch (const rerank::SamplingError& e) {
            ctx.log(e.what());
            ++failures;
        }
    }
    jsonl::write_atomic(ctx.output("trajectories.jsonl"), body);
    ctx.flush_prompts();
    ctx.out << "trajectories: " << written << " for " << queries.size() - failures << " queries\n";
    return check_failures(ctx, failures, queries.size());
}

int cmd_score(Context& ctx) {
    load_corpus(ctx, false);
    auto queries = load_queries(ctx);
    std::map<std::string, const Query*> by_id;
    for (const auto& q : queries) by_id[q.id] = &q;

    const fs::path traj_path = ctx.opts.trajectories.empty() ? ctx.output("trajectories.jsonl") : fs::path(ctx.opts.trajectories);
    if (!fs::exists(traj_path)) throw UsageError("trajectories file not found: " + traj_path.string());

    auto generator = llm::make_backend(ctx.cfg.endpoints.generator);
    auto judge = llm::make_backend(ctx.cfg.endpoints.judge);
    std::unique_ptr<llm::EmbeddingClient> embed_client;
    std::unique_ptr<reward::SimilarityBackend> similarity;
    if (ctx.cfg.reward.similarity == "embedding") {
        if (ctx.cfg.endpoints.embeddings.backend != "http")
            throw UsageError("reward.similarity \"embedding\" needs an http embeddings endpoint");
        embed_client = std::make_unique<llm::EmbeddingClient>(ctx.cfg.endpoints.embeddings);
        similarity = std::make_unique<reward::EmbeddingSimilarity>(*embed_client);
    } else {
        similarity = std::make_unique<reward::TokenF1Similarity>();
    }
    const auto ropts = ctx.cfg.reward_options();

    std::string scored_body, report_body;
    std::size_t scored = 0, failures = 0, total = 0;
    jsonl::for_each_record(traj_path, [&](const Json& j, std::size_t line) {
        ++total;
        std::size_t index = 0;
        auto t = trajectory_from_json(j, line, &index);
        if (!t.ok()) {
            ctx.log("query \"" + t.decision.query_id + "\" trajectory " + std::to_string(index) + ": not scored, sampling failed");
            ++failures;
            return;
        }
        auto qit = by_id.find(t.decision.query_id);
        if (qit == by_id.end()) throw UsageError("trajectory references unknown query \"" + t.decision.query_id + "\"");
        const Query& q = *qit->second;
        if (q.gold_answers.empty()) {
            ctx.log("query \"" + q.id + "\": no gold answers, trajectory " + std::to_string(index) + " not scored");
            ++failures;
            return;
        }
        try {
            std::vector<Document> selected;
            for (const auto& id : t.decision.doc_ids) {
                const Document* d = ctx.corpus->find(id);
                if (!d) throw FormatError("unknown document \"" + id + "\"", line);
                selected.push_back(*d);
            }
            prompts::RenderedPrompt gen_prompt;
            const std::string answer = eval::generate_answer(*generator, q, selected, ctx.cfg.generator, &gen_prompt);
            ctx.dump("score", q.id, gen_prompt);
            reward::RewardInputs in{q.text, q.gold_answers, q.gold_answers.front(), answer};
            auto b = reward::compute_reward(ctx.cfg.reward.weights, in, *judge, *similarity, ropts);

            const Json rj = reward_json(b);
            Json rec = trajectory_json(t, index);
            rec["answer"] = answer;
            rec["reward"] = rj;
            scored_body += rec.dump() + "\n";

            Json rep;
            rep["query_id"] = q.id;
            rep["trajectory_index"] = index;
            for (const auto& [k, v] : rj.items()) rep[k] = v;
            report_body += rep.dump() + "\n";
            ++scored;
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception& e) {
            ctx.log("query \"" + q.id + "\" trajectory " + std::to_string(index) + ": " + e.what());
            ++failures;
        }
    });
    jsonl::write_atomic(ctx.output("scored_trajectories.jsonl"), scored_body);
    jsonl::write_atomic(ctx.output("rewards.jsonl"), report_body);
    ctx.flush_prompts();
    ctx.out << "scored trajectories: " << scored << " of " << total << "\n";
    return check_failures(ctx, failures, total);
}

int cmd_export_dpo(Context& ctx) {
    const fs::path scored_path = ctx.opts.scored.empty() ? ctx.output("scored_trajectories.jsonl") : fs::path(ctx.opts.scored);
    if (!fs::exists(scored_path)) throw UsageError("scored trajectories file not found: " + scored_path.string());

    std::vector<std::string> order;
    std::map<std::string, std::vector<rerank::Trajectory>> groups;
    jsonl::for_each_record(scored_path, [&](const Json& j, std::size_t line) {
        auto t = trajectory_from_json(j, line);
        if (!t.reward) throw FormatError("trajectory has no reward; run the score stage first", line);
        auto [it, inserted] = groups.try_emplace(t.decision.query_id);
        if (inserted) order.push_back(t.decision.query_id);
        it->second.push_back(std::move(t));
    });

    std::vector<preference::PreferencePair> pairs;
    std::size_t skipped = 0;
    for (const auto& qid : order) {
        const auto& trajs = groups[qid];
        if (trajs.size() < 2) {
            ctx.log("query \"" + qid + "\": fewer than 2 scored trajectories, skipped");
            ++skipped;
            continue;
        }
        auto pair = preference::select_pair(trajs);
        if (!pair) {
            ctx.log("query \"" + qid + "\": no strict preference among trajectories, skipped");
            ++skipped;
            continue;
        }
        pairs.push_back(std::move(*pair));
    }
    std::ostringstream sink;
    preference::export_dpo_pairs(pairs, sink);
    jsonl::write_atomic(ctx.output("dpo_pairs.jsonl"), sink.str());
    preference::Manifest m{ctx.cfg.dpo_beta, ctx.cfg.sampling.n_samples, ctx.cfg.reward.weights, ctx.cfg.seed};
    jsonl::write_atomic(ctx.output("dpo_manifest.json"), preference::manifest_json(m));
    ctx.out << "pairs formed: " << pairs.size() << ", queries skipped: " << skipped << "\n";
    return kOk;
}

int cmd_eval(Context& ctx) {
    load_corpus(ctx, true);
    if (ctx.opts.dataset.empty()) throw UsageError("--dataset is required");
    if (!fs::exists(ctx.opts.dataset)) throw UsageError("dataset file not found: " + ctx.opts.dataset);
    auto reranker = llm::make_backend(ctx.cfg.endpoints.reranker);
    auto generator = llm::make_backend(ctx.cfg.endpoints.generator);
    auto settings = ctx.cfg.eval_settings();
    settings.keep_prompts = ctx.opts.dump_prompts;
    auto run = eval::run_eval(ctx.opts.dataset, {*ctx.retriever, *reranker, *generator}, settings);
    for (const auto& msg : run.failure_log) ctx.log(msg);
    std::string body;
    for (const auto& r : run.records) body += eval::record_json(r) + "\n";
    jsonl::write_atomic(ctx.output("eval_records.jsonl"), body);
    jsonl::write_atomic(ctx.output("eval_report.json"), eval::report_json(run.report));
    for (const auto& p : run.prompts) ctx.dump("eval", p.query_id, p.prompt);
    ctx.flush_prompts();
    ctx.out << eval::report_table(run.report);
    if (run.failure_fraction() > ctx.cfg.eval.failure_threshold) {
        ctx.log("failure fraction exceeds threshold " + std::to_string(ctx.cfg.eval.failure_threshold));
        return kRuntimeFailure;
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"DynRAG pipeline: retrieval, dynamic reranking, reward scoring, preference data, evaluation",
                 "dynrag"};
    Options opts;
    app.add_option("--config", opts.config, "Pipeline config file (JSON)");
    app.add_option("--out", opts.out, "Output directory (overrides output_dir)");
    app.add_option("--seed", opts.seed, "Seed for every sampled call (overrides seed)");
    app.add_flag("--strict-parse", opts.strict_parse, "Reject malformed reranker output instead of repairing it");
    app.add_flag("--dump-prompts", opts.dump_prompts, "Write every rendered prompt to prompts.jsonl");
    app.require_subcommand(1);

    auto* index = app.add_subcommand("index", "Build the lexical index and report its statistics");
    auto* retrieve = app.add_subcommand("retrieve", "Write top-N retrieval results per query");
    retrieve->add_option("--dataset", opts.dataset, "Dataset file")->required();
    auto* bc = app.add_subcommand("bc-export", "Export expert demonstrations for behavior cloning");
    bc->add_option("--dataset", opts.dataset, "Dataset file")->required();
    bc->add_option("--expert-scores", opts.expert_scores, "Expert scores file (overrides expert.scores_file)");
    bc->add_flag("--sft-for-generator", opts.sft_for_generator, "Also write generator SFT records");
    auto* sample = app.add_subcommand("sample", "Sample reranker trajectories per query");
    sample->add_option("--dataset", opts.dataset, "Dataset file")->required();
    auto* score = app.add_subcommand("score", "Generate answers and score sampled trajectories");
    score->add_option("--dataset", opts.dataset, "Dataset file")->required();
    score->add_option("--trajectories", opts.trajectories, "Trajectories file (default OUT/trajectories.jsonl)");
    auto* dpo = app.add_subcommand("export-dpo", "Build preference pairs from scored trajectories");
    dpo->add_option("--scored", opts.scored, "Scored trajectories (default OUT/scored_trajectories.jsonl)");
    auto* evalc = app.add_subcommand("eval", "Run the inference pipeline and report metrics");
    evalc->add_option("--dataset", opts.dataset, "Dataset file")->required();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    // CLI11 reports a stray word as "not expected"; name it as a subcommand instead.
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--config" || a == "--out" || a == "--seed") {
            ++i;
            continue;
        }
        if (a.starts_with("-")) continue;
        if (!app.get_subcommand_no_throw(a)) {
            err << "error: unknown subcommand \"" << a << "\"\n\n" << app.help();
            return kUsage;
        }
        break;
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (opts.config.empty()) throw UsageError("--config is required");
        Context ctx{load_config(opts.config), opts, out, err, nullptr, nullptr, {}};
        if (!opts.out.empty()) ctx.cfg.output_dir = fs::absolute(opts.out).lexically_normal().string();
        if (opts.seed) ctx.cfg.seed = *opts.seed;
        if (opts.strict_parse) ctx.cfg.strict_parse = true;

        if (index->parsed()) return cmd_index(ctx);
        if (retrieve->parsed()) return cmd_retrieve(ctx);
        if (bc->parsed()) return cmd_bc_export(ctx);
        if (sample->parsed()) return cmd_sample(ctx);
        if (score->parsed()) return cmd_score(ctx);
        if (dpo->parsed()) return cmd_export_dpo(ctx);
        if (evalc->parsed()) return cmd_eval(ctx);
        return kUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}

}  // namespace dynrag::cli
