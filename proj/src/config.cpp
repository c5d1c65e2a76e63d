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

#include "dynrag/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "dynrag/error.hpp"

namespace dynrag {

namespace {

using Json = jsonl::Json;

// Reads members of one JSON object and rejects keys nobody asked for.
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(label() + " must be an object");
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError("unknown config key \"" + prefix() + k + "\"");
    }

    const Json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void get(const std::string& key, double& out) {
        if (auto v = find(key)) {
            if (!v->is_number()) fail(key, "a number");
            out = v->get<double>();
        }
    }
    void get(const std::string& key, std::size_t& out) {
        if (auto v = find(key)) {
            if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void get(const std::string& key, int& out) {
        if (auto v = find(key)) {
            if (!v->is_number_integer()) fail(key, "an integer");
            out = v->get<int>();
        }
    }
    void get(const std::string& key, std::int64_t& out) {
        if (auto v = find(key)) {
            if (!v->is_number_integer()) fail(key, "an integer");
            out = v->get<std::int64_t>();
        }
    }
    void get(const std::string& key, bool& out) {
        if (auto v = find(key)) {
            if (!v->is_boolean()) fail(key, "a boolean");
            out = v->get<bool>();
        }
    }
    void get(const std::string& key, std::string& out) {
        if (auto v = find(key)) {
            if (!v->is_string()) fail(key, "a string");
            out = v->get<std::string>();
        }
    }
    void get(const std::string& key, std::vector<std::size_t>& out) {
        if (auto v = find(key)) {
            if (!v->is_array()) fail(key, "an array of non-negative integers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number_unsigned()) fail(key, "an array of non-negative integers");
                out.push_back(e.get<std::size_t>());
            }
        }
    }
    void path(const std::string& key, std::string& out, const std::filesystem::path& base) {
        get(key, out);
        if (!out.empty()) {
            std::filesystem::path p(out);
            if (p.is_relative()) p = base / p;
            out = std::filesystem::absolute(p).lexically_normal().string();
        }
    }

    std::string prefix() const { return path_.empty() ? "" : path_ + "."; }

private:
    std::string label() const { return path_.empty() ? "config" : "\"" + path_ + "\""; }
    [[noreturn]] void fail(const std::string& key, const char* what) const {
        throw ConfigError("config key \"" + prefix() + key + "\" must be " + what);
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_endpoint(Section& parent, const std::string& name, llm::EndpointConfig& ep,
                   const std::filesystem::path& base) {
    const Json* j = parent.find(name);
    if (!j) return;
    Section s(*j, parent.prefix() + name);
    s.get("backend", ep.backend);
    s.get("base_url", ep.base_url);
    s.get("model", ep.model);
    s.get("api_key_env", ep.api_key_env);
    s.path("mock_script", ep.mock_script, base);
    s.get("default_reply", ep.default_reply);
    s.get("timeout_s", ep.timeout_s);
    s.get("max_retries", ep.max_retries);
    s.get("backoff_s", ep.backoff_s);
    if (s.find("api_key"))
        throw ConfigError("config key \"" + s.prefix() + "api_key\" is not allowed; name an environment variable in api_key_env");
    s.finish();
}

Json endpoint_json(const llm::EndpointConfig& ep) {
    Json j;
    j["backend"] = ep.backend;
    j["base_url"] = ep.base_url;
    j["model"] = ep.model;
    j["api_key_env"] = ep.api_key_env;
    j["mock_script"] = ep.mock_script;
    j["default_reply"] = ep.default_reply;
    j["timeout_s"] = ep.timeout_s;
    j["max_retries"] = ep.max_retries;
    j["backoff_s"] = ep.backoff_s;
    return j;
}

void require_file(const std::string& path, const std::string& what) {
    if (!path.empty() && !std::filesystem::exists(path)) throw ConfigError(what + " not found: " + path);
}

void validate_endpoint(const llm::EndpointConfig& ep, const std::string& name) {
    if (ep.backend != "mock" && ep.backend != "http")
        throw ConfigError("endpoints." + name + ".backend must be \"mock\" or \"http\"");
    if (ep.backend == "http" && ep.base_url.empty()) throw ConfigError("endpoints." + name + ".base_url is required for http");
    if (ep.max_retries < 0) throw ConfigError("endpoints." + name + ".max_retries must be >= 0");
    if (!(ep.timeout_s > 0)) throw ConfigError("endpoints." + name + ".timeout_s must be positive");
    require_file(ep.mock_script, "endpoints." + name + ".mock_script");
}

}  // namespace

void validate(const PipelineConfig& cfg) {
    if (cfg.corpus.empty()) throw ConfigError("config key \"corpus\" is required");
    require_file(cfg.corpus, "corpus file");
    require_file(cfg.retrieval.scores_file, "retrieval scores file");
    require_file(cfg.expert.scores_file, "expert scores file");
    cfg.reward.weights.validate();
    if (cfg.retrieval.n < 1) throw ConfigError("retrieval.n must be >= 1");
    if (cfg.reranker.k_max < 1) throw ConfigError("reranker.k_max must be >= 1");
    if (cfg.reranker.k_max > cfg.retrieval.n) throw ConfigError("reranker.k_max must not exceed retrieval.n");
    if (cfg.reranker.stride < 1 || cfg.reranker.stride > cfg.reranker.window)
        throw ConfigError("reranker needs window >= stride >= 1");
    if (cfg.reranker.max_tokens < 1) throw ConfigError("reranker.max_tokens must be >= 1");
    if (cfg.sampling.n_samples < 2) throw ConfigError("sampling.n_samples must be >= 2");
    if (cfg.sampling.max_in_flight < 1) throw ConfigError("sampling.max_in_flight must be >= 1");
    if (!(cfg.sampling.top_p > 0 && cfg.sampling.top_p <= 1)) throw ConfigError("sampling.top_p must be in (0, 1]");
    if (!(cfg.reranker.top_p > 0 && cfg.reranker.top_p <= 1)) throw ConfigError("reranker.top_p must be in (0, 1]");
    if (cfg.sampling.temperature < 0 || cfg.reranker.temperature < 0 || cfg.generator.temperature < 0)
        throw ConfigError("temperatures must be >= 0");
    if (!(cfg.dpo_beta > 0)) throw ConfigError("dpo_beta must be positive");
    if (cfg.reward.similarity != "token_f1" && cfg.reward.similarity != "embedding")
        throw ConfigError("reward.similarity must be \"token_f1\" or \"embedding\"");
    if (cfg.eval.containment != "token" && cfg.eval.containment != "substring")
        throw ConfigError("eval.containment must be \"token\" or \"substring\"");
    if (!(cfg.eval.failure_threshold >= 0 && cfg.eval.failure_threshold <= 1))
        throw ConfigError("eval.failure_threshold must be in [0, 1]");
    for (auto k : cfg.eval.recall_ks)
        if (k < 1) throw ConfigError("eval.recall_ks entries must be >= 1");
    validate_endpoint(cfg.endpoints.reranker, "reranker");
    validate_endpoint(cfg.endpoints.generator, "generator");
    validate_endpoint(cfg.endpoints.judge, "judge");
    validate_endpoint(cfg.endpoints.embeddings, "embeddings");
}

PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir) {
    PipelineConfig cfg;
    {
        Section root(j, "");
        root.path("corpus", cfg.corpus, base_dir);
        root.get("seed", cfg.seed);
        root.get("dpo_beta", cfg.dpo_beta);
        root.path("output_dir", cfg.output_dir, base_dir);
        root.get("strict_parse", cfg.strict_parse);
        if (auto v = root.find("retrieval")) {
            Section s(*v, "retrieval");
            s.get("n", cfg.retrieval.n);
            s.get("k1", cfg.retrieval.bm25.k1);
            s.get("b", cfg.retrieval.bm25.b);
            s.path("scores_file", cfg.retrieval.scores_file, base_dir);
            s.finish();
        }
        if (auto v = root.find("reranker")) {
            Section s(*v, "reranker");
            s.get("window", cfg.reranker.window);
            s.get("stride", cfg.reranker.stride);
            s.get("k_max", cfg.reranker.k_max);
            s.get("temperature", cfg.reranker.temperature);
            s.get("top_p", cfg.reranker.top_p);
            s.get("max_tokens", cfg.reranker.max_tokens);
            s.get("max_content_tokens", cfg.reranker.max_content_tokens);
            s.finish();
        }
        if (auto v = root.find("expert")) {
            Section s(*v, "expert");
            s.path("scores_file", cfg.expert.scores_file, base_dir);
            s.get("tau", cfg.expert.tau);
            s.finish();
        }
        if (auto v = root.find("sampling")) {
            Section s(*v, "sampling");
            s.get("n_samples", cfg.sampling.n_samples);
            s.get("temperature", cfg.sampling.temperature);
            s.get("top_p", cfg.sampling.top_p);
            s.get("max_in_flight", cfg.sampling.max_in_flight);
            s.finish();
        }
        if (auto v = root.find("reward")) {
            Section s(*v, "reward");
            if (auto w = s.find("weights")) {
                Section ws(*w, "reward.weights");
                ws.get("alpha", cfg.reward.weights.alpha);
                ws.get("beta", cfg.reward.weights.beta);
                ws.get("gamma", cfg.reward.weights.gamma);
                ws.get("lambda", cfg.reward.weights.lambda);
                ws.get("delta", cfg.reward.weights.delta);
                ws.finish();
            }
            s.get("similarity", cfg.reward.similarity);
            s.get("literal_em", cfg.reward.literal_em);
            s.get("judge_temperature", cfg.reward.judge_temperature);
            s.get("judge_max_tokens", cfg.reward.judge_max_tokens);
            s.get("few_shot", cfg.reward.few_shot);
            s.finish();
        }
        if (auto v = root.find("generator")) {
            Section s(*v, "generator");
            s.get("temperature", cfg.generator.temperature);
            s.get("top_p", cfg.generator.top_p);
            s.get("max_tokens_short", cfg.generator.max_tokens_short);
            s.get("max_tokens_long", cfg.generator.max_tokens_long);
            s.get("max_content_tokens", cfg.generator.max_content_tokens);
            s.finish();
        }
        if (auto v = root.find("endpoints")) {
            Section s(*v, "endpoints");
            read_endpoint(s, "reranker", cfg.endpoints.reranker, base_dir);
            read_endpoint(s, "generator", cfg.endpoints.generator, base_dir);
            read_endpoint(s, "judge", cfg.endpoints.judge, base_dir);
            read_endpoint(s, "embeddings", cfg.endpoints.embeddings, base_dir);
            s.finish();
        }
        if (auto v = root.find("eval")) {
            Section s(*v, "eval");
            s.get("failure_threshold", cfg.eval.failure_threshold);
            s.get("recall_ks", cfg.eval.recall_ks);
            s.get("containment", cfg.eval.containment);
            s.finish();
        }
        root.finish();
    }
    validate(cfg);
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Json j;
    try {
        j = Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

Json config_to_json(const PipelineConfig& cfg) {
    Json j;
    j["corpus"] = cfg.corpus;
    j["seed"] = cfg.seed;
    j["retrieval"] = {{"n", cfg.retrieval.n},
                      {"k1", cfg.retrieval.bm25.k1},
                      {"b", cfg.retrieval.bm25.b},
                      {"scores_file", cfg.retrieval.scores_file}};
    j["reranker"] = {{"window", cfg.reranker.window},
                     {"stride", cfg.reranker.stride},
                     {"k_max", cfg.reranker.k_max},
                     {"temperature", cfg.reranker.temperature},
                     {"top_p", cfg.reranker.top_p},
                     {"max_tokens", cfg.reranker.max_tokens},
                     {"max_content_tokens", cfg.reranker.max_content_tokens}};
    j["expert"] = {{"scores_file", cfg.expert.scores_file}, {"tau", cfg.expert.tau}};
    j["sampling"] = {{"n_samples", cfg.sampling.n_samples},
                     {"temperature", cfg.sampling.temperature},
                     {"top_p", cfg.sampling.top_p},
                     {"max_in_flight", cfg.sampling.max_in_flight}};
    const auto& w = cfg.reward.weights;
    j["reward"] = {{"weights", {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"lambda", w.lambda}, {"delta", w.delta}}},
                   {"similarity", cfg.reward.similarity},
                   {"literal_em", cfg.reward.literal_em},
                   {"judge_temperature", cfg.reward.judge_temperature},
                   {"judge_max_tokens", cfg.reward.judge_max_tokens},
                   {"few_shot", cfg.reward.few_shot}};
    j["generator"] = {{"temperature", cfg.generator.temperature},
                      {"top_p", cfg.generator.top_p},
                      {"max_tokens_short", cfg.generator.max_tokens_short},
                      {"max_tokens_long", cfg.generator.max_tokens_long},
                      {"max_content_tokens", cfg.generator.max_content_tokens}};
    j["dpo_beta"] = cfg.dpo_beta;
    j["endpoints"] = {{"reranker", endpoint_json(cfg.endpoints.reranker)},
                      {"generator", endpoint_json(cfg.endpoints.generator)},
                      {"judge", endpoint_json(cfg.endpoints.judge)},
                      {"embeddings", endpoint_json(cfg.endpoints.embeddings)}};
    j["eval"] = {{"failure_threshold", cfg.eval.failure_threshold},
                 {"recall_ks", cfg.eval.recall_ks},
                 {"containment", cfg.eval.containment}};
    j["output_dir"] = cfg.output_dir;
    j["strict_parse"] = cfg.strict_parse;
    return j;
}

rerank::RerankConfig PipelineConfig::rerank_config() const {
    rerank::RerankConfig rc;
    rc.k_max = reranker.k_max;
    rc.window = reranker.window;
    rc.stride = reranker.stride;
    rc.temperature = reranker.temperature;
    rc.top_p = reranker.top_p;
    rc.max_tokens = reranker.max_tokens;
    rc.max_content_tokens = reranker.max_content_tokens;
    rc.parse_mode = strict_parse ? prompts::ParseMode::strict : prompts::ParseMode::lenient;
    rc.seed = seed;
    return rc;
}

rerank::SamplingConfig PipelineConfig::sampling_config() const {
    return {sampling.n_samples, sampling.temperature, sampling.top_p, seed, sampling.max_in_flight};
}

rerank::ExpertConfig PipelineConfig::expert_config() const { return {expert.tau, reranker.k_max}; }

eval::EvalSettings PipelineConfig::eval_settings() const {
    eval::EvalSettings s;
    s.retrieval_n = retrieval.n;
    s.rerank = rerank_config();
    s.generator = generator;
    s.recall_ks = eval.recall_ks;
    s.containment = eval.containment == "substring" ? eval::Containment::substring : eval::Containment::token;
    return s;
}

reward::RewardOptions PipelineConfig::reward_options() const {
    reward::RewardOptions o;
    o.em_mode = reward.literal_em ? reward::EmMode::literal : reward::EmMode::normalized;
    o.judge.temperature = reward.judge_temperature;
    o.judge.max_tokens = reward.judge_max_tokens;
    o.judge.few_shot = reward.few_shot;
    return o;
}

}  // namespace dynrag
