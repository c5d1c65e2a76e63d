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

#include <gtest/gtest.h>

#include "dynrag/config.hpp"
#include "dynrag/error.hpp"
#include "support.hpp"

using namespace dynrag;
using dynrag::testing::TempDir;
using dynrag::testing::write_file;

namespace {

struct Fixture {
    TempDir dir;
    Fixture() {
        write_file(dir / "corpus.jsonl", "{\"id\":\"d1\",\"title\":\"t\",\"text\":\"x\"}\n");
        write_file(dir / "mock.jsonl", "");
    }
    PipelineConfig load(const std::string& body) {
        write_file(dir / "cfg.json", body);
        return load_config(dir / "cfg.json");
    }
};

}  // namespace

TEST(Config, DefaultsFilled) {
    Fixture f;
    auto cfg = f.load(R"({"corpus":"corpus.jsonl"})");
    EXPECT_EQ(cfg.corpus, (f.dir.path() / "corpus.jsonl").string());
    EXPECT_EQ(cfg.retrieval.n, 20u);
    EXPECT_EQ(cfg.reranker.k_max, 15u);
    EXPECT_EQ(cfg.reranker.temperature, 0.2);
    EXPECT_EQ(cfg.sampling.n_samples, 8u);
    EXPECT_EQ(cfg.sampling.temperature, 1.0);
    EXPECT_EQ(cfg.sampling.top_p, 0.9);
    EXPECT_EQ(cfg.expert.tau, 0.8);
    EXPECT_EQ(cfg.reward.weights, reward::RewardWeights{});
    EXPECT_EQ(cfg.output_dir, (f.dir.path() / "out").string());
}

TEST(Config, RoundTrip) {
    Fixture f;
    auto cfg = f.load(R"({
        "corpus": "corpus.jsonl", "seed": 9, "dpo_beta": 0.3,
        "retrieval": {"n": 30},
        "reranker": {"window": 12, "stride": 4, "k_max": 10},
        "sampling": {"n_samples": 4, "top_p": 0.8},
        "reward": {"weights": {"alpha": 0.1, "beta": 0.1, "gamma": 0.1, "lambda": 0.1, "delta": 0.5}, "few_shot": "ex"},
        "endpoints": {"reranker": {"backend": "mock", "mock_script": "mock.jsonl", "default_reply": "None"},
                      "judge": {"backend": "http", "base_url": "http://localhost:1/v1", "model": "j", "api_key_env": "K"}},
        "eval": {"recall_ks": [1, 3], "containment": "substring"}
    })");
    const auto j1 = config_to_json(cfg);
    write_file(f.dir / "resolved.json", j1.dump(2));
    auto again = load_config(f.dir / "resolved.json");
    EXPECT_EQ(again, cfg);
    EXPECT_EQ(config_to_json(again).dump(), j1.dump());
}

TEST(Config, MissingCorpusNamesPath) {
    Fixture f;
    try {
        f.load(R"({"corpus":"nope/missing.jsonl"})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("missing.jsonl"), std::string::npos) << e.what();
    }
}

TEST(Config, RejectsInvalid) {
    Fixture f;
    EXPECT_THROW(f.load(R"({"corpus":"corpus.jsonl","retrieval":{"n":10}})"), ConfigError);  // k_max 15 > n
    EXPECT_THROW(f.load(R"({"corpus":"corpus.jsonl","reranker":{"window":5,"stride":6}})"), ConfigError);
    EXPECT_THROW(f.load(R"({"corpus":"corpus.jsonl","sampling":{"n_samples":1}})"), ConfigError);
    EXPECT_THROW(f.load(R"({"corpus":"corpus.jsonl","reward":{"weights":{"alpha":0.9}}})"), ConfigError);
    EXPECT_THROW(f.load(R"({"corpus":"corpus.jsonl","retreival":{}})"), ConfigError);
    EXPECT_THROW(f.load(R"({"corpus":"corpus.jsonl","seed":"x"})"), ConfigError);
    EXPECT_THROW(f.load(R"({"corpus":"corpus.jsonl","endpoints":{"judge":{"backend":"mock","mock_script":"gone.jsonl"}}})"),
                 ConfigError);
    EXPECT_THROW(f.load("not json"), ConfigError);
}

TEST(Config, ApiKeyMayNotLiveInTheFile) {
    Fixture f;
    try {
        f.load(R"({"corpus":"corpus.jsonl","endpoints":{"judge":{"backend":"http","base_url":"http://x","api_key":"sk-1"}}})");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("api_key_env"), std::string::npos);
    }
}

TEST(Config, DerivedSettings) {
    Fixture f;
    auto cfg = f.load(R"({"corpus":"corpus.jsonl","seed":5,"strict_parse":true,"expert":{"tau":0.6}})");
    EXPECT_EQ(cfg.rerank_config().parse_mode, prompts::ParseMode::strict);
    EXPECT_EQ(cfg.sampling_config().base_seed, 5);
    EXPECT_EQ(cfg.expert_config().tau, 0.6);
    EXPECT_EQ(cfg.eval_settings().retrieval_n, 20u);
}
