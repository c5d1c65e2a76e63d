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

#include "dynrag/preference.hpp"
#include "golden.hpp"

using namespace dynrag;
using namespace dynrag::testing;

namespace {

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
    std::vector<nlohmann::json> out;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(nlohmann::json::parse(line));
    return out;
}

}  // namespace

TEST(Cli, GoldenPipelineMatchesExpectedFiles) {
    TempDir dir;
    for (const auto& r : run_golden_pipeline(dir.path())) ASSERT_EQ(r.code, 0) << r.err;
    for (const auto& f : kGoldenFiles)
        EXPECT_EQ(read_file(dir / f), read_file(kGoldenDir / "expected" / f)) << f;
}

TEST(Cli, GoldenPipelineIsByteIdenticalAcrossRuns) {
    TempDir a, b;
    run_golden_pipeline(a.path());
    run_golden_pipeline(b.path());
    for (const auto& f : kGoldenFiles) EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
}

// Values below were worked out by hand from the mock scripts; they do not
// depend on the expected/ files.
TEST(Cli, GoldenRewardsAreHandDerived) {
    TempDir dir;
    run_golden_pipeline(dir.path());
    auto rows = read_jsonl(dir / "rewards.jsonl");
    ASSERT_EQ(rows.size(), 16u);
    const double want[16] = {
        // q1: "Paris" judged 90, "Berlin" judged 10, "Lyon" default 20, "Paris"
        0.2 * (1 + 1 + 1 + 0.5 + 0.9), 0.2 * (0.5 + 0.1), 0.2 * (0.5 + 0.2), 0.2 * (1 + 1 + 1 + 0.5 + 0.9),
        // q2: "Berlin" judged 100; six-token answer with F1 = ROUGE-L = 2/7, lp = 1/7, judged 95;
        // "I do not know" (lp 1/5, default judge 20)
        0.2 * (1 + 1 + 1 + 0.5 + 1), 0.2 * (2.0 / 7 + 2.0 / 7 + 1.0 / 7 + 0.95), 0.2 * (0.2 + 0.2),
        0.2 * (1 + 1 + 1 + 0.5 + 1),
        // q3: "Mount Everest" judged 80; "K2" twice with a failed judge; "I do not know"
        0.2 * (1 + 1 + 1 + 1.0 / 3 + 0.8), 0.2 * 0.5, 0.2 * 0.5, 0.2 * (0.2 + 0.2),
        // q4: every sample ends in "I do not know"
        0.08, 0.08, 0.08, 0.08};
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(rows[i]["total"].get<double>(), want[i], 1e-11) << i;
    EXPECT_TRUE(rows[9]["llm_eval_failed"].get<bool>());
}

TEST(Cli, GoldenPairsAndReport) {
    TempDir dir;
    auto results = run_golden_pipeline(dir.path());
    EXPECT_NE(results[5].out.find("pairs formed: 3, queries skipped: 1"), std::string::npos) << results[5].out;
    EXPECT_NE(results[5].err.find("\"q4\""), std::string::npos);

    std::istringstream in(read_file(dir / "dpo_pairs.jsonl"));
    auto pairs = preference::read_dpo_pairs(in);
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_EQ(pairs[0].chosen, "[2], [3]");
    EXPECT_EQ(pairs[0].rejected, "[1]");
    EXPECT_EQ(pairs[1].chosen, "[1]");
    EXPECT_EQ(pairs[1].rejected, "[3]");
    EXPECT_EQ(pairs[2].chosen, "[2]");
    EXPECT_EQ(pairs[2].rejected, "None");

    auto manifest = nlohmann::json::parse(read_file(dir / "dpo_manifest.json"));
    EXPECT_EQ(manifest["beta"], 0.1);
    EXPECT_EQ(manifest["seed"], 7);

    auto report = nlohmann::json::parse(read_file(dir / "eval_report.json"));
    EXPECT_EQ(report["n"], 4);
    EXPECT_EQ(report["metrics"]["em"]["mean"], 0.75);
    EXPECT_EQ(report["metrics"]["k"]["mean"], 1.25);
    EXPECT_EQ(report["metrics"]["retrieval_recall@1"]["mean"], 0.25);
    EXPECT_EQ(report["metrics"]["recall@1"]["mean"], 1.0);
    EXPECT_EQ(report["k_histogram"], nlohmann::json::parse("[0,3,1,0]"));
}

TEST(Cli, RetrieveGroupsPerQuery) {
    TempDir dir;
    auto r = run_cli(with_config(dir.path(), {"retrieve", "--dataset", (kGoldenDir / "dataset.jsonl").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    std::set<std::string> groups;
    for (const auto& row : read_jsonl(dir / "retrieval.jsonl")) {
        groups.insert(row["query_id"].get<std::string>());
        EXPECT_TRUE(row.contains("doc_id") && row.contains("score") && row.contains("rank"));
    }
    EXPECT_EQ(groups.size(), 4u);
}

TEST(Cli, BcExportCountsAndNone) {
    TempDir dir;
    auto r = run_cli(with_config(dir.path(), {"bc-export", "--dataset", (kGoldenDir / "dataset.jsonl").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto body = read_file(dir / "bc.jsonl");
    EXPECT_NE(r.out.find("bc records: " + std::to_string(count_lines(body))), std::string::npos) << r.out;
    auto rows = read_jsonl(dir / "bc.jsonl");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0]["completion"], "[2], [3]");
    EXPECT_EQ(rows[3]["completion"], "None");
    EXPECT_FALSE(fs::exists(dir / "sft_generator.jsonl"));
}

TEST(Cli, BcExportMissingExpertScoreFails) {
    TempDir dir;
    write_file(dir / "scores.jsonl", "{\"query_id\":\"q1\",\"doc_id\":\"d1\",\"score\":0.9}\n");
    auto r = run_cli(with_config(dir.path(), {"bc-export", "--dataset", (kGoldenDir / "dataset.jsonl").string(),
                                              "--expert-scores", (dir / "scores.jsonl").string()}));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("missing expert score"), std::string::npos) << r.err;
}

TEST(Cli, DumpPromptsWritesRenderedText) {
    TempDir dir;
    auto r = run_cli(with_config(dir.path(), {"--dump-prompts", "eval", "--dataset", (kGoldenDir / "dataset.jsonl").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    auto rows = read_jsonl(dir / "prompts.jsonl");
    ASSERT_EQ(rows.size(), 8u);  // reranker + generator per query
    EXPECT_EQ(rows[0]["template"], "reranker");
    EXPECT_EQ(rows[1]["template"], "generator");
    const std::string user = rows[0]["user"];
    EXPECT_EQ(user.rfind("Query: What is the capital of France?\n\nRetrieved Content:\n1. Title: Berlin Content: ", 0), 0u);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
    auto r = run_cli({"frobnicate"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("frobnicate"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, MissingCorpusNamesThePath) {
    TempDir dir;
    write_file(dir / "cfg.json", R"({"corpus":"no/such/corpus.jsonl"})");
    auto r = run_cli({"--config", (dir / "cfg.json").string(), "index"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("no/such/corpus.jsonl"), std::string::npos) << r.err;
}

TEST(Cli, MissingConfigIsUsageError) {
    EXPECT_EQ(run_cli({"index"}).code, 2);
    EXPECT_EQ(run_cli({"--config", "/nonexistent/cfg.json", "index"}).code, 2);
}

TEST(Cli, SeedFlagOverridesConfig) {
    TempDir dir;
    auto r = run_cli(with_config(dir.path(), {"--seed", "100", "sample", "--dataset", (kGoldenDir / "dataset.jsonl").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    auto rows = read_jsonl(dir / "trajectories.jsonl");
    EXPECT_EQ(rows[0]["seed"], 100);
    EXPECT_EQ(rows[3]["seed"], 103);
    EXPECT_EQ(rows[0]["raw_output"], "None");  // no script rule for seed 100
}

TEST(Cli, EvalExitStatusReflectsFailureThreshold) {
    TempDir dir;
    write_file(dir / "q.jsonl",
               "{\"id\":\"q1\",\"question\":\"What is the capital of France?\",\"answers\":[\"Paris\"]}\n"
               "oops\n");
    auto r = run_cli(with_config(dir.path(), {"eval", "--dataset", (dir / "q.jsonl").string()}));
    EXPECT_EQ(r.code, 1) << r.err;  // 1 of 2 failed, threshold 0.1
    EXPECT_TRUE(fs::exists(dir / "eval_report.json"));
}

TEST(Cli, StagesChainThroughFilesOnly) {
    TempDir dir;
    const std::string dataset = (kGoldenDir / "dataset.jsonl").string();
    ASSERT_EQ(run_cli(with_config(dir.path(), {"sample", "--dataset", dataset})).code, 0);
    // move the trajectories elsewhere; score must read exactly what it is given
    fs::create_directories(dir / "other");
    fs::rename(dir / "trajectories.jsonl", dir / "other" / "t.jsonl");
    EXPECT_EQ(run_cli(with_config(dir.path(), {"score", "--dataset", dataset})).code, 2);
    auto r = run_cli(with_config(dir.path(), {"score", "--dataset", dataset, "--trajectories", (dir / "other" / "t.jsonl").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(dir / "rewards.jsonl"), read_file(kGoldenDir / "expected" / "rewards.jsonl"));
}

TEST(Cli, ExportDpoSkipsQueriesWithTooFewTrajectories) {
    TempDir dir;
    auto rows = read_jsonl(kGoldenDir / "expected" / "scored_trajectories.jsonl");
    std::string body;
    for (const auto& row : rows)
        if (row["query_id"] != "q2" || row["trajectory_index"] == 0) body += row.dump() + "\n";
    write_file(dir / "scored.jsonl", body);
    auto r = run_cli(with_config(dir.path(), {"export-dpo", "--scored", (dir / "scored.jsonl").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("pairs formed: 2, queries skipped: 2"), std::string::npos) << r.out;
    EXPECT_NE(r.err.find("fewer than 2"), std::string::npos);
}

TEST(Cli, TrajectoryRecordRoundTrip) {
    rerank::Trajectory t;
    t.decision = {"q", {2, 1}, {"b", "a"}, rerank::DecisionSource::policy};
    t.prompt = "p";
    t.raw_output = "[2], [1]";
    t.sampling = {1.0, 0.9, 12};
    t.parse_warnings = 1;
    std::size_t idx = 0;
    auto back = cli::trajectory_from_json(cli::trajectory_json(t, 5), 1, &idx);
    EXPECT_EQ(back.decision, t.decision);
    EXPECT_EQ(back.sampling.seed, 12);
    EXPECT_EQ(back.parse_warnings, 1u);
    EXPECT_EQ(idx, 5u);
}
