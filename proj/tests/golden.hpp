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

// Drives the scripted toy pipeline under tests/data/golden through the CLI.

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dynrag/cli.hpp"
#include "support.hpp"

namespace dynrag::testing {

inline const fs::path kGoldenDir = fs::path(DYNRAG_TEST_DATA_DIR) / "golden";

inline const std::vector<std::string> kGoldenFiles{
    "index_stats.json",    "retrieval.jsonl", "bc.jsonl",        "sft_generator.jsonl",
    "trajectories.jsonl",  "scored_trajectories.jsonl",          "rewards.jsonl",
    "dpo_pairs.jsonl",     "dpo_manifest.json",                  "eval_records.jsonl",
    "eval_report.json"};

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliResult run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    CliResult r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

inline std::vector<std::string> with_config(const fs::path& out_dir, std::vector<std::string> rest) {
    std::vector<std::string> args{"--config", (kGoldenDir / "config.json").string(), "--out", out_dir.string()};
    args.insert(args.end(), rest.begin(), rest.end());
    return args;
}

// Every stage in pipeline order; returns the per-stage results.
inline std::vector<CliResult> run_golden_pipeline(const fs::path& out_dir) {
    const std::string dataset = (kGoldenDir / "dataset.jsonl").string();
    std::vector<std::vector<std::string>> stages{
        {"index"},
        {"retrieve", "--dataset", dataset},
        {"bc-export", "--dataset", dataset, "--sft-for-generator"},
        {"sample", "--dataset", dataset},
        {"score", "--dataset", dataset},
        {"export-dpo"},
        {"eval", "--dataset", dataset},
    };
    std::vector<CliResult> results;
    for (auto& s : stages) results.push_back(run_cli(with_config(out_dir, s)));
    return results;
}

}  // namespace dynrag::testing
