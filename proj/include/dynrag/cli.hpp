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

#include <iosfwd>
#include <string>
#include <vector>

#include "dynrag/jsonl.hpp"
#include "dynrag/reranker.hpp"

namespace dynrag::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2 };

/// Runs one CLI invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Stage file record for one sampled trajectory.
jsonl::Json trajectory_json(const rerank::Trajectory& t, std::size_t index);

/// Inverse of trajectory_json; also returns the trajectory index.
rerank::Trajectory trajectory_from_json(const jsonl::Json& j, std::size_t line, std::size_t* index = nullptr);

}  // namespace dynrag::cli
