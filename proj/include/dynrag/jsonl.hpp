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
#include <functional>
#include <iosfwd>
#include <string>

#include "json.hpp"

namespace dynrag::jsonl {

using Json = nlohmann::ordered_json;

/// Calls `fn(record, line_number)` for each non-blank line of a
/// newline-delimited JSON file. Lines that are not a JSON object raise
/// FormatError carrying the 1-based line number.
void for_each_record(const std::filesystem::path& path,
                     const std::function<void(const Json&, std::size_t)>& fn);

/// Same as for_each_record, but over an already-open stream.
void for_each_record(std::istream& in, const std::function<void(const Json&, std::size_t)>& fn);

/// Writes `contents` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Round to 12 significant digits so that serialized reals are stable
/// across platforms and libm versions.
double round12(double x);

/// Fetch a required string member or raise FormatError.
std::string require_string(const Json& j, const char* key, std::size_t line);

}  // namespace dynrag::jsonl
