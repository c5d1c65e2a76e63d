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

#include <string>
#include <string_view>
#include <vector>

namespace dynrag::text {

/// Lowercases ASCII letters and splits on runs of non-alphanumeric bytes.
/// Bytes >= 0x80 count as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view s);

/// Splits on ASCII whitespace without any other normalization.
std::vector<std::string> whitespace_tokens(std::string_view s);

/// Answer normalization used for exact match and containment: lowercase,
/// strip ASCII punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

/// First `max_tokens` whitespace tokens re-joined with single spaces; the
/// input is returned unchanged when it already fits. 0 disables clipping.
std::string clip_whitespace_tokens(std::string_view s, std::size_t max_tokens);

/// True when `needle` occurs as a contiguous run inside `haystack`.
/// An empty needle never matches.
bool contains_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle);

std::string trim(std::string_view s);

}  // namespace dynrag::text
