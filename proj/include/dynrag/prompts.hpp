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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynrag/corpus.hpp"

namespace dynrag::prompts {

enum class TemplateId { reranker, generator, reward, gpt_baseline, llama_baseline, eval_instruction };

std::string_view template_name(TemplateId id);

/// A chat prompt: instructions go in the system turn, per-query material in
/// the user turn.
struct RenderedPrompt {
    std::string system_text;
    std::string user_text;
    TemplateId template_id = TemplateId::reranker;

    /// System and user text joined by a blank line. This is the string that
    /// is hashed by the mock backend and exported in training records.
    std::string full_text() const;

    bool operator==(const RenderedPrompt&) const = default;
};

/// Candidate list for the reranker. `max_content_tokens` clips each
/// document body to that many whitespace tokens (0 = unlimited).
RenderedPrompt render_reranker_prompt(const Query& query, std::span<const RetrievedDoc> docs,
                                      std::size_t max_content_tokens = 0);

/// Answer prompt over the reranker's selection, in selection order. An empty
/// selection renders the Retrieved Content section as "None". The task picks
/// the answer instruction that precedes the query.
RenderedPrompt render_generator_prompt(const Query& query, std::span<const Document> selected,
                                       std::size_t max_content_tokens = 0);

/// Rubric prompt for the judge. `few_shot` is inserted verbatim before the
/// item under evaluation when non-empty.
RenderedPrompt render_reward_prompt(std::string_view instruction, std::string_view gold,
                                    std::string_view response, std::string_view few_shot = {});

RenderedPrompt render_gpt_baseline_prompt(std::string_view instruction);
RenderedPrompt render_llama_baseline_prompt(std::string_view instruction, std::span<const Document> docs);

std::string_view render_eval_instruction(Task task);

/// Generation budget used for answers of this task.
int answer_max_tokens(Task task, int short_tokens = 50, int long_tokens = 256);

// --- structured output parsing ---------------------------------------------

enum class ParseMode { lenient, strict };

struct IdentifierList {
    std::vector<std::size_t> ids;  // 1-based, distinct
    bool is_none = false;

    bool operator==(const IdentifierList&) const = default;
};

struct ParsedIdentifiers {
    IdentifierList list;
    /// Number of dropped duplicates / out-of-range ids, plus one when the
    /// output held neither bracketed ids nor "None". Always 0 in strict mode.
    std::size_t warnings = 0;
};

/// Extracts bracketed integers ("[3], [1]") in order of appearance, or
/// recognizes the literal "None". Lenient mode drops duplicates and
/// out-of-range ids with a warning; strict mode throws ParseError.
ParsedIdentifiers parse_identifier_list(std::string_view raw, std::size_t n_docs,
                                        ParseMode mode = ParseMode::lenient);

/// "[i1], [i2], ..." or "None" for an empty list.
std::string format_identifier_list(std::span<const std::size_t> ids);
std::string format_identifier_list(const IdentifierList& list);

/// Value of the last "Score: <number>" in the text, clamped to [0, 100] and
/// divided by 100. nullopt when no such pattern exists.
std::optional<double> parse_llm_score(std::string_view raw);

}  // namespace dynrag::prompts
