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

#include "dynrag/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "dynrag/error.hpp"
#include "dynrag/text.hpp"

namespace dynrag::prompts {

namespace {

// Template texts, version 1. Changing any byte here changes every prompt
// hash used by mock scripts and every exported training record.

constexpr std::string_view kRerankerInstructions =
    "You are an expert at dynamically generating document identifiers to answer a given query.\n"
    "\n"
    "I will provide you with a set of documents, each uniquely identified by a number within square "
    "brackets, e.g., [1], [2], etc.\n"
    "\n"
    "Your task is to identify and generate only the identifiers of the documents that contain "
    "sufficient information to answer the query.\n"
    "\n"
    "Stop generating identifiers as soon as the selected documents collectively provide enough "
    "information to answer the query.\n"
    "\n"
    "If no documents are required to answer the query, output \"None\".\n"
    "\n"
    "Output the identifiers as a comma-separated list, e.g., [1], [2] or \"None\" if no documents "
    "are needed.\n"
    "\n"
    "Focus solely on providing the identifiers. Do not include any explanations, descriptions, or "
    "additional text.";

constexpr std::string_view kGeneratorRules =
    "You are an intelligent assistant that uses retrieved knowledge to answer user queries accurately "
    "and concisely. Follow these rules:\n"
    "1. Task:\n"
    "- Use the provided [Retrieved Content] to generate responses.\n"
    "- If the Retrieved Content is None, you should generate an answer based on your own knowledge.\n"
    "- If the information is insufficient or you don't know the answer, state, \xE2\x80\x9CI cannot "
    "fully answer based on the available information. Please provide more details.\xE2\x80\x9D\n"
    "2. Requirements:\n"
    "- Accuracy: Base your answers on the retrieved content.\n"
    "- Conciseness: Keep answers brief and relevant.\n"
    "- Context Awareness: Ensure your responses align with the user\xE2\x80\x99s query.\n"
    "3. Input Format:\n"
    "- Query: [User Query]\n"
    "- Retrieved: [Retrieved Content]\n"
    "4. Output Format:\n"
    "- A structured, clear response tailored to the query.\n"
    "Always prioritize clarity and reliability.";

constexpr std::string_view kRewardRubric =
    "Use the following criteria to evaluate the quality of the model's response in a "
    "knowledge-intensive task, considering the provided ground-truth answer. Assign a score between "
    "0-100 based on the overall quality, relevance, and correctness of the response:\n"
    "\n"
    "1. Relevance to the Prompt (20 points):\n"
    "\n"
    "Award up to 20 points if the response aligns well with the user's query, even if minor errors "
    "are present.\n"
    "Deduct points if the response lacks focus or deviates significantly from the query.\n"
    "\n"
    "2. Accuracy of Factual Information (20 points):\n"
    "\n"
    "Grant up to 20 points for correct factual details aligning with the ground-truth answer.\n"
    "Penalize for inaccuracies, missing essential elements, or presenting incorrect knowledge.\n"
    "\n"
    "3. Handling of Temporal and Logical Reasoning (20 points):\n"
    "\n"
    "Award up to 20 points for demonstrating correct temporal and logical reasoning.\n"
    "Deduct points if temporal reasoning is flawed or logical consistency is missing.\n"
    "\n"
    "4. Clarity and Coherence of Response (20 points):\n"
    "\n"
    "Assign up to 15 points for clear, coherent, and well-structured responses.\n"
    "Reduce points for ambiguity, confusion, or poor organization.\n"
    "\n"
    "5. Potential Misleading Nature or Misconceptions (20 points):\n"
    "\n"
    "Award up to 10 points if the response avoids being misleading.\n"
    "Penalize responses that could confuse or mislead the user, even if partially relevant.\n"
    "After evaluating the response based on these criteria, provide a total score in the format:\n"
    "\xE2\x80\x9CScore: points\xE2\x80\x9D.";

constexpr std::string_view kGptBaseline =
    "Below is a question, directly generate the answer. Your answer should be as concise as possible, "
    "which can be a word or a phrase.";

constexpr std::string_view kLlamaBaseline =
    "Below is an instruction that describes a task.\n"
    "\n"
    "Write a response that appropriately completes the request.";

void append_entry(std::string& out, std::size_t i, const std::string& title, const std::string& content,
                  std::size_t max_content_tokens) {
    out += std::to_string(i);
    out += ". Title: ";
    out += title;
    out += " Content: ";
    out += text::clip_whitespace_tokens(content, max_content_tokens);
}

}  // namespace

std::string_view template_name(TemplateId id) {
    switch (id) {
        case TemplateId::reranker: return "reranker";
        case TemplateId::generator: return "generator";
        case TemplateId::reward: return "reward";
        case TemplateId::gpt_baseline: return "gpt_baseline";
        case TemplateId::llama_baseline: return "llama_baseline";
        case TemplateId::eval_instruction: return "eval_instruction";
    }
    return "reranker";
}

std::string RenderedPrompt::full_text() const {
    if (system_text.empty()) return user_text;
    return system_text + "\n\n" + user_text;
}

RenderedPrompt render_reranker_prompt(const Query& query, std::span<const RetrievedDoc> docs,
                                      std::size_t max_content_tokens) {
    RenderedPrompt p;
    p.template_id = TemplateId::reranker;
    p.system_text = std::string(kRerankerInstructions);
    p.user_text = "Query: " + query.text + "\n\nRetrieved Content:";
    for (std::size_t i = 0; i < docs.size(); ++i) {
        p.user_text += '\n';
        append_entry(p.user_text, i + 1, docs[i].doc.title, docs[i].doc.content, max_content_tokens);
    }
    return p;
}

RenderedPrompt render_generator_prompt(const Query& query, std::span<const Document> selected,
                                       std::size_t max_content_tokens) {
    RenderedPrompt p;
    p.template_id = TemplateId::generator;
    p.system_text = std::string(kGeneratorRules);
    p.user_text = std::string(render_eval_instruction(query.task));
    p.user_text += "\n\nQuery: " + query.text + "\n\nRetrieved Content:";
    if (selected.empty()) {
        p.user_text += "\nNone";
    } else {
        for (std::size_t i = 0; i < selected.size(); ++i) {
            p.user_text += '\n';
            append_entry(p.user_text, i + 1, selected[i].title, selected[i].content, max_content_tokens);
        }
    }
    return p;
}

RenderedPrompt render_reward_prompt(std::string_view instruction, std::string_view gold,
                                    std::string_view response, std::string_view few_shot) {
    RenderedPrompt p;
    p.template_id = TemplateId::reward;
    p.system_text = std::string(kRewardRubric);
    if (!few_shot.empty()) {
        p.user_text += few_shot;
        p.user_text += "\n\n";
    }
    p.user_text += "User: ";
    p.user_text += instruction;
    p.user_text += "\n\nGround-Truth Answer: ";
    p.user_text += gold;
    p.user_text += "\n\nModel Response: ";
    p.user_text += response;
    return p;
}

RenderedPrompt render_gpt_baseline_prompt(std::string_view instruction) {
    RenderedPrompt p;
    p.template_id = TemplateId::gpt_baseline;
    p.system_text = std::string(kGptBaseline);
    p.user_text = "Question: " + std::string(instruction) + "\n\nResponse:";
    return p;
}

RenderedPrompt render_llama_baseline_prompt(std::string_view instruction, std::span<const Document> docs) {
    RenderedPrompt p;
    p.template_id = TemplateId::llama_baseline;
    p.system_text = std::string(kLlamaBaseline);
    p.user_text = "Paragraph:";
    for (std::size_t i = 0; i < docs.size(); ++i) {
        p.user_text += '\n';
        append_entry(p.user_text, i + 1, docs[i].title, docs[i].content, 0);
    }
    p.user_text += "\n\nQuestion: " + std::string(instruction) + "\n\nResponse:";
    return p;
}

std::string_view render_eval_instruction(Task task) {
    switch (task) {
        case Task::arc: return "Please answer the following questions and directly output the answer options.";
        case Task::fever:
            return "Please answer the question with \xE2\x80\x9CSUPPORTS\xE2\x80\x9D, \xE2\x80\x9CREFUTES\xE2\x80\x9D "
                   "or \xE2\x80\x9CNEI\xE2\x80\x9D based on what you know.";
        case Task::eli5: return "Please answer the question with a paragraph.";
        case Task::open_domain_qa: return "Please answer the question with a short phrase.";
    }
    return "Please answer the question with a short phrase.";
}

int answer_max_tokens(Task task, int short_tokens, int long_tokens) {
    return task == Task::eli5 ? long_tokens : short_tokens;
}

// --- parsing -----------------------------------------------------------------

namespace {

bool is_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Strips whitespace, ASCII punctuation, and curly quotes from both ends.
std::string_view strip_decoration(std::string_view s) {
    static constexpr std::string_view kCurly[] = {"\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        unsigned char f = static_cast<unsigned char>(s.front());
        if (f < 0x80 && (std::isspace(f) || std::ispunct(f))) {
            s.remove_prefix(1);
            changed = true;
            continue;
        }
        unsigned char b = static_cast<unsigned char>(s.back());
        if (b < 0x80 && (std::isspace(b) || std::ispunct(b))) {
            s.remove_suffix(1);
            changed = true;
            continue;
        }
        for (auto q : kCurly) {
            if (s.starts_with(q)) {
                s.remove_prefix(q.size());
                changed = true;
            } else if (s.ends_with(q)) {
                s.remove_suffix(q.size());
                changed = true;
            }
        }
    }
    return s;
}

// Bracketed integers in order of appearance. Values too large for 9 digits
// come back as 0, which is always out of range.
std::vector<std::size_t> bracketed_integers(std::string_view raw) {
    std::vector<std::size_t> out;
    std::size_t i = 0;
    while ((i = raw.find('[', i)) != std::string_view::npos) {
        std::size_t j = i + 1;
        while (j < raw.size() && is_ws(raw[j])) ++j;
        std::size_t digits_begin = j;
        while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
        std::size_t digits_end = j;
        while (j < raw.size() && is_ws(raw[j])) ++j;
        if (digits_end > digits_begin && j < raw.size() && raw[j] == ']') {
            auto digits = raw.substr(digits_begin, digits_end - digits_begin);
            std::size_t value = 0;
            if (digits.size() <= 9)
                for (char c : digits) value = value * 10 + static_cast<std::size_t>(c - '0');
            out.push_back(value);
            i = j + 1;
        } else {
            i = i + 1;
        }
    }
    return out;
}

}  // namespace

ParsedIdentifiers parse_identifier_list(std::string_view raw, std::size_t n_docs, ParseMode mode) {
    if (n_docs == 0) throw std::invalid_argument("parse_identifier_list: n_docs must be >= 1");
    const bool strict = mode == ParseMode::strict;
    ParsedIdentifiers out;
    auto found = bracketed_integers(raw);
    if (found.empty()) {
        if (strip_decoration(raw) == "None") {
            out.list.is_none = true;
            return out;
        }
        if (strict) throw ParseError("no bracketed identifiers and not \"None\": \"" + std::string(raw) + "\"");
        out.warnings = 1;
        return out;
    }
    std::unordered_set<std::size_t> seen;
    for (std::size_t id : found) {
        if (id < 1 || id > n_docs) {
            if (strict)
                throw ParseError("identifier out of range [1, " + std::to_string(n_docs) + "]: " +
                                 (id == 0 ? std::string("0 or overflow") : std::to_string(id)));
            ++out.warnings;
            continue;
        }
        if (!seen.insert(id).second) {
            if (strict) throw ParseError("duplicate identifier [" + std::to_string(id) + "]");
            ++out.warnings;
            continue;
        }
        out.list.ids.push_back(id);
    }
    return out;
}

std::string format_identifier_list(std::span<const std::size_t> ids) {
    if (ids.empty()) return "None";
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += '[' + std::to_string(ids[i]) + ']';
    }
    return out;
}

std::string format_identifier_list(const IdentifierList& list) { return format_identifier_list(list.ids); }

std::optional<double> parse_llm_score(std::string_view raw) {
    static constexpr std::string_view kTag = "Score:";
    std::optional<double> last;
    std::size_t pos = 0;
    while ((pos = raw.find(kTag, pos)) != std::string_view::npos) {
        std::size_t j = pos + kTag.size();
        while (j < raw.size() && (is_ws(raw[j]) || raw[j] == '*')) ++j;
        std::size_t begin = j;
        if (j < raw.size() && (raw[j] == '-' || raw[j] == '+')) ++j;
        std::size_t int_begin = j;
        while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
        if (j > int_begin) {
            if (j + 1 < raw.size() && raw[j] == '.' && std::isdigit(static_cast<unsigned char>(raw[j + 1]))) {
                ++j;
                while (j < raw.size() && std::isdigit(static_cast<unsigned char>(raw[j]))) ++j;
            }
            double v;
            try {
                v = std::stod(std::string(raw.substr(begin, j - begin)));
            } catch (const std::out_of_range&) {
                v = raw[begin] == '-' ? 0.0 : 100.0;
            }
            last = std::clamp(v, 0.0, 100.0) / 100.0;
        }
        pos += kTag.size();
    }
    return last;
}

}  // namespace dynrag::prompts
