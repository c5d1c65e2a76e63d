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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynrag/error.hpp"
#include "dynrag/prompts.hpp"

namespace dynrag::llm {

enum class Role { reranker, generator, judge };

std::string_view role_name(Role r);

struct CompletionRequest {
    Role role = Role::reranker;
    prompts::RenderedPrompt prompt;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 50;
    std::optional<std::int64_t> seed;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct CompletionResult {
    std::string text;
    std::optional<Usage> usage;
    std::string backend_id;
};

/// Connection-level failure (or retryable status) that survived all retries.
class TransportError : public Error {
public:
    using Error::Error;
};

/// The server answered, but not with a readable chat-completion body.
class MalformedResponseError : public Error {
public:
    using Error::Error;
};

/// The server refused the request (4xx other than 408/429). Never retried.
class RequestRejectedError : public Error {
public:
    RequestRejectedError(int status, std::string body)
        : Error("request rejected with HTTP " + std::to_string(status) + ": " + body),
          status_(status), body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

/// Connection settings for one role. The API key itself is only ever read
/// from the environment variable named here.
struct EndpointConfig {
    std::string backend = "mock";  // "mock" or "http"
    std::string base_url;
    std::string model;
    std::string api_key_env;
    std::string mock_script;       // path, mock backend only
    std::string default_reply;     // mock reply when no rule matches
    double timeout_s = 60.0;
    int max_retries = 3;
    double backoff_s = 0.5;        // doubled after every retry

    bool operator==(const EndpointConfig&) const = default;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual CompletionResult complete(const CompletionRequest& req) = 0;
    virtual std::string id() const = 0;
};

// --- HTTP --------------------------------------------------------------------

struct HttpResponse {
    int status = 0;
    std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POSTs `body` to base_url + path. Throws TransportError when no response
/// could be obtained at all.
using HttpPost = std::function<HttpResponse(const std::string& base_url, const std::string& path,
                                            const std::string& body, const Headers& headers)>;

HttpPost make_http_post(double timeout_s);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Builds the chat-completion request body.
std::string build_chat_body(const std::string& model, const CompletionRequest& req);

/// Reads choices[0].message.content (and usage when present).
CompletionResult parse_chat_response(const std::string& body, const std::string& backend_id);

/// Runs `call` with retries on TransportError and retryable statuses
/// (408, 429, 5xx). Returns the first non-retryable response.
HttpResponse post_with_retries(const std::function<HttpResponse()>& call, int max_retries, double backoff_s,
                               const Sleeper& sleep, int* attempts = nullptr);

class HttpChatBackend final : public ChatBackend {
public:
    explicit HttpChatBackend(EndpointConfig cfg, HttpPost post = {}, Sleeper sleep = {});

    CompletionResult complete(const CompletionRequest& req) override;
    std::string id() const override { return "http:" + cfg_.model; }

    /// Attempts made by the most recent complete().
    int last_attempts() const noexcept { return last_attempts_.load(); }

private:
    EndpointConfig cfg_;
    HttpPost post_;
    Sleeper sleep_;
    std::string api_key_;
    std::atomic<int> last_attempts_{0};
};

/// Client for {base_url}/embeddings, used by the embedding similarity backend.
class EmbeddingClient {
public:
    explicit EmbeddingClient(EndpointConfig cfg, HttpPost post = {}, Sleeper sleep = {});
    virtual ~EmbeddingClient() = default;

    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& inputs);

protected:
    EmbeddingClient() = default;

private:
    EndpointConfig cfg_;
    HttpPost post_;
    Sleeper sleep_;
    std::string api_key_;
};

// --- offline backends ----------------------------------------------------------

/// Stable 64-bit FNV-1a of the prompt text, as 16 lowercase hex digits.
std::string prompt_hash(std::string_view text);

struct MockRule {
    enum class Match { hash, ordinal, contains };
    Match match = Match::hash;
    std::string key;            // hash hex digits or substring
    std::size_t ordinal = 0;    // 0-based call index
    std::optional<std::int64_t> seed;  // restricts the rule to one request seed
    std::string reply;
};

/// Scripted backend. Resolution order: ordinal rule for this call index,
/// then hash rules, then substring rules (file order), then the default.
/// Rules with a seed only fire for requests carrying that seed and win over
/// seedless rules of the same kind. Apart from ordinal rules the reply is a
/// pure function of (prompt text, seed).
class MockBackend final : public ChatBackend {
public:
    explicit MockBackend(std::vector<MockRule> rules = {}, std::string default_reply = {},
                         std::string id = "mock");

    /// Loads {"match": "hash"|"ordinal"|"contains", "key": ..., "reply": ..., "seed"?: int} lines.
    static std::unique_ptr<MockBackend> from_script(const std::filesystem::path& path,
                                                    std::string default_reply = {});

    CompletionResult complete(const CompletionRequest& req) override;
    std::string id() const override { return id_; }
    std::size_t calls() const noexcept { return calls_.load(); }

private:
    std::vector<MockRule> rules_;
    std::string default_reply_;
    std::string id_;
    std::atomic<std::size_t> calls_{0};
};

/// Backend driven by a callable; used for programmatic scripted policies.
class FunctionBackend final : public ChatBackend {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit FunctionBackend(Fn fn, std::string id = "function") : fn_(std::move(fn)), id_(std::move(id)) {}

    CompletionResult complete(const CompletionRequest& req) override { return {fn_(req), std::nullopt, id_}; }
    std::string id() const override { return id_; }

private:
    Fn fn_;
    std::string id_;
};

/// Decorator that counts calls per role and records peak concurrency.
class CountingBackend final : public ChatBackend {
public:
    explicit CountingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}

    CompletionResult complete(const CompletionRequest& req) override;
    std::string id() const override { return inner_->id(); }

    std::size_t calls() const noexcept { return total_.load(); }
    std::size_t calls(Role r) const noexcept { return by_role_[static_cast<int>(r)].load(); }
    std::size_t max_in_flight() const noexcept { return peak_.load(); }

private:
    std::shared_ptr<ChatBackend> inner_;
    std::atomic<std::size_t> total_{0};
    std::atomic<std::size_t> by_role_[3]{};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

/// Builds the backend named by cfg.backend ("mock" or "http").
std::shared_ptr<ChatBackend> make_backend(const EndpointConfig& cfg);

// --- batching ------------------------------------------------------------------

struct BatchItem {
    std::optional<CompletionResult> result;
    std::exception_ptr error;

    bool ok() const noexcept { return result.has_value(); }
    std::string error_message() const;
};

struct BatchOptions {
    std::size_t max_in_flight = 4;
    /// Stop dispatching after the first failure and rethrow it.
    bool fail_fast = false;
};

/// Runs every request with at most max_in_flight outstanding. Output i
/// always corresponds to input i.
std::vector<BatchItem> complete_batch(ChatBackend& backend, std::span<const CompletionRequest> reqs,
                                      BatchOptions opts = {});

}  // namespace dynrag::llm
