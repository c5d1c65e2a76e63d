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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "dynrag/llm_client.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "dynrag/jsonl.hpp"

namespace dynrag::llm {

using Json = nlohmann::json;

std::string_view role_name(Role r) {
    switch (r) {
        case Role::reranker: return "reranker";
        case Role::generator: return "generator";
        case Role::judge: return "judge";
    }
    return "reranker";
}

namespace {

std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme = base_url.find("://");
    auto host_begin = scheme == std::string::npos ? 0 : scheme + 3;
    auto slash = base_url.find('/', host_begin);
    if (slash == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, slash), prefix};
}

bool retryable_status(int status) { return status == 408 || status == 429 || (status >= 500 && status <= 599); }

std::string read_api_key(const std::string& env) {
    if (env.empty()) return {};
    const char* v = std::getenv(env.c_str());
    return v ? std::string(v) : std::string();
}

Sleeper default_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

}  // namespace

HttpPost make_http_post(double timeout_s) {
    return [timeout_s](const std::string& base_url, const std::string& path, const std::string& body,
                       const Headers& headers) -> HttpResponse {
        auto [origin, prefix] = split_base_url(base_url);
        httplib::Client client(origin);
        auto secs = static_cast<time_t>(timeout_s);
        auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers hs;
        for (const auto& [k, v] : headers) hs.emplace(k, v);
        auto res = client.Post(prefix + path, hs, body, "application/json");
        if (!res) throw TransportError("POST " + base_url + path + " failed: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    };
}

std::string build_chat_body(const std::string& model, const CompletionRequest& req) {
    Json messages = Json::array();
    if (!req.prompt.system_text.empty())
        messages.push_back({{"role", "system"}, {"content", req.prompt.system_text}});
    messages.push_back({{"role", "user"}, {"content", req.prompt.user_text}});
    nlohmann::ordered_json body;
    body["model"] = model;
    body["messages"] = messages;
    body["temperature"] = req.temperature;
    body["top_p"] = req.top_p;
    body["max_tokens"] = req.max_tokens;
    if (req.seed) body["seed"] = *req.seed;
    return body.dump();
}

CompletionResult parse_chat_response(const std::string& body, const std::string& backend_id) {
    Json j;
    try {
        j = Json::parse(body);
    } catch (const Json::parse_error& e) {
        throw MalformedResponseError(std::string("response is not JSON: ") + e.what());
    }
    const Json* content = nullptr;
    if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const auto& c0 = j["choices"][0];
        if (c0.is_object() && c0.contains("message") && c0["message"].is_object() && c0["message"].contains("content"))
            content = &c0["message"]["content"];
    }
    if (!content) throw MalformedResponseError("response lacks choices[0].message.content");
    CompletionResult r;
    r.backend_id = backend_id;
    if (content->is_string()) {
        r.text = content->get<std::string>();
    } else if (!content->is_null()) {
        throw MalformedResponseError("choices[0].message.content is not a string");
    }
    if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
        Usage usage;
        if (u->contains("prompt_tokens") && (*u)["prompt_tokens"].is_number_integer())
            usage.prompt_tokens = (*u)["prompt_tokens"].get<int>();
        if (u->contains("completion_tokens") && (*u)["completion_tokens"].is_number_integer())
            usage.completion_tokens = (*u)["completion_tokens"].get<int>();
        r.usage = usage;
    }
    return r;
}

HttpResponse post_with_retries(const std::function<HttpResponse()>& call, int max_retries, double backoff_s,
                               const Sleeper& sleep, int* attempts) {
    std::string last_error;
    for (int attempt = 0;; ++attempt) {
        if (attempts) *attempts = attempt + 1;
        try {
            HttpResponse res = call();
            if (!retryable_status(res.status)) return res;
            last_error = "HTTP " + std::to_string(res.status) + ": " + res.body;
        } catch (const TransportError& e) {
            last_error = e.what();
        }
        if (attempt >= max_retries) break;
        auto delay = std::chrono::milliseconds(static_cast<long long>(std::llround(backoff_s * 1000.0 * std::ldexp(1.0, attempt))));
        sleep(delay);
    }
    throw TransportError("giving up after " + std::to_string(max_retries + 1) + " attempts: " + last_error);
}

HttpChatBackend::HttpChatBackend(EndpointConfig cfg, HttpPost post, Sleeper sleep)
    : cfg_(std::move(cfg)),
      post_(post ? std::move(post) : make_http_post(cfg_.timeout_s)),
      sleep_(sleep ? std::move(sleep) : default_sleeper()),
      api_key_(read_api_key(cfg_.api_key_env)) {}

CompletionResult HttpChatBackend::complete(const CompletionRequest& req) {
    if (req.max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    Headers headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    const std::string body = build_chat_body(cfg_.model, req);
    int attempts = 0;
    HttpResponse res;
    try {
        res = post_with_retries([&] { return post_(cfg_.base_url, "/chat/completions", body, headers); },
                                cfg_.max_retries, cfg_.backoff_s, sleep_, &attempts);
    } catch (...) {
        last_attempts_ = attempts;
        throw;
    }
    last_attempts_ = attempts;
    if (res.status < 200 || res.status > 299) throw RequestRejectedError(res.status, res.body);
    return parse_chat_response(res.body, id());
}

EmbeddingClient::EmbeddingClient(EndpointConfig cfg, HttpPost post, Sleeper sleep)
    : cfg_(std::move(cfg)),
      post_(post ? std::move(post) : make_http_post(cfg_.timeout_s)),
      sleep_(sleep ? std::move(sleep) : default_sleeper()),
      api_key_(read_api_key(cfg_.api_key_env)) {}

std::vector<std::vector<double>> EmbeddingClient::embed(const std::vector<std::string>& inputs) {
    Headers headers;
    if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);
    nlohmann::ordered_json body;
    body["model"] = cfg_.model;
    body["input"] = inputs;
    const std::string payload = body.dump();
    HttpResponse res = post_with_retries([&] { return post_(cfg_.base_url, "/embeddings", payload, headers); },
                                         cfg_.max_retries, cfg_.backoff_s, sleep_);
    if (res.status < 200 || res.status > 299) throw RequestRejectedError(res.status, res.body);
    Json j;
    try {
        j = Json::parse(res.body);
    } catch (const Json::parse_error& e) {
        throw MalformedResponseError(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("data") || !j["data"].is_array() || j["data"].size() != inputs.size())
        throw MalformedResponseError("embedding response lacks one data entry per input");
    std::vector<std::vector<double>> out(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& item = j["data"][i];
        std::size_t slot = i;
        if (item.contains("index") && item["index"].is_number_integer()) slot = item["index"].get<std::size_t>();
        if (slot >= inputs.size() || !item.contains("embedding") || !item["embedding"].is_array())
            throw MalformedResponseError("malformed embedding entry");
        for (const auto& v : item["embedding"]) {
            if (!v.is_number()) throw MalformedResponseError("non-numeric embedding component");
            out[slot].push_back(v.get<double>());
        }
    }
    return out;
}

// --- mock ----------------------------------------------------------------------

std::string prompt_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
        h >>= 4;
    }
    return out;
}

MockBackend::MockBackend(std::vector<MockRule> rules, std::string default_reply, std::string id)
    : rules_(std::move(rules)), default_reply_(std::move(default_reply)), id_(std::move(id)) {}

std::unique_ptr<MockBackend> MockBackend::from_script(const std::filesystem::path& path, std::string default_reply) {
    if (!std::filesystem::exists(path)) throw IoError("mock script not found: " + path.string());
    std::vector<MockRule> rules;
    jsonl::for_each_record(path, [&](const jsonl::Json& j, std::size_t line) {
        MockRule r;
        const std::string match = jsonl::require_string(j, "match", line);
        r.reply = jsonl::require_string(j, "reply", line);
        auto key = j.find("key");
        if (key == j.end()) throw FormatError("missing \"key\"", line);
        if (match == "ordinal") {
            if (!key->is_number_unsigned()) throw FormatError("ordinal key must be a non-negative integer", line);
            r.match = MockRule::Match::ordinal;
            r.ordinal = key->get<std::size_t>();
        } else if (match == "hash" || match == "contains") {
            if (!key->is_string()) throw FormatError(match + " key must be a string", line);
            r.match = match == "hash" ? MockRule::Match::hash : MockRule::Match::contains;
            r.key = key->get<std::string>();
        } else {
            throw FormatError("unknown match kind \"" + match + "\"", line);
        }
        if (auto s = j.find("seed"); s != j.end() && !s->is_null()) {
            if (!s->is_number_integer()) throw FormatError("seed must be an integer", line);
            r.seed = s->get<std::int64_t>();
        }
        rules.push_back(std::move(r));
    });
    return std::make_unique<MockBackend>(std::move(rules), std::move(default_reply),
                                         "mock:" + path.filename().string());
}

CompletionResult MockBackend::complete(const CompletionRequest& req) {
    if (req.max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
    const std::size_t call = calls_.fetch_add(1);
    const std::string text = req.prompt.full_text();
    auto pick = [&](MockRule::Match kind, auto&& matches) -> const MockRule* {
        const MockRule* seedless = nullptr;
        for (const auto& r : rules_) {
            if (r.match != kind || !matches(r)) continue;
            if (r.seed) {
                if (req.seed && *r.seed == *req.seed) return &r;
            } else if (!seedless) {
                seedless = &r;
            }
        }
        return seedless;
    };
    const MockRule* hit = pick(MockRule::Match::ordinal, [&](const MockRule& r) { return r.ordinal == call; });
    if (!hit) {
        const std::string h = prompt_hash(text);
        hit = pick(MockRule::Match::hash, [&](const MockRule& r) { return r.key == h; });
    }
    if (!hit) hit = pick(MockRule::Match::contains, [&](const MockRule& r) { return text.find(r.key) != std::string::npos; });
    return {hit ? hit->reply : default_reply_, std::nullopt, id_};
}

CompletionResult CountingBackend::complete(const CompletionRequest& req) {
    ++total_;
    ++by_role_[static_cast<int>(req.role)];
    std::size_t now = ++in_flight_;
    std::size_t peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
        std::atomic<std::size_t>& n;
        ~Leave() { --n; }
    } leave{in_flight_};
    return inner_->complete(req);
}

std::shared_ptr<ChatBackend> make_backend(const EndpointConfig& cfg) {
    if (cfg.backend == "mock") {
        if (cfg.mock_script.empty()) return std::make_shared<MockBackend>(std::vector<MockRule>{}, cfg.default_reply);
        return MockBackend::from_script(cfg.mock_script, cfg.default_reply);
    }
    if (cfg.backend == "http") {
        if (cfg.base_url.empty()) throw ConfigError("http endpoint requires base_url");
        return std::make_shared<HttpChatBackend>(cfg);
    }
    throw ConfigError("unknown backend \"" + cfg.backend + "\" (expected \"mock\" or \"http\")");
}

// --- batch -----------------------------------------------------------------------

std::string BatchItem::error_message() const {
    if (!error) return {};
    try {
        std::rethrow_exception(error);
    } catch (const std::exception& e) {
        return e.what();
    } catch (...) {
        return "unknown error";
    }
}

std::vector<BatchItem> complete_batch(ChatBackend& backend, std::span<const CompletionRequest> reqs,
                                      BatchOptions opts) {
    if (opts.max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    std::vector<BatchItem> out(reqs.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    auto worker = [&] {
        for (;;) {
            if (stop.load()) return;
            std::size_t i = next.fetch_add(1);
            if (i >= reqs.size()) return;
            try {
                out[i].result = backend.complete(reqs[i]);
            } catch (...) {
                out[i].error = std::current_exception();
                if (opts.fail_fast) stop = true;
            }
        }
    };
    const std::size_t workers = std::min(opts.max_in_flight, reqs.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    if (opts.fail_fast) {
        for (const auto& item : out)
            if (item.error) std::rethrow_exception(item.error);
    }
    return out;
}

}  // namespace dynrag::llm
