// Copyright 2026 The Fable Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Boundary to language-model backends. Every role has a fixed payload shape
// and a response schema; a response is only ever returned after it validated
// against its role's schema.
//
//   segment         {"doc_id","text","max_chunk_tokens"}      -> {"boundaries":[int]}
//   structure       {"task":"outline","doc_id","max_depth","chunks":[{"chunk_id","content"}]}
//                                                              -> outline (see validate_outline)
//                   {"task":"merge_root","doc_id","children":[{"title","summary"}]}
//                                                              -> {"title","summary"}
//   select_docs     {"query","documents":[{"doc_id","entries":[entry]}]}
//                                                              -> {"doc_ids":[string]}
//   navigate_nodes  {"query","documents":[{"doc_id","entries":[entry]}]}
//                                                              -> {"nodes":[{"doc_id","node_id"}]}
//
// where entry = {"node_id","parent","depth","toc":[string],"summary"}.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/error.hpp"
#include "fable/prompts.hpp"
#include "fable/text.hpp"
#include "fable/tokenizer.hpp"

namespace fable {

inline constexpr std::size_t kDefaultContextWindow = 131072;

enum class GatewayBackend { http_chat, mock };

inline std::string_view to_string(GatewayBackend b) { return b == GatewayBackend::mock ? "mock" : "http_chat"; }

inline GatewayBackend parse_gateway_backend(std::string_view s) {
    if (s == "mock") return GatewayBackend::mock;
    if (s == "http" || s == "http_chat") return GatewayBackend::http_chat;
    throw Error(ErrorKind::configuration, "unknown gateway backend '" + std::string(s) + "'");
}

struct GatewaySpec {
    GatewayBackend backend = GatewayBackend::mock;
    std::string endpoint;                   // chat-completions URL, http only
    std::string token_env = "FABLE_LLM_TOKEN";
    std::string model;
    std::map<Role, std::string> role_models;  // per-role overrides of model
    int max_parallel = 4;
    int max_retries = 2;
    std::chrono::milliseconds timeout{60000};
    std::chrono::milliseconds backoff_base{250};
    std::size_t context_window = kDefaultContextWindow;  // tokens
    std::string prompt_bundle_version{kPromptBundleVersion};

    void validate() const {
        if (max_parallel < 1) throw Error(ErrorKind::configuration, "gateway max_parallel must be >= 1");
        if (max_retries < 0) throw Error(ErrorKind::configuration, "gateway max_retries must be >= 0");
        if (context_window < 1) throw Error(ErrorKind::configuration, "gateway context_window must be >= 1");
        if (backend == GatewayBackend::http_chat && endpoint.empty()) {
            throw Error(ErrorKind::configuration,
                        "gateway endpoint is empty (set gateway.endpoint or FABLE_LLM_ENDPOINT)");
        }
    }

    /// Fills the endpoint from FABLE_LLM_ENDPOINT when not configured.
    void apply_environment() {
        if (endpoint.empty()) {
            if (const char* e = std::getenv("FABLE_LLM_ENDPOINT")) endpoint = e;
        }
    }

    const std::string& model_for(Role role) const {
        auto it = role_models.find(role);
        return it == role_models.end() ? model : it->second;
    }
};

struct CallAudit {
    int attempts = 0;
    int retries = 0;
};

// ---------------------------------------------------------------------------
// Response schemas

namespace schema {

inline bool is_string_array(const nlohmann::json& j) {
    if (!j.is_array()) return false;
    for (const auto& e : j) {
        if (!e.is_string()) return false;
    }
    return true;
}

inline std::optional<std::string> validate_outline(const nlohmann::json& j, int depth = 0) {
    if (depth > 64) return "outline nests too deeply";
    if (!j.is_object()) return "outline node is not an object";
    if (j.contains("chunk")) {
        if (!j["chunk"].is_string()) return "\"chunk\" must be a string";
        return std::nullopt;
    }
    if (!j.contains("title") || !j["title"].is_string()) return "heading without string \"title\"";
    if (j.contains("summary") && !j["summary"].is_string()) return "\"summary\" must be a string";
    if (!j.contains("children") || !j["children"].is_array()) return "heading without \"children\" array";
    for (const auto& c : j["children"]) {
        if (auto err = validate_outline(c, depth + 1)) return err;
    }
    return std::nullopt;
}

/// Returns a description of the first violation, or nullopt when valid.
inline std::optional<std::string> validate(Role role, const nlohmann::json& payload, const nlohmann::json& r) {
    if (!r.is_object()) return "response is not a JSON object";
    switch (role) {
        case Role::segment: {
            if (!r.contains("boundaries") || !r["boundaries"].is_array()) return "missing \"boundaries\" array";
            for (const auto& b : r["boundaries"]) {
                if (!b.is_number_integer() && !b.is_number_unsigned()) return "boundaries must be integers";
            }
            return std::nullopt;
        }
        case Role::structure:
            if (payload.is_object() && payload.value("task", std::string{}) == "merge_root") {
                if (!r.contains("title") || !r["title"].is_string()) return "missing string \"title\"";
                if (!r.contains("summary") || !r["summary"].is_string()) return "missing string \"summary\"";
                return std::nullopt;
            }
            return validate_outline(r);
        case Role::select_docs:
            if (!r.contains("doc_ids") || !is_string_array(r["doc_ids"])) return "\"doc_ids\" must be a string array";
            return std::nullopt;
        case Role::navigate_nodes:
            if (!r.contains("nodes") || !r["nodes"].is_array()) return "missing \"nodes\" array";
            for (const auto& n : r["nodes"]) {
                if (!n.is_object() || !n.contains("doc_id") || !n["doc_id"].is_string() || !n.contains("node_id") ||
                    !n["node_id"].is_string()) {
                    return "nodes entries need string doc_id and node_id";
                }
            }
            return std::nullopt;
    }
    return "unknown role";
}

}  // namespace schema

/// Rendered prompt size in approx-bytes tokens; calls above the window are
/// rejected before any backend sees them.
inline void check_context(Role role, const prompts::Rendered& p, std::size_t window) {
    static const Tokenizer approx{};
    const auto used = approx.count(p.system) + approx.count(p.user);
    if (used > window) {
        throw Error(ErrorKind::context_overflow, std::string(to_string(role)) + " prompt needs " +
                                                     std::to_string(used) + " tokens, window is " +
                                                     std::to_string(window));
    }
}

class Gateway {
public:
    virtual ~Gateway() = default;

    /// Issues one role call and returns a schema-valid response.
    virtual nlohmann::json call(Role role, const nlohmann::json& payload, CallAudit* audit = nullptr) = 0;

    virtual std::size_t context_window() const = 0;
};

// ---------------------------------------------------------------------------
// Mock backend

/// A canned reply used when the rendered user prompt contains `prompt_contains`
/// (an empty pattern matches every prompt of the role).
struct MockRule {
    Role role;
    std::string prompt_contains;
    nlohmann::json response;
};

using MockHandler = std::function<nlohmann::json(const nlohmann::json& payload)>;

struct MockScript {
    std::vector<MockRule> rules;         // first match wins
    std::map<Role, MockHandler> defaults;  // consulted when no rule matches
};

/// Deterministic in-process backend: same prompt, same response.
class MockGateway final : public Gateway {
public:
    explicit MockGateway(MockScript script, std::size_t context_window = kDefaultContextWindow)
        : script_(std::move(script)), window_(context_window) {}

    nlohmann::json call(Role role, const nlohmann::json& payload, CallAudit* audit = nullptr) override {
        const auto prompt = prompts::render(role, payload);
        check_context(role, prompt, window_);
        calls_.fetch_add(1, std::memory_order_relaxed);
        if (audit) *audit = CallAudit{1, 0};

        nlohmann::json response;
        bool matched = false;
        for (const auto& rule : script_.rules) {
            if (rule.role == role && prompt.user.find(rule.prompt_contains) != std::string::npos) {
                response = rule.response;
                matched = true;
                break;
            }
        }
        if (!matched) {
            auto it = script_.defaults.find(role);
            if (it == script_.defaults.end()) {
                throw Error(ErrorKind::gateway_schema, "mock has no behaviour for role " + std::string(to_string(role)));
            }
            response = it->second(payload);
        }
        if (auto err = schema::validate(role, payload, response)) {
            throw Error(ErrorKind::gateway_schema, "mock " + std::string(to_string(role)) + ": " + *err);
        }
        return response;
    }

    std::size_t context_window() const override { return window_; }
    std::size_t calls() const { return calls_.load(); }

private:
    MockScript script_;
    std::size_t window_;
    std::atomic<std::size_t> calls_{0};
};

/// Wraps another gateway and fails every call of the listed roles.
class FaultInjectingGateway final : public Gateway {
public:
    FaultInjectingGateway(Gateway& inner, std::set<Role> failing) : inner_(inner), failing_(std::move(failing)) {}

    nlohmann::json call(Role role, const nlohmann::json& payload, CallAudit* audit = nullptr) override {
        if (failing_.count(role)) {
            throw Error(ErrorKind::gateway_transient, "injected failure for role " + std::string(to_string(role)));
        }
        return inner_.call(role, payload, audit);
    }

    std::size_t context_window() const override { return inner_.context_window(); }

private:
    Gateway& inner_;
    std::set<Role> failing_;
};

// ---------------------------------------------------------------------------
// HTTP chat-completions backend

struct HttpReply {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// POST-only transport. Connection failures and timeouts throw
/// Error(gateway_transient).
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpReply post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                           std::chrono::milliseconds timeout) = 0;
};

/// Counting limiter for in-flight requests.
class ParallelLimiter {
public:
    explicit ParallelLimiter(int max) : max_(max) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return in_flight_ < max_; });
        ++in_flight_;
    }

    void release() {
        {
            std::lock_guard lock(mutex_);
            --in_flight_;
        }
        cv_.notify_one();
    }

    struct Guard {
        ParallelLimiter& limiter;
        explicit Guard(ParallelLimiter& l) : limiter(l) { limiter.acquire(); }
        ~Guard() { limiter.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;
    };

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    int max_;
};

/// Extracts a JSON value from model output, tolerating a surrounding code fence.
inline std::optional<nlohmann::json> parse_model_json(std::string_view content) {
    auto s = text::trim(content);
    if (s.starts_with("```")) {
        const auto nl = s.find('\n');
        const auto close = s.rfind("```");
        if (nl != std::string_view::npos && close != std::string_view::npos && close > nl) {
            s = text::trim(s.substr(nl + 1, close - nl - 1));
        }
    }
    auto j = nlohmann::json::parse(s, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

class HttpChatGateway final : public Gateway {
public:
    HttpChatGateway(GatewaySpec spec, Transport& transport)
        : spec_(std::move(spec)), transport_(transport), limiter_(spec_.max_parallel) {
        spec_.apply_environment();
        spec_.validate();
        if (const char* t = std::getenv(spec_.token_env.c_str())) token_ = t;
        if (const char* l = std::getenv("FABLE_GATEWAY_LOG")) log_ = std::string_view(l) == "1";
    }

    nlohmann::json call(Role role, const nlohmann::json& payload, CallAudit* audit = nullptr) override {
        const auto prompt = prompts::render(role, payload);
        check_context(role, prompt, spec_.context_window);

        nlohmann::json messages = nlohmann::json::array();
        messages.push_back({{"role", "system"}, {"content", prompt.system}});
        messages.push_back({{"role", "user"}, {"content", prompt.user}});

        HttpHeaders headers{{"Content-Type", "application/json"}};
        if (!token_.empty()) headers.emplace_back("Authorization", "Bearer " + token_);

        std::string last_error;
        for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
            if (audit) *audit = CallAudit{attempt + 1, attempt};
            if (attempt > 0 && last_error.rfind("transient", 0) == 0) backoff(attempt);

            nlohmann::json request{{"model", spec_.model_for(role)},
                                   {"messages", messages},
                                   {"temperature", 0},
                                   {"response_format", {{"type", "json_object"}}}};
            const auto body = request.dump();
            log("request", body);

            HttpReply reply;
            try {
                ParallelLimiter::Guard slot(limiter_);
                reply = transport_.post(spec_.endpoint, body, headers, spec_.timeout);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::gateway_transient) throw;
                last_error = std::string("transient: ") + e.what();
                continue;
            }
            log("response", reply.body);

            if (reply.status == 408 || reply.status == 429 || reply.status >= 500) {
                last_error = "transient: http status " + std::to_string(reply.status);
                continue;
            }
            if (reply.status < 200 || reply.status >= 300) {
                throw Error(ErrorKind::configuration, "endpoint answered http status " + std::to_string(reply.status));
            }

            std::string content;
            auto envelope = nlohmann::json::parse(reply.body, nullptr, false);
            if (!envelope.is_discarded() && envelope.contains("choices") && envelope["choices"].is_array() &&
                !envelope["choices"].empty()) {
                const auto& msg = envelope["choices"][0].value("message", nlohmann::json::object());
                if (msg.contains("content") && msg["content"].is_string()) content = msg["content"].get<std::string>();
            }

            std::string problem;
            if (auto parsed = parse_model_json(content)) {
                if (auto err = schema::validate(role, payload, *parsed)) {
                    problem = *err;
                } else {
                    return *parsed;
                }
            } else {
                problem = "reply is not valid JSON";
            }
            last_error = "schema: " + problem;
            messages.push_back({{"role", "assistant"}, {"content", content}});
            messages.push_back({{"role", "user"}, {"content", prompts::substitute(prompts::kRepair, "error", problem)}});
        }

        if (last_error.rfind("schema", 0) == 0) {
            throw Error(ErrorKind::gateway_schema, std::string(to_string(role)) + ": " + last_error);
        }
        throw Error(ErrorKind::gateway_transient, std::string(to_string(role)) + ": " + last_error);
    }

    std::size_t context_window() const override { return spec_.context_window; }
    const GatewaySpec& spec() const { return spec_; }

private:
    void backoff(int attempt) const {
        const auto delay = spec_.backoff_base * (1 << std::min(attempt - 1, 10));
        if (delay.count() > 0) std::this_thread::sleep_for(delay);
    }

    void log(const char* what, const std::string& body) const {
        if (!log_) return;
        std::lock_guard lock(log_mutex_);
        std::clog << "[fable-gateway] " << what << " " << spec_.endpoint
                  << (token_.empty() ? "" : " (Authorization: Bearer <redacted>)") << "\n"
                  << body << "\n";
    }

    GatewaySpec spec_;
    Transport& transport_;
    ParallelLimiter limiter_;
    std::string token_;
    bool log_ = false;
    mutable std::mutex log_mutex_;
};

}  // namespace fable
