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

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

#include "fable/error.hpp"
#include "fable/text.hpp"

namespace fable {

enum class TokenizerKind { approx_bytes, whitespace, external };

inline std::string_view to_string(TokenizerKind kind) {
    switch (kind) {
        case TokenizerKind::approx_bytes: return "approx_bytes";
        case TokenizerKind::whitespace: return "whitespace";
        case TokenizerKind::external: return "external";
    }
    return "approx_bytes";
}

inline TokenizerKind parse_tokenizer_kind(std::string_view name) {
    if (name == "approx_bytes") return TokenizerKind::approx_bytes;
    if (name == "whitespace") return TokenizerKind::whitespace;
    if (name == "external") return TokenizerKind::external;
    throw Error(ErrorKind::configuration, "unknown tokenizer '" + std::string(name) + "'");
}

struct TokenizerSpec {
    TokenizerKind kind = TokenizerKind::approx_bytes;
    std::string external_name;  // registry key, external kind only

    bool operator==(const TokenizerSpec&) const = default;
};

using TokenCountFn = std::function<std::size_t(std::string_view)>;

namespace detail {
struct TokenizerRegistry {
    std::mutex mutex;
    std::map<std::string, TokenCountFn, std::less<>> counters;

    static TokenizerRegistry& instance() {
        static TokenizerRegistry registry;
        return registry;
    }
};
}  // namespace detail

/// Makes an external token counter available to TokenizerSpec{external, name}.
inline void register_external_tokenizer(std::string name, TokenCountFn fn) {
    auto& reg = detail::TokenizerRegistry::instance();
    std::lock_guard lock(reg.mutex);
    reg.counters[std::move(name)] = std::move(fn);
}

/// Token length function used for chunk sizing and budget accounting.
/// Construction resolves external tokenizers, so a missing one fails at
/// startup rather than per call.
class Tokenizer {
public:
    Tokenizer() = default;

    explicit Tokenizer(TokenizerSpec spec) : spec_(std::move(spec)) {
        if (spec_.kind == TokenizerKind::external) {
            auto& reg = detail::TokenizerRegistry::instance();
            std::lock_guard lock(reg.mutex);
            auto it = reg.counters.find(spec_.external_name);
            if (it == reg.counters.end()) {
                throw Error(ErrorKind::configuration,
                            "external tokenizer '" + spec_.external_name + "' is not registered");
            }
            external_ = it->second;
        }
    }

    const TokenizerSpec& spec() const { return spec_; }

    std::size_t count(std::string_view s) const {
        if (s.empty()) return 0;
        switch (spec_.kind) {
            case TokenizerKind::approx_bytes: return (s.size() + 3) / 4;
            case TokenizerKind::whitespace: {
                std::size_t n = 0;
                bool in_word = false;
                for (char c : s) {
                    const bool ws = text::is_space(c);
                    if (!ws && !in_word) ++n;
                    in_word = !ws;
                }
                return n == 0 ? 1 : n;
            }
            case TokenizerKind::external: return external_(s);
        }
        return 0;
    }

    std::size_t operator()(std::string_view s) const { return count(s); }

private:
    TokenizerSpec spec_{};
    TokenCountFn external_;
};

inline std::size_t tokens(std::string_view s, const Tokenizer& tokenizer) { return tokenizer.count(s); }

}  // namespace fable
