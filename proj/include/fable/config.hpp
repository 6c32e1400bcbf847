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

// key = value configuration files. Blank lines and lines starting with '#'
// are ignored. Recognised keys:
//
//   max_depth, hierarchy_threshold, k_doc, budget, tokenizer, budget_policy,
//   threads,
//   gateway.backend, gateway.endpoint, gateway.token_env, gateway.model,
//   gateway.model.<role>, gateway.max_parallel, gateway.max_retries,
//   gateway.timeout_ms, gateway.context_window,
//   embedder.backend, embedder.dimension, embedder.seed, embedder.endpoint,
//   embedder.model,
//   segmenter.backend, segmenter.target_tokens, segmenter.max_tokens

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "fable/budget.hpp"
#include "fable/embedder.hpp"
#include "fable/error.hpp"
#include "fable/forest.hpp"
#include "fable/gateway.hpp"
#include "fable/segmenter.hpp"
#include "fable/text.hpp"

namespace fable {

struct FableConfig {
    RetrievalConfig retrieval{};
    GatewaySpec gateway{};
    EmbedderSpec embedder{};
    SegmenterSpec segmenter{};
    BudgetPolicy budget_policy = BudgetPolicy::prefix;
    unsigned threads = 4;

    void validate() const {
        retrieval.validate();
        gateway.validate();
        embedder.validate();
        segmenter.validate();
        if (threads < 1) throw Error(ErrorKind::configuration, "threads must be >= 1");
    }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw Error(ErrorKind::configuration, "'" + key + "' expects a number, got '" + v + "'");
    }
    return out;
}

inline Role parse_role(const std::string& s) {
    for (auto r : {Role::segment, Role::structure, Role::select_docs, Role::navigate_nodes}) {
        if (to_string(r) == s) return r;
    }
    throw Error(ErrorKind::configuration, "unknown role '" + s + "'");
}

}  // namespace detail

/// Applies one setting; unknown keys are configuration errors.
inline void apply_setting(FableConfig& c, const std::string& key, const std::string& v) {
    using detail::parse_number;
    if (key == "max_depth") c.retrieval.max_depth = parse_number<int>(key, v);
    else if (key == "hierarchy_threshold") c.retrieval.hierarchy_threshold = parse_number<int>(key, v);
    else if (key == "k_doc") c.retrieval.k_doc = parse_number<std::size_t>(key, v);
    else if (key == "budget") c.retrieval.budget = parse_number<std::size_t>(key, v);
    else if (key == "tokenizer") {
        c.retrieval.tokenizer.kind = parse_tokenizer_kind(v);
    } else if (key == "tokenizer.external_name") c.retrieval.tokenizer.external_name = v;
    else if (key == "budget_policy") c.budget_policy = parse_budget_policy(v);
    else if (key == "threads") c.threads = parse_number<unsigned>(key, v);
    else if (key == "gateway.backend") c.gateway.backend = parse_gateway_backend(v);
    else if (key == "gateway.endpoint") c.gateway.endpoint = v;
    else if (key == "gateway.token_env") c.gateway.token_env = v;
    else if (key == "gateway.model") c.gateway.model = v;
    else if (key.rfind("gateway.model.", 0) == 0) c.gateway.role_models[detail::parse_role(key.substr(14))] = v;
    else if (key == "gateway.max_parallel") c.gateway.max_parallel = parse_number<int>(key, v);
    else if (key == "gateway.max_retries") c.gateway.max_retries = parse_number<int>(key, v);
    else if (key == "gateway.timeout_ms") c.gateway.timeout = std::chrono::milliseconds(parse_number<long>(key, v));
    else if (key == "gateway.context_window") c.gateway.context_window = parse_number<std::size_t>(key, v);
    else if (key == "embedder.backend") c.embedder.backend = parse_embedder_backend(v);
    else if (key == "embedder.dimension") c.embedder.dimension = parse_number<std::size_t>(key, v);
    else if (key == "embedder.seed") c.embedder.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "embedder.endpoint") c.embedder.endpoint = v;
    else if (key == "embedder.model") c.embedder.model = v;
    else if (key == "segmenter.backend") c.segmenter.backend = parse_segmenter_backend(v);
    else if (key == "segmenter.target_tokens") c.segmenter.target_chunk_tokens = parse_number<std::size_t>(key, v);
    else if (key == "segmenter.max_tokens") c.segmenter.max_chunk_tokens = parse_number<std::size_t>(key, v);
    else throw Error(ErrorKind::configuration, "unknown configuration key '" + key + "'");
}

inline FableConfig parse_config(std::istream& in, FableConfig base = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": expected key = value");
        }
        const auto key = std::string(text::trim(t.substr(0, eq)));
        auto value = std::string(text::trim(t.substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        try {
            apply_setting(base, key, value);
        } catch (const Error& e) {
            throw Error(ErrorKind::configuration, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

inline FableConfig load_config(const std::filesystem::path& path, FableConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read config " + path.string());
    return parse_config(in, std::move(base));
}

}  // namespace fable
