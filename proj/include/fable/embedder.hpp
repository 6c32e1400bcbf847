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

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/error.hpp"
#include "fable/forest.hpp"
#include "fable/gateway.hpp"
#include "fable/text.hpp"

namespace fable {

enum class EmbedderBackend { http, hash_mock };

inline std::string_view to_string(EmbedderBackend b) { return b == EmbedderBackend::http ? "http" : "hash_mock"; }

inline EmbedderBackend parse_embedder_backend(std::string_view s) {
    if (s == "http") return EmbedderBackend::http;
    if (s == "hash_mock") return EmbedderBackend::hash_mock;
    throw Error(ErrorKind::configuration, "unknown embedder backend '" + std::string(s) + "'");
}

struct EmbedderSpec {
    EmbedderBackend backend = EmbedderBackend::hash_mock;
    std::size_t dimension = 4096;
    std::uint64_t seed = 0x5eedf00dULL;  // hash_mock only
    std::string endpoint;                // http only, OpenAI-style /embeddings URL
    std::string model;

    void validate() const {
        if (dimension < 8) throw Error(ErrorKind::configuration, "embedder dimension must be >= 8");
        if (backend == EmbedderBackend::http && endpoint.empty()) {
            throw Error(ErrorKind::configuration, "http embedder needs an endpoint");
        }
    }

    bool operator==(const EmbedderSpec&) const = default;
};

/// Scales v to unit L2 norm; the zero vector maps to the first basis vector.
inline std::vector<float> unit_normalized(const std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    std::vector<float> out(v.size(), 0.0f);
    if (norm == 0.0) {
        if (!out.empty()) out[0] = 1.0f;
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / norm);
    return out;
}

class Embedder {
public:
    virtual ~Embedder() = default;
    /// Unit-normalized embedding of text.
    virtual std::vector<float> embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;
};

/// Feature-hashed bag of words: every lower-cased token lands in one bucket
/// with a pseudo-random sign, weighted 1 + ln(tf). Pure function of
/// (text, dimension, seed).
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension, std::uint64_t seed = EmbedderSpec{}.seed)
        : dimension_(dimension), seed_(seed) {
        if (dimension_ < 8) throw Error(ErrorKind::configuration, "embedder dimension must be >= 8");
    }

    std::vector<float> embed(std::string_view s) const override {
        std::map<std::string, int> tf;
        for (auto& t : text::word_tokens(s)) ++tf[t];
        if (tf.empty() && !s.empty()) tf[std::string(s)] = 1;
        std::vector<double> v(dimension_, 0.0);
        for (const auto& [token, count] : tf) {
            const auto h = mix(fnv1a(token) ^ seed_);
            const auto bucket = static_cast<std::size_t>(h % dimension_);
            const double sign = (h >> 63) ? -1.0 : 1.0;
            v[bucket] += sign * (1.0 + std::log(static_cast<double>(count)));
        }
        return unit_normalized(v);
    }

    std::size_t dimension() const override { return dimension_; }

private:
    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::size_t dimension_;
    std::uint64_t seed_;
};

/// OpenAI-compatible embeddings endpoint: POST {"model","input"} and read
/// data[0].embedding. Failures surface as Error(gateway_transient).
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(EmbedderSpec spec, Transport& transport) : spec_(std::move(spec)), transport_(transport) {
        spec_.validate();
        if (const char* t = std::getenv("FABLE_LLM_TOKEN")) token_ = t;
    }

    std::vector<float> embed(std::string_view s) const override {
        HttpHeaders headers{{"Content-Type", "application/json"}};
        if (!token_.empty()) headers.emplace_back("Authorization", "Bearer " + token_);
        const nlohmann::json request{{"model", spec_.model}, {"input", std::string(s)}};
        const auto reply = transport_.post(spec_.endpoint, request.dump(), headers, std::chrono::seconds(60));
        if (reply.status < 200 || reply.status >= 300) {
            throw Error(ErrorKind::gateway_transient, "embedding endpoint status " + std::to_string(reply.status));
        }
        auto j = nlohmann::json::parse(reply.body, nullptr, false);
        if (j.is_discarded() || !j.contains("data") || j["data"].empty() || !j["data"][0].contains("embedding")) {
            throw Error(ErrorKind::gateway_transient, "embedding endpoint returned an unexpected body");
        }
        const auto values = j["data"][0]["embedding"].get<std::vector<double>>();
        if (values.size() != spec_.dimension) {
            throw Error(ErrorKind::configuration, "embedding has dimension " + std::to_string(values.size()) +
                                                      ", expected " + std::to_string(spec_.dimension));
        }
        return unit_normalized(values);
    }

    std::size_t dimension() const override { return spec_.dimension; }

private:
    EmbedderSpec spec_;
    Transport& transport_;
    std::string token_;
};

inline constexpr std::string_view kTocSeparator = " > ";

/// Embedding input of an internal node: toc path, a newline, the summary.
inline std::string internal_embedding_text(const SemanticTree& tree, std::string_view node_id) {
    return text::join(tree.toc_path(node_id), kTocSeparator) + "\n" + tree.node(node_id).summary;
}

}  // namespace fable
