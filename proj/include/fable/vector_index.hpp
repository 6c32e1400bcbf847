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

// Exact cosine top-K over node embeddings.
//
// On-disk layout (all integers little-endian):
//
//   offset  size        field
//   0       8           magic "FABLEVEC"
//   8       4           u32 format version (1)
//   12      4           u32 dimension
//   16      8           u64 record count N
//   24      20*N        key table, one record per vector:
//                         u32 doc_off, u32 doc_len, u32 node_off, u32 node_len,
//                         u8 granularity (0 internal, 1 leaf), 3 bytes zero
//   ..      8           u64 string blob size S
//   ..      S           string blob (offsets above are relative to its start)
//   ..      4*dim*N     float32 vectors, record order

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "fable/error.hpp"
#include "fable/forest.hpp"

namespace fable {

enum class Granularity : std::uint8_t { internal = 0, leaf = 1 };

inline std::string_view to_string(Granularity g) { return g == Granularity::leaf ? "leaf" : "internal"; }

struct NodeEmbedding {
    NodeKey key;
    std::vector<float> vector;
    Granularity granularity = Granularity::internal;

    bool operator==(const NodeEmbedding&) const = default;
};

struct Hit {
    NodeKey key;
    double score = 0.0;

    bool operator==(const Hit&) const = default;
};

/// Restricts a search; unset members do not filter.
struct Scope {
    std::optional<Granularity> granularity;
    std::optional<std::set<std::string>> docs;
};

/// Hit order: score descending, then doc_id, then node_id ascending.
inline bool hit_before(const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
}

/// Double-precision dot product. Four interleaved partial sums, always
/// combined in the same order.
inline double dot(std::span<const float> a, std::span<const float> b) {
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= a.size(); i += 4) {
        for (std::size_t j = 0; j < 4; ++j) s[j] += static_cast<double>(a[i + j]) * static_cast<double>(b[i + j]);
    }
    for (; i < a.size(); ++i) s[0] += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return (s[0] + s[1]) + (s[2] + s[3]);
}

inline double l2norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

class VectorIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    explicit VectorIndex(std::size_t dimension) : dim_(dimension) {
        if (dim_ == 0) throw Error(ErrorKind::invalid_argument, "index dimension must be positive");
    }

    std::size_t dimension() const { return dim_; }
    std::size_t size() const { return keys_.size(); }
    bool empty() const { return keys_.empty(); }

    /// Appends a vector, rescaled to unit length.
    void add(const NodeKey& key, std::span<const float> v, Granularity g) {
        if (v.size() != dim_) {
            throw Error(ErrorKind::invalid_argument, "vector of dimension " + std::to_string(v.size()) +
                                                         " in an index of dimension " + std::to_string(dim_));
        }
        if (slot_.count(key)) {
            throw Error(ErrorKind::invalid_argument, "duplicate key " + key.doc_id + "/" + key.node_id);
        }
        const double n = l2norm(v);
        if (!(n > 0.0) || !std::isfinite(n)) {
            throw Error(ErrorKind::invalid_argument, "vector for " + key.doc_id + "/" + key.node_id + " has no direction");
        }
        slot_.emplace(key, keys_.size());
        keys_.push_back(key);
        gran_.push_back(g);
        for (float x : v) data_.push_back(static_cast<float>(x / n));
        norms_.push_back(l2norm(vector(keys_.size() - 1)));
    }

    void add(const NodeEmbedding& e) { add(e.key, e.vector, e.granularity); }

    std::optional<std::size_t> find(const NodeKey& key) const {
        auto it = slot_.find(key);
        if (it == slot_.end()) return std::nullopt;
        return it->second;
    }

    const NodeKey& key(std::size_t i) const { return keys_.at(i); }
    Granularity granularity(std::size_t i) const { return gran_.at(i); }
    std::span<const float> vector(std::size_t i) const { return std::span<const float>(data_).subspan(i * dim_, dim_); }

    std::span<const float> vector(const NodeKey& k) const {
        auto i = find(k);
        if (!i) throw Error(ErrorKind::not_found, "no vector for " + k.doc_id + "/" + k.node_id);
        return vector(*i);
    }

    /// Cosine between the query and entry i, in double precision.
    double cosine(std::span<const float> query, std::size_t i) const { return cosine(query, l2norm(query), i); }

    bool in_scope(std::size_t i, const Scope& scope) const {
        if (scope.granularity && gran_[i] != *scope.granularity) return false;
        if (scope.docs && !scope.docs->count(keys_[i].doc_id)) return false;
        return true;
    }

    /// Exact top-K by brute force. Scoring is split across `threads` workers;
    /// the result does not depend on the split.
    std::vector<Hit> topk(std::span<const float> query, std::size_t k, const Scope& scope = {},
                          unsigned threads = 1) const {
        if (query.size() != dim_) {
            throw Error(ErrorKind::invalid_argument, "query of dimension " + std::to_string(query.size()) +
                                                         " against an index of dimension " + std::to_string(dim_));
        }
        if (k == 0) throw Error(ErrorKind::invalid_argument, "K must be >= 1");
        const std::size_t n = keys_.size();
        const double qn = l2norm(query);
        threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n / 256))));

        using Scored = std::pair<double, std::size_t>;
        auto before = [&](const Scored& a, const Scored& b) {
            if (a.first != b.first) return a.first > b.first;
            return keys_[a.second] < keys_[b.second];
        };
        auto scan = [&](std::size_t begin, std::size_t end) {
            std::vector<Scored> local;
            for (std::size_t i = begin; i < end; ++i) {
                if (in_scope(i, scope)) local.emplace_back(cosine(query, qn, i), i);
            }
            const auto keep = std::min(k, local.size());
            std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(), before);
            local.resize(keep);
            return local;
        };

        std::vector<Scored> all;
        if (threads == 1) {
            all = scan(0, n);
        } else {
            std::vector<std::future<std::vector<Scored>>> parts;
            const std::size_t step = (n + threads - 1) / threads;
            for (std::size_t b = 0; b < n; b += step) {
                parts.push_back(std::async(std::launch::async, scan, b, std::min(n, b + step)));
            }
            for (auto& p : parts) {
                auto part = p.get();
                all.insert(all.end(), part.begin(), part.end());
            }
        }
        const auto keep = std::min(k, all.size());
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), before);
        std::vector<Hit> out;
        out.reserve(keep);
        for (std::size_t j = 0; j < keep; ++j) out.push_back({keys_[all[j].second], all[j].first});
        return out;
    }

    bool operator==(const VectorIndex& o) const {
        return dim_ == o.dim_ && keys_ == o.keys_ && gran_ == o.gran_ && data_ == o.data_;
    }

    void write(std::ostream& out) const {
        std::string blob;
        std::vector<std::array<std::uint32_t, 4>> offsets;
        for (const auto& k : keys_) {
            offsets.push_back({u32(blob.size()), u32(k.doc_id.size()), 0, 0});
            blob += k.doc_id;
            offsets.back()[2] = u32(blob.size());
            offsets.back()[3] = u32(k.node_id.size());
            blob += k.node_id;
        }
        out.write("FABLEVEC", 8);
        put<std::uint32_t>(out, kFormatVersion);
        put<std::uint32_t>(out, u32(dim_));
        put<std::uint64_t>(out, keys_.size());
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            for (auto v : offsets[i]) put<std::uint32_t>(out, v);
            put<std::uint8_t>(out, static_cast<std::uint8_t>(gran_[i]));
            out.write("\0\0\0", 3);
        }
        put<std::uint64_t>(out, blob.size());
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        std::vector<unsigned char> raw(data_.size() * 4);
        for (std::size_t j = 0; j < data_.size(); ++j) {
            const auto u = std::bit_cast<std::uint32_t>(data_[j]);
            for (int b = 0; b < 4; ++b) raw[4 * j + b] = static_cast<unsigned char>(u >> (8 * b));
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!out) throw Error(ErrorKind::io, "failed writing vector store");
    }

    static VectorIndex read(std::istream& in) {
        char magic[8];
        if (!in.read(magic, 8) || std::memcmp(magic, "FABLEVEC", 8) != 0) {
            throw Error(ErrorKind::malformed_file, "vector store: bad magic");
        }
        const auto version = get<std::uint32_t>(in);
        if (version != kFormatVersion) {
            throw Error(ErrorKind::version_mismatch, "vector store version " + std::to_string(version) +
                                                         ", expected " + std::to_string(kFormatVersion));
        }
        const auto dim = get<std::uint32_t>(in);
        const auto count = get<std::uint64_t>(in);
        if (dim == 0) throw Error(ErrorKind::malformed_file, "vector store: zero dimension");
        std::vector<std::array<std::uint32_t, 4>> offsets(count);
        std::vector<Granularity> gran(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            for (auto& v : offsets[i]) v = get<std::uint32_t>(in);
            const auto g = get<std::uint8_t>(in);
            if (g > 1) throw Error(ErrorKind::malformed_file, "vector store: bad granularity byte");
            gran[i] = static_cast<Granularity>(g);
            char pad[3];
            if (!in.read(pad, 3)) throw Error(ErrorKind::malformed_file, "vector store: truncated key table");
        }
        const auto blob_size = get<std::uint64_t>(in);
        std::string blob(blob_size, '\0');
        if (!in.read(blob.data(), static_cast<std::streamsize>(blob_size))) {
            throw Error(ErrorKind::malformed_file, "vector store: truncated string blob");
        }
        std::vector<unsigned char> raw(count * dim * 4);
        if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
            throw Error(ErrorKind::malformed_file, "vector store: truncated vectors");
        }
        VectorIndex index(dim);
        index.data_.resize(count * dim);
        for (std::size_t j = 0; j < index.data_.size(); ++j) {
            const auto* b = &raw[4 * j];
            index.data_[j] = std::bit_cast<float>(static_cast<std::uint32_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                                                                             (std::uint32_t(b[3]) << 24)));
        }
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto& o = offsets[i];
            if (std::uint64_t(o[0]) + o[1] > blob_size || std::uint64_t(o[2]) + o[3] > blob_size) {
                throw Error(ErrorKind::malformed_file, "vector store: key offset out of range");
            }
            NodeKey key{blob.substr(o[0], o[1]), blob.substr(o[2], o[3])};
            if (index.slot_.count(key)) throw Error(ErrorKind::malformed_file, "vector store: duplicate key");
            index.slot_.emplace(key, index.keys_.size());
            index.keys_.push_back(std::move(key));
            index.gran_.push_back(gran[i]);
            index.norms_.push_back(l2norm(index.vector(i)));
        }
        if (in.peek() != std::char_traits<char>::eof()) {
            throw Error(ErrorKind::malformed_file, "vector store: trailing bytes");
        }
        return index;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
        write(out);
    }

    static VectorIndex load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
        return read(in);
    }

private:
    double cosine(std::span<const float> query, double qn, std::size_t i) const {
        if (qn == 0.0) return 0.0;
        return dot(query, vector(i)) / (qn * norms_[i]);
    }

    static std::uint32_t u32(std::size_t v) {
        if (v > 0xffffffffULL) throw Error(ErrorKind::invalid_argument, "vector store field exceeds 32 bits");
        return static_cast<std::uint32_t>(v);
    }

    template <typename T>
    static void put(std::ostream& out, T v) {
        unsigned char b[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(b), sizeof(T));
    }

    template <typename T>
    static T get(std::istream& in) {
        unsigned char b[sizeof(T)];
        if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error(ErrorKind::malformed_file, "vector store: truncated");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return static_cast<T>(v);
    }

    std::size_t dim_;
    std::vector<NodeKey> keys_;
    std::vector<Granularity> gran_;
    std::vector<float> data_;
    std::vector<double> norms_;  // of the stored float vectors
    std::unordered_map<NodeKey, std::size_t, NodeKeyHash> slot_;
};

/// Distinct documents of `hits` ordered by their best hit, truncated to k_doc.
/// Expects hits in topk order.
inline std::vector<std::string> docs_of(const std::vector<Hit>& hits, std::size_t k_doc) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& h : hits) {
        if (out.size() >= k_doc) break;
        if (seen.insert(h.key.doc_id).second) out.push_back(h.key.doc_id);
    }
    return out;
}

}  // namespace fable
