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

// Corpus -> forest + vector store. An index directory holds
//
//   forest.jsonl   trees and chunks (see forest_io.hpp)
//   vectors.fvec   node embeddings (see vector_index.hpp)
//   meta.json      build settings and corpus statistics
//
// Nothing time- or host-dependent is written, so rebuilding the same corpus
// with the same settings reproduces the files byte for byte.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/config.hpp"
#include "fable/embedder.hpp"
#include "fable/forest.hpp"
#include "fable/forest_io.hpp"
#include "fable/segmenter.hpp"
#include "fable/tree_builder.hpp"
#include "fable/vector_index.hpp"

namespace fable {

struct SourceDocument {
    std::string doc_id;
    std::string text;
};

/// .txt and .md files directly under dir (sorted by name); the doc_id is the
/// file name without extension.
inline std::vector<SourceDocument> read_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error(ErrorKind::io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".txt" || ext == ".md")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<SourceDocument> out;
    std::set<std::string> ids;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw Error(ErrorKind::io, "cannot read " + f.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        auto id = f.stem().string();
        if (!ids.insert(id).second) throw Error(ErrorKind::invalid_input, "two files map to document id '" + id + "'");
        out.push_back({std::move(id), ss.str()});
    }
    return out;
}

struct DocStats {
    std::string doc_id;
    int height = 0;
    std::size_t internal_nodes = 0;
    std::size_t leaves = 0;
    std::size_t tokens = 0;
    RepairReport repairs;
};

struct DocFailure {
    std::string doc_id;
    std::string error;
};

struct BuiltIndex {
    Forest forest;
    VectorIndex index{1};
    std::vector<DocStats> stats;
    std::vector<DocFailure> failures;
    std::vector<std::string> warnings;
};

namespace detail {

struct DocBuild {
    std::optional<SemanticTree> tree;
    std::vector<Chunk> chunks;
    std::vector<NodeEmbedding> embeddings;
    DocStats stats;
    std::optional<DocFailure> failure;
    std::vector<std::string> warnings;
};

inline DocBuild build_document(const SourceDocument& src, const FableConfig& cfg, Gateway& gateway,
                               const Embedder& embedder, const Tokenizer& tok) {
    DocBuild b;
    b.stats.doc_id = src.doc_id;
    try {
        b.chunks = segment(src.text, src.doc_id, cfg.segmenter, tok, &gateway, &b.warnings);
        TreeBuilder builder(gateway, tok, cfg.retrieval.max_depth);
        auto tree = builder.build(b.chunks, &b.stats.repairs);
        if (!b.stats.repairs.clean()) b.warnings.push_back("document '" + src.doc_id + "' needed outline repairs");
        std::unordered_map<std::string, const Chunk*> by_id;
        for (const auto& c : b.chunks) by_id.emplace(c.chunk_id, &c);
        for (const auto& id : tree.preorder()) {
            const auto& n = tree.node(id);
            if (n.is_leaf()) {
                b.embeddings.push_back({{src.doc_id, id}, embedder.embed(by_id.at(n.chunk_ref)->content), Granularity::leaf});
                ++b.stats.leaves;
            } else {
                b.embeddings.push_back({{src.doc_id, id}, embedder.embed(internal_embedding_text(tree, id)),
                                        Granularity::internal});
                ++b.stats.internal_nodes;
            }
        }
        b.stats.height = tree.height();
        for (const auto& c : b.chunks) b.stats.tokens += tok.count(c.content);
        b.tree.emplace(std::move(tree));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::configuration) throw;
        b.failure = DocFailure{src.doc_id, e.what()};
    }
    return b;
}

}  // namespace detail

/// Segments, structures and embeds every document (in parallel, `threads`
/// workers), then assembles the forest and index in input order. Failed
/// documents are reported in `failures` and left out.
inline BuiltIndex build_index(const std::vector<SourceDocument>& docs, const FableConfig& cfg, Gateway& gateway,
                              const Embedder& embedder) {
    cfg.retrieval.validate();
    const Tokenizer tok(cfg.retrieval.tokenizer);
    std::vector<detail::DocBuild> built(docs.size());
    std::atomic<std::size_t> next{0};
    std::mutex fatal_mu;
    std::exception_ptr fatal;
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < docs.size(); i = next.fetch_add(1)) {
            try {
                built[i] = detail::build_document(docs[i], cfg, gateway, embedder, tok);
            } catch (...) {
                std::lock_guard lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };
    const auto n = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(std::max<std::size_t>(1, docs.size()))));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (fatal) std::rethrow_exception(fatal);

    BuiltIndex out{Forest(ForestMeta{kForestFormatVersion, cfg.retrieval, cfg.gateway.prompt_bundle_version}),
                   VectorIndex(embedder.dimension()), {}, {}, {}};
    for (auto& b : built) {
        out.warnings.insert(out.warnings.end(), b.warnings.begin(), b.warnings.end());
        if (b.failure) {
            out.failures.push_back(*b.failure);
            continue;
        }
        out.forest.add(std::move(*b.tree), std::move(b.chunks));
        for (const auto& e : b.embeddings) out.index.add(e);
        out.stats.push_back(b.stats);
    }
    return out;
}

inline nlohmann::json index_meta(const BuiltIndex& built, const FableConfig& cfg) {
    std::size_t chunks = 0, nodes = 0, tokens = 0;
    for (const auto& s : built.stats) {
        chunks += s.leaves;
        nodes += s.internal_nodes + s.leaves;
        tokens += s.tokens;
    }
    return {
        {"format_version", kForestFormatVersion},
        {"vector_format_version", VectorIndex::kFormatVersion},
        {"config", to_json(cfg.retrieval)},
        {"prompt_bundle_version", cfg.gateway.prompt_bundle_version},
        {"embedder",
         {{"backend", to_string(cfg.embedder.backend)},
          {"dimension", cfg.embedder.dimension},
          {"seed", cfg.embedder.seed},
          {"model", cfg.embedder.model}}},
        {"segmenter",
         {{"backend", to_string(cfg.segmenter.backend)},
          {"target_tokens", cfg.segmenter.target_chunk_tokens},
          {"max_tokens", cfg.segmenter.max_chunk_tokens}}},
        {"documents", built.forest.size()},
        {"chunks", chunks},
        {"nodes", nodes},
        {"corpus_tokens", tokens},
    };
}

inline void write_index(const std::filesystem::path& dir, const BuiltIndex& built, const FableConfig& cfg) {
    std::filesystem::create_directories(dir);
    save_forest(built.forest, dir / "forest.jsonl");
    built.index.save(dir / "vectors.fvec");
    std::ofstream meta(dir / "meta.json", std::ios::binary);
    if (!meta) throw Error(ErrorKind::io, "cannot write " + (dir / "meta.json").string());
    meta << index_meta(built, cfg).dump(2) << "\n";
}

struct LoadedIndex {
    Forest forest;
    VectorIndex index{1};
    nlohmann::json meta;
};

inline LoadedIndex read_index(const std::filesystem::path& dir) {
    LoadedIndex out{load_forest(dir / "forest.jsonl"), VectorIndex::load(dir / "vectors.fvec"), {}};
    std::ifstream meta(dir / "meta.json");
    if (!meta) throw Error(ErrorKind::io, "cannot read " + (dir / "meta.json").string());
    out.meta = nlohmann::json::parse(meta, nullptr, false);
    if (out.meta.is_discarded()) throw Error(ErrorKind::malformed_file, "meta.json is not valid JSON");
    return out;
}

/// Restores the build-time embedder, retrieval and segmenter settings into cfg.
inline void apply_index_meta(FableConfig& cfg, const nlohmann::json& meta) {
    cfg.retrieval = retrieval_config_from_json(meta.at("config"));
    const auto& e = meta.at("embedder");
    cfg.embedder.backend = parse_embedder_backend(e.at("backend").get<std::string>());
    cfg.embedder.dimension = e.at("dimension").get<std::size_t>();
    cfg.embedder.seed = e.at("seed").get<std::uint64_t>();
    cfg.embedder.model = e.value("model", std::string{});
}

}  // namespace fable
