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

// Forest persistence: UTF-8 JSON lines. The first record is
//   {"t":"meta","format_version":1,"config":{...},"prompt_bundle_version":"..."}
// followed, per document in doc_id order, by one "tree" header, its "chunk"
// records in document order and its "node" records in preorder.

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/error.hpp"
#include "fable/forest.hpp"

namespace fable {

inline nlohmann::json to_json(const RetrievalConfig& c) {
    nlohmann::json j;
    j["max_depth"] = c.max_depth;
    j["hierarchy_threshold"] = c.hierarchy_threshold;
    j["k_doc"] = c.k_doc;
    j["budget"] = c.budget;
    j["tokenizer"] = std::string(to_string(c.tokenizer.kind));
    if (c.tokenizer.kind == TokenizerKind::external) j["tokenizer_name"] = c.tokenizer.external_name;
    return j;
}

inline RetrievalConfig retrieval_config_from_json(const nlohmann::json& j) {
    RetrievalConfig c;
    c.max_depth = j.value("max_depth", c.max_depth);
    c.hierarchy_threshold = j.value("hierarchy_threshold", c.hierarchy_threshold);
    c.k_doc = j.value("k_doc", c.k_doc);
    c.budget = j.value("budget", c.budget);
    c.tokenizer.kind = parse_tokenizer_kind(j.value("tokenizer", std::string("approx_bytes")));
    c.tokenizer.external_name = j.value("tokenizer_name", std::string{});
    return c;
}

inline void write_forest(const Forest& forest, std::ostream& out) {
    const auto line = [&out](const nlohmann::json& j) { out << j.dump() << '\n'; };

    nlohmann::json meta;
    meta["t"] = "meta";
    meta["format_version"] = forest.meta().format_version;
    meta["config"] = to_json(forest.meta().config);
    meta["prompt_bundle_version"] = forest.meta().prompt_bundle_version;
    line(meta);

    for (const auto& [doc_id, doc] : forest.documents()) {
        const auto& tree = doc.tree;
        line({{"t", "tree"}, {"doc_id", doc_id}, {"root_id", tree.root_id()}, {"max_depth", tree.max_depth()}});
        for (const auto& c : doc.chunks) {
            line({{"t", "chunk"}, {"doc_id", doc_id}, {"chunk_id", c.chunk_id}, {"content", c.content}});
        }
        for (const auto& id : tree.preorder()) {
            const auto& n = tree.node(id);
            nlohmann::json j{{"t", "node"}, {"doc_id", doc_id}, {"node_id", n.node_id}, {"kind", to_string(n.kind)}};
            if (n.is_leaf()) {
                j["chunk_ref"] = n.chunk_ref;
            } else {
                j["title"] = n.title;
                j["summary"] = n.summary;
                j["children"] = n.children;
            }
            line(j);
        }
    }
}

inline Forest read_forest(std::istream& in) {
    struct Pending {
        bool has_header = false;
        std::string root_id;
        int max_depth = 0;
        std::vector<Chunk> chunks;
        std::vector<TreeNode> nodes;
    };

    std::map<std::string, Pending> pending;
    ForestMeta meta;
    bool saw_meta = false;
    std::string line;
    std::size_t lineno = 0;

    const auto malformed = [&lineno](const std::string& what) {
        return Error(ErrorKind::malformed_file, "line " + std::to_string(lineno) + ": " + what);
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw malformed(e.what());
        }
        try {
            if (!j.is_object() || !j.contains("t")) throw malformed("record without tag");
            const auto tag = j.at("t").get<std::string>();
            if (!saw_meta) {
                if (tag != "meta") throw malformed("first record must be meta");
                const int version = j.at("format_version").get<int>();
                if (version != kForestFormatVersion) {
                    throw Error(ErrorKind::version_mismatch, "forest format_version " + std::to_string(version) +
                                                                 " (supported: " +
                                                                 std::to_string(kForestFormatVersion) + ")");
                }
                meta.format_version = version;
                meta.config = retrieval_config_from_json(j.at("config"));
                meta.prompt_bundle_version = j.value("prompt_bundle_version", std::string{});
                saw_meta = true;
                continue;
            }
            const auto doc_id = j.at("doc_id").get<std::string>();
            auto& p = pending[doc_id];
            if (tag == "tree") {
                p.has_header = true;
                p.root_id = j.at("root_id").get<std::string>();
                p.max_depth = j.at("max_depth").get<int>();
            } else if (tag == "chunk") {
                p.chunks.push_back({j.at("chunk_id").get<std::string>(), j.at("content").get<std::string>(), doc_id});
            } else if (tag == "node") {
                TreeNode n;
                n.node_id = j.at("node_id").get<std::string>();
                const auto kind = parse_node_kind(j.at("kind").get<std::string>());
                if (!kind) throw malformed("unknown node kind");
                n.kind = *kind;
                if (n.is_leaf()) {
                    n.chunk_ref = j.at("chunk_ref").get<std::string>();
                } else {
                    n.title = j.at("title").get<std::string>();
                    n.summary = j.at("summary").get<std::string>();
                    n.children = j.at("children").get<std::vector<std::string>>();
                }
                p.nodes.push_back(std::move(n));
            } else {
                throw malformed("unknown record tag '" + tag + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw malformed(e.what());
        }
    }
    if (!saw_meta) throw Error(ErrorKind::malformed_file, "missing meta record");

    Forest forest(meta);
    for (auto& [doc_id, p] : pending) {
        if (!p.has_header) throw Error(ErrorKind::malformed_file, "document '" + doc_id + "' has no tree record");
        SemanticTree tree(doc_id, std::move(p.nodes), p.root_id, p.max_depth);
        forest.add(std::move(tree), std::move(p.chunks));
    }
    return forest;
}

inline void save_forest(const Forest& forest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    write_forest(forest, out);
    if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

inline Forest load_forest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    return read_forest(in);
}

}  // namespace fable
