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

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fable/error.hpp"
#include "fable/tokenizer.hpp"

namespace fable {

/// An original semantic text unit; the payload of exactly one leaf.
struct Chunk {
    std::string chunk_id;
    std::string content;
    std::string doc_id;

    bool operator==(const Chunk&) const = default;
};

enum class NodeKind { root, section, subsection, leaf };

inline std::string_view to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::root: return "root";
        case NodeKind::section: return "section";
        case NodeKind::subsection: return "subsection";
        case NodeKind::leaf: return "leaf";
    }
    return "leaf";
}

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
    if (s == "root") return NodeKind::root;
    if (s == "section") return NodeKind::section;
    if (s == "subsection") return NodeKind::subsection;
    if (s == "leaf") return NodeKind::leaf;
    return std::nullopt;
}

/// Kind an internal node must carry at the given depth (root has depth 1).
inline NodeKind internal_kind_for_depth(int depth) {
    if (depth <= 1) return NodeKind::root;
    if (depth == 2) return NodeKind::section;
    return NodeKind::subsection;
}

struct TreeNode {
    std::string node_id;
    NodeKind kind = NodeKind::leaf;
    std::string title;                  // internal only
    std::string summary;                // internal only
    std::string chunk_ref;              // leaf only
    std::vector<std::string> children;  // internal only, ordered

    bool is_leaf() const { return kind == NodeKind::leaf; }
    bool operator==(const TreeNode&) const = default;
};

/// Forest-wide node identity.
struct NodeKey {
    std::string doc_id;
    std::string node_id;

    auto operator<=>(const NodeKey&) const = default;
    bool operator==(const NodeKey&) const = default;
};

struct NodeKeyHash {
    std::size_t operator()(const NodeKey& k) const noexcept {
        const auto h1 = std::hash<std::string>{}(k.doc_id);
        const auto h2 = std::hash<std::string>{}(k.node_id);
        return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
    }
};

struct RetrievalConfig {
    int max_depth = 4;            // D
    int hierarchy_threshold = 2;  // L
    std::size_t k_doc = 5;
    std::size_t budget = 8192;    // B_max, tokens
    TokenizerSpec tokenizer{};

    void validate() const {
        if (max_depth < 2) throw Error(ErrorKind::configuration, "max_depth must be >= 2");
        if (hierarchy_threshold < 1 || hierarchy_threshold > max_depth) {
            throw Error(ErrorKind::configuration, "hierarchy_threshold must lie in [1, max_depth]");
        }
        if (k_doc < 1) throw Error(ErrorKind::configuration, "k_doc must be >= 1");
        if (budget < 1) throw Error(ErrorKind::configuration, "budget must be >= 1");
    }

    bool operator==(const RetrievalConfig&) const = default;
};

/// One document's hierarchy. Immutable once constructed; the constructor
/// checks every structural invariant that does not need the chunk texts and
/// precomputes parent links, depths and leaf spans.
class SemanticTree {
public:
    SemanticTree() = default;

    SemanticTree(std::string doc_id, std::vector<TreeNode> nodes, std::string root_id, int max_depth)
        : doc_id_(std::move(doc_id)), root_id_(std::move(root_id)), max_depth_(max_depth) {
        for (auto& n : nodes) {
            if (n.node_id.empty()) violation("empty node_id");
            if (nodes_.count(n.node_id)) violation("duplicate node_id '" + n.node_id + "'");
            auto id = n.node_id;
            nodes_.emplace(std::move(id), std::move(n));
        }
        index();
    }

    const std::string& doc_id() const { return doc_id_; }
    const std::string& root_id() const { return root_id_; }
    int max_depth() const { return max_depth_; }
    std::size_t size() const { return nodes_.size(); }
    const std::map<std::string, TreeNode>& nodes() const { return nodes_; }
    bool contains(std::string_view id) const { return info_.count(std::string(id)) != 0; }

    const TreeNode& node(std::string_view id) const { return nodes_.at(std::string(require(id).id)); }

    /// Nodes on the root->node path, root inclusive.
    int depth(std::string_view id) const { return require(id).depth; }

    std::optional<std::string> parent(std::string_view id) const {
        const auto& info = require(id);
        if (info.parent.empty()) return std::nullopt;
        return info.parent;
    }

    /// Titles of the internal nodes from the root down to and including id.
    std::vector<std::string> toc_path(std::string_view id) const {
        const auto& n = node(id);
        if (n.is_leaf()) {
            throw Error(ErrorKind::invalid_argument, "toc_path of leaf '" + n.node_id + "'");
        }
        std::vector<std::string> titles;
        for (const auto& a : ancestors(id)) titles.push_back(nodes_.at(a).title);
        titles.push_back(n.title);
        return titles;
    }

    /// Strict ancestors ordered root -> parent.
    std::vector<std::string> ancestors(std::string_view id) const {
        std::vector<std::string> out;
        auto cur = require(id).parent;
        while (!cur.empty()) {
            out.push_back(cur);
            cur = info_.at(cur).parent;
        }
        return {out.rbegin(), out.rend()};
    }

    std::set<std::string> descendants(std::string_view id) const {
        std::set<std::string> out;
        std::vector<std::string> stack(node(id).children);
        while (!stack.empty()) {
            auto cur = std::move(stack.back());
            stack.pop_back();
            const auto& n = nodes_.at(cur);
            stack.insert(stack.end(), n.children.begin(), n.children.end());
            out.insert(std::move(cur));
        }
        return out;
    }

    /// True when a is a strict ancestor of b.
    bool is_ancestor(std::string_view a, std::string_view b) const {
        const auto& ia = require(a);
        const auto& ib = require(b);
        return ia.depth < ib.depth && ia.leaf_begin <= ib.leaf_begin && ib.leaf_end <= ia.leaf_end;
    }

    /// Half-open range of leaf positions (document order) covered by id.
    std::pair<std::size_t, std::size_t> leaf_span(std::string_view id) const {
        const auto& info = require(id);
        return {info.leaf_begin, info.leaf_end};
    }

    const std::vector<std::string>& preorder() const { return preorder_; }
    const std::vector<std::string>& leaves() const { return leaves_; }

    std::vector<std::string> chunk_refs() const {
        std::vector<std::string> out;
        out.reserve(leaves_.size());
        for (const auto& l : leaves_) out.push_back(nodes_.at(l).chunk_ref);
        return out;
    }

    int height() const { return height_; }

    bool operator==(const SemanticTree& other) const {
        return doc_id_ == other.doc_id_ && root_id_ == other.root_id_ && max_depth_ == other.max_depth_ &&
               nodes_ == other.nodes_;
    }

private:
    struct Info {
        std::string id;
        std::string parent;
        int depth = 0;
        std::size_t leaf_begin = 0;
        std::size_t leaf_end = 0;
    };

    [[noreturn]] void violation(const std::string& what) const {
        throw Error(ErrorKind::invariant_violation, "tree '" + doc_id_ + "': " + what);
    }

    const Info& require(std::string_view id) const {
        auto it = info_.find(std::string(id));
        if (it == info_.end()) {
            throw Error(ErrorKind::not_found, "node '" + std::string(id) + "' in tree '" + doc_id_ + "'");
        }
        return it->second;
    }

    void index() {
        if (max_depth_ < 1) violation("max_depth must be positive");
        auto root_it = nodes_.find(root_id_);
        if (root_it == nodes_.end()) violation("root '" + root_id_ + "' missing");
        if (root_it->second.kind != NodeKind::root) violation("root node has kind " + std::string(to_string(root_it->second.kind)));

        std::unordered_set<std::string> refs;
        visit(root_id_, std::string{}, 1, refs);
        if (info_.size() != nodes_.size()) violation("unreachable nodes present");
    }

    void visit(const std::string& id, const std::string& parent, int depth, std::unordered_set<std::string>& refs) {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) violation("child '" + id + "' does not exist");
        if (info_.count(id)) violation("node '" + id + "' has more than one parent or lies on a cycle");
        const auto& n = it->second;
        if (depth > max_depth_) violation("node '" + id + "' exceeds max depth " + std::to_string(max_depth_));
        height_ = std::max(height_, depth);

        Info info{id, parent, depth, leaves_.size(), leaves_.size()};
        info_.emplace(id, info);
        preorder_.push_back(id);

        if (n.is_leaf()) {
            if (depth == 1) violation("root cannot be a leaf");
            if (n.chunk_ref.empty()) violation("leaf '" + id + "' has no chunk_ref");
            if (!n.children.empty()) violation("leaf '" + id + "' has children");
            if (!n.title.empty() || !n.summary.empty()) violation("leaf '" + id + "' carries title/summary");
            if (!refs.insert(n.chunk_ref).second) violation("chunk '" + n.chunk_ref + "' referenced twice");
            leaves_.push_back(id);
        } else {
            if (n.kind != internal_kind_for_depth(depth)) {
                violation("node '" + id + "' of kind " + std::string(to_string(n.kind)) + " at depth " +
                          std::to_string(depth));
            }
            if (!n.chunk_ref.empty()) violation("internal node '" + id + "' has a chunk_ref");
            if (n.children.empty()) violation("internal node '" + id + "' has no children");
            if (n.title.empty()) violation("internal node '" + id + "' has no title");
            if (n.summary.empty()) violation("internal node '" + id + "' has no summary");
            for (const auto& c : n.children) visit(c, id, depth + 1, refs);
        }
        info_.at(id).leaf_end = leaves_.size();
    }

    std::string doc_id_;
    std::map<std::string, TreeNode> nodes_;
    std::string root_id_;
    int max_depth_ = 0;
    int height_ = 0;
    std::unordered_map<std::string, Info> info_;
    std::vector<std::string> preorder_;
    std::vector<std::string> leaves_;
};

inline constexpr int kForestFormatVersion = 1;

/// Provenance recorded alongside a built forest.
struct ForestMeta {
    int format_version = kForestFormatVersion;
    RetrievalConfig config{};
    std::string prompt_bundle_version;

    bool operator==(const ForestMeta&) const = default;
};

/// One tree per document plus the chunk texts the leaves point at.
class Forest {
public:
    struct Document {
        SemanticTree tree;
        std::vector<Chunk> chunks;  // document order
        std::unordered_map<std::string, std::size_t> position;

        bool operator==(const Document& o) const { return tree == o.tree && chunks == o.chunks; }
    };

    Forest() = default;
    explicit Forest(ForestMeta meta) : meta_(std::move(meta)) {}

    /// Adds a document; its leaves must reference exactly `chunks`, in order.
    void add(SemanticTree tree, std::vector<Chunk> chunks) {
        const std::string doc_id = tree.doc_id();
        if (docs_.count(doc_id)) throw Error(ErrorKind::invalid_argument, "duplicate document '" + doc_id + "'");
        if (chunks.empty()) throw Error(ErrorKind::invariant_violation, "document '" + doc_id + "' has no chunks");

        Document doc;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            const auto& c = chunks[i];
            if (c.doc_id != doc_id) {
                throw Error(ErrorKind::invariant_violation, "chunk '" + c.chunk_id + "' belongs to '" + c.doc_id +
                                                                "', not '" + doc_id + "'");
            }
            if (c.content.empty()) throw Error(ErrorKind::invariant_violation, "chunk '" + c.chunk_id + "' is empty");
            if (!doc.position.emplace(c.chunk_id, i).second) {
                throw Error(ErrorKind::invariant_violation, "duplicate chunk_id '" + c.chunk_id + "' in '" + doc_id + "'");
            }
        }
        const auto refs = tree.chunk_refs();
        for (const auto& r : refs) {
            if (!doc.position.count(r)) {
                throw Error(ErrorKind::invariant_violation, "dangling chunk_ref '" + r + "' in '" + doc_id + "'");
            }
        }
        if (refs.size() != chunks.size()) {
            throw Error(ErrorKind::invariant_violation, "document '" + doc_id + "' has chunks without leaves");
        }
        for (std::size_t i = 0; i < refs.size(); ++i) {
            if (refs[i] != chunks[i].chunk_id) {
                throw Error(ErrorKind::invariant_violation, "leaf order of '" + doc_id + "' differs from chunk order");
            }
        }
        doc.tree = std::move(tree);
        doc.chunks = std::move(chunks);
        docs_.emplace(doc_id, std::move(doc));
    }

    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }
    bool contains(std::string_view doc_id) const { return docs_.count(std::string(doc_id)) != 0; }

    const std::map<std::string, Document>& documents() const { return docs_; }

    std::vector<std::string> doc_ids() const {
        std::vector<std::string> ids;
        ids.reserve(docs_.size());
        for (const auto& [id, _] : docs_) ids.push_back(id);
        return ids;
    }

    const Document& document(std::string_view doc_id) const {
        auto it = docs_.find(std::string(doc_id));
        if (it == docs_.end()) throw Error(ErrorKind::not_found, "document '" + std::string(doc_id) + "'");
        return it->second;
    }

    const SemanticTree& tree(std::string_view doc_id) const { return document(doc_id).tree; }
    const std::vector<Chunk>& chunks(std::string_view doc_id) const { return document(doc_id).chunks; }

    std::size_t chunk_position(std::string_view doc_id, std::string_view chunk_id) const {
        const auto& doc = document(doc_id);
        auto it = doc.position.find(std::string(chunk_id));
        if (it == doc.position.end()) {
            throw Error(ErrorKind::not_found, "chunk '" + std::string(chunk_id) + "' in '" + std::string(doc_id) + "'");
        }
        return it->second;
    }

    const Chunk& chunk(std::string_view doc_id, std::string_view chunk_id) const {
        return document(doc_id).chunks[chunk_position(doc_id, chunk_id)];
    }

    /// Leaf chunks under node, in document order. Subtrees cover contiguous
    /// leaf ranges, so this is a view into the document's chunk list.
    std::span<const Chunk> subtree_chunks(std::string_view doc_id, std::string_view node_id) const {
        const auto& doc = document(doc_id);
        const auto [b, e] = doc.tree.leaf_span(node_id);
        return std::span<const Chunk>(doc.chunks).subspan(b, e - b);
    }

    std::span<const Chunk> subtree_chunks(const NodeKey& key) const { return subtree_chunks(key.doc_id, key.node_id); }

    const ForestMeta& meta() const { return meta_; }
    void set_meta(ForestMeta meta) { meta_ = std::move(meta); }

    bool operator==(const Forest& o) const { return meta_ == o.meta_ && docs_ == o.docs_; }

private:
    ForestMeta meta_{};
    std::map<std::string, Document> docs_;
};

}  // namespace fable
