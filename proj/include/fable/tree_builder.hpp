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

#include <algorithm>
#include <cstdio>
#include <functional>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/error.hpp"
#include "fable/forest.hpp"
#include "fable/gateway.hpp"
#include "fable/text.hpp"
#include "fable/tokenizer.hpp"

namespace fable {

/// Candidate hierarchy as proposed by a structuring backend, before repair.
struct OutlineNode {
    std::string title;
    std::string summary;
    std::optional<std::string> chunk;  // set on leaves
    std::vector<OutlineNode> children;

    bool is_leaf() const { return chunk.has_value(); }
    bool operator==(const OutlineNode&) const = default;
};

inline OutlineNode parse_outline(const nlohmann::json& j) {
    if (auto err = schema::validate_outline(j)) throw Error(ErrorKind::structuring_failure, *err);
    OutlineNode n;
    if (j.contains("chunk")) {
        n.chunk = j.at("chunk").get<std::string>();
        return n;
    }
    n.title = j.at("title").get<std::string>();
    n.summary = j.value("summary", std::string{});
    for (const auto& c : j.at("children")) n.children.push_back(parse_outline(c));
    return n;
}

inline nlohmann::json to_json(const OutlineNode& n) {
    if (n.is_leaf()) return {{"chunk", *n.chunk}};
    nlohmann::json children = nlohmann::json::array();
    for (const auto& c : n.children) children.push_back(to_json(c));
    return {{"title", n.title}, {"summary", n.summary}, {"children", std::move(children)}};
}

/// Outline of an existing tree (used when re-nesting partial trees).
inline OutlineNode to_outline(const SemanticTree& tree, const std::string& id) {
    const auto& n = tree.node(id);
    OutlineNode o;
    if (n.is_leaf()) {
        o.chunk = n.chunk_ref;
        return o;
    }
    o.title = n.title;
    o.summary = n.summary;
    for (const auto& c : n.children) o.children.push_back(to_outline(tree, c));
    return o;
}

struct RepairReport {
    std::size_t dropped_unknown = 0;
    std::size_t added_missing = 0;
    std::size_t flattened = 0;
    std::size_t deduplicated = 0;
    std::size_t pruned_empty = 0;

    bool clean() const { return dropped_unknown + added_missing + flattened + deduplicated + pruned_empty == 0; }
};

namespace detail {

inline void drop_unknown(OutlineNode& n, const std::unordered_map<std::string, std::size_t>& known, RepairReport& r) {
    auto& ch = n.children;
    const auto before = ch.size();
    ch.erase(std::remove_if(ch.begin(), ch.end(),
                            [&](const OutlineNode& c) { return c.is_leaf() && !known.count(*c.chunk); }),
             ch.end());
    r.dropped_unknown += before - ch.size();
    for (auto& c : ch) {
        if (!c.is_leaf()) drop_unknown(c, known, r);
    }
}

inline void collect_refs(const OutlineNode& n, std::unordered_set<std::string>& out) {
    if (n.is_leaf()) {
        out.insert(*n.chunk);
        return;
    }
    for (const auto& c : n.children) collect_refs(c, out);
}

/// First (preorder) occurrence of a leaf for chunk_id: parent and index.
inline std::optional<std::pair<OutlineNode*, std::size_t>> find_leaf(OutlineNode& n, const std::string& chunk_id) {
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        auto& c = n.children[i];
        if (c.is_leaf()) {
            if (*c.chunk == chunk_id) return std::make_pair(&n, i);
        } else if (auto hit = find_leaf(c, chunk_id)) {
            return hit;
        }
    }
    return std::nullopt;
}

inline void add_missing(OutlineNode& root, std::span<const Chunk> chunks, RepairReport& r) {
    std::unordered_set<std::string> present;
    collect_refs(root, present);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const auto& id = chunks[i].chunk_id;
        if (present.count(id)) continue;
        OutlineNode leaf;
        leaf.chunk = id;
        bool placed = false;
        for (std::size_t j = i; j-- > 0 && !placed;) {
            if (!present.count(chunks[j].chunk_id)) continue;
            if (auto hit = find_leaf(root, chunks[j].chunk_id)) {
                auto& [parent, idx] = *hit;
                parent->children.insert(parent->children.begin() + static_cast<std::ptrdiff_t>(idx + 1), leaf);
                placed = true;
            }
        }
        for (std::size_t j = i + 1; j < chunks.size() && !placed; ++j) {
            if (!present.count(chunks[j].chunk_id)) continue;
            if (auto hit = find_leaf(root, chunks[j].chunk_id)) {
                auto& [parent, idx] = *hit;
                parent->children.insert(parent->children.begin() + static_cast<std::ptrdiff_t>(idx), leaf);
                placed = true;
            }
        }
        if (!placed) root.children.push_back(leaf);
        present.insert(id);
        ++r.added_missing;
    }
}

inline void collect_leaves(OutlineNode& n, std::vector<OutlineNode>& out, RepairReport& r) {
    for (auto& c : n.children) {
        if (c.is_leaf()) {
            out.push_back(std::move(c));
        } else {
            ++r.flattened;
            collect_leaves(c, out, r);
        }
    }
}

/// Internal nodes may live at depth <= max_depth - 1; below that, internal
/// children are spliced away so their leaves attach to the deepest allowed
/// internal ancestor.
inline void flatten(OutlineNode& n, int depth, int max_depth, RepairReport& r) {
    if (depth >= max_depth - 1) {
        std::vector<OutlineNode> leaves;
        for (auto& c : n.children) {
            if (c.is_leaf()) {
                leaves.push_back(std::move(c));
            } else {
                ++r.flattened;
                collect_leaves(c, leaves, r);
            }
        }
        n.children = std::move(leaves);
        return;
    }
    for (auto& c : n.children) {
        if (!c.is_leaf()) flatten(c, depth + 1, max_depth, r);
    }
}

inline void leaf_positions(const OutlineNode& n, const std::unordered_map<std::string, std::size_t>& known,
                           std::vector<std::size_t>& out) {
    for (const auto& c : n.children) {
        if (c.is_leaf()) {
            out.push_back(known.at(*c.chunk));
        } else {
            leaf_positions(c, known, out);
        }
    }
}

/// Marks one longest strictly increasing subsequence of seq.
inline std::vector<bool> increasing_run(const std::vector<std::size_t>& seq) {
    std::vector<std::size_t> tails;  // index into seq of the smallest tail per length
    std::vector<std::ptrdiff_t> prev(seq.size(), -1);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto it = std::lower_bound(tails.begin(), tails.end(), seq[i],
                                         [&](std::size_t t, std::size_t v) { return seq[t] < v; });
        if (it != tails.begin()) prev[i] = static_cast<std::ptrdiff_t>(*(it - 1));
        if (it == tails.end()) {
            tails.push_back(i);
        } else {
            *it = i;
        }
    }
    std::vector<bool> on(seq.size(), false);
    for (auto i = tails.empty() ? -1 : static_cast<std::ptrdiff_t>(tails.back()); i >= 0; i = prev[i]) on[i] = true;
    return on;
}

inline void drop_repeats(OutlineNode& n, const std::vector<std::size_t>& keeper, std::size_t& occurrence,
                         std::unordered_set<std::string>& seen, RepairReport& r) {
    std::vector<OutlineNode> kept;
    kept.reserve(n.children.size());
    for (auto& c : n.children) {
        if (c.is_leaf()) {
            const auto mine = occurrence++;
            if (keeper[mine] != mine || !seen.insert(*c.chunk).second) {
                ++r.deduplicated;
                continue;
            }
        } else {
            drop_repeats(c, keeper, occurrence, seen, r);
        }
        kept.push_back(std::move(c));
    }
    n.children = std::move(kept);
}

/// Keeps one leaf per chunk: the occurrence that sits on a longest run of
/// increasing chunk positions when there is one, the first otherwise.
inline void dedup(OutlineNode& root, const std::unordered_map<std::string, std::size_t>& known, RepairReport& r) {
    std::vector<std::size_t> seq;
    leaf_positions(root, known, seq);
    const auto on = increasing_run(seq);
    std::unordered_map<std::size_t, std::size_t> chosen;  // chunk position -> occurrence
    for (std::size_t i = 0; i < seq.size(); ++i) {
        auto [it, fresh] = chosen.emplace(seq[i], i);
        if (!fresh && on[i] && !on[it->second]) it->second = i;
    }
    std::vector<std::size_t> keeper(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) keeper[i] = chosen.at(seq[i]);
    std::size_t occurrence = 0;
    std::unordered_set<std::string> seen;
    drop_repeats(root, keeper, occurrence, seen, r);
}

inline void prune_empty(OutlineNode& n, RepairReport& r) {
    for (auto& c : n.children) {
        if (!c.is_leaf()) prune_empty(c, r);
    }
    auto& ch = n.children;
    const auto before = ch.size();
    ch.erase(std::remove_if(ch.begin(), ch.end(), [](const OutlineNode& c) { return !c.is_leaf() && c.children.empty(); }),
             ch.end());
    r.pruned_empty += before - ch.size();
}

inline void leaf_order(const OutlineNode& n, std::vector<std::string>& out) {
    for (const auto& c : n.children) {
        if (c.is_leaf()) {
            out.push_back(*c.chunk);
        } else {
            leaf_order(c, out);
        }
    }
}

inline std::string first_words(std::string_view s, std::size_t n) {
    auto words = text::lead_sentence(s, n);
    while (!words.empty() && (words.back() == '.' || words.back() == ',' || words.back() == ':')) words.pop_back();
    return words;
}

/// Fills missing titles/summaries bottom-up from the leaves' lead sentences.
inline void fill_text(OutlineNode& n, const std::unordered_map<std::string, const Chunk*>& by_id) {
    std::vector<std::string> parts;
    for (auto& c : n.children) {
        if (c.is_leaf()) {
            parts.push_back(text::lead_sentence(by_id.at(*c.chunk)->content));
        } else {
            fill_text(c, by_id);
            parts.push_back(c.summary);
        }
    }
    if (text::is_blank(n.summary)) n.summary = text::join(parts, " ");
    if (text::is_blank(n.summary)) n.summary = "(no summary)";
    if (text::is_blank(n.title)) {
        n.title = parts.empty() ? std::string("Untitled") : first_words(parts.front(), 6);
        if (text::is_blank(n.title)) n.title = "Untitled";
    }
}

inline void emit(const OutlineNode& n, int depth, std::vector<TreeNode>& out) {
    char id[32];
    std::snprintf(id, sizeof(id), "n%04zu", out.size());
    TreeNode t;
    t.node_id = id;
    const auto self = out.size();
    if (n.is_leaf()) {
        t.kind = NodeKind::leaf;
        t.chunk_ref = *n.chunk;
        out.push_back(std::move(t));
        return;
    }
    t.kind = internal_kind_for_depth(depth);
    t.title = n.title;
    t.summary = n.summary;
    out.push_back(std::move(t));
    for (const auto& c : n.children) {
        std::snprintf(id, sizeof(id), "n%04zu", out.size());
        out[self].children.emplace_back(id);
        emit(c, depth + 1, out);
    }
}

}  // namespace detail

/// Turns a candidate outline into a valid tree over `chunks`. Repairs run in
/// this order: drop unknown chunk references, re-attach missing chunks after
/// their nearest preceding chunk, flatten internal levels beyond max_depth,
/// drop repeated chunk references (keeping the copy that fits
/// document order). Internal nodes left empty are
/// pruned and blank titles/summaries are filled extractively. Node ids are
/// issued in preorder (n0000 is the root).
inline SemanticTree validate_and_repair(OutlineNode candidate, std::span<const Chunk> chunks, const std::string& doc_id,
                                        int max_depth, RepairReport* report = nullptr) {
    if (max_depth < 2) throw Error(ErrorKind::configuration, "max_depth must be >= 2");
    if (chunks.empty()) throw Error(ErrorKind::invalid_input, "document '" + doc_id + "' has no chunks");
    if (candidate.is_leaf()) throw Error(ErrorKind::structuring_failure, "outline of '" + doc_id + "' has no internal node");

    RepairReport local;
    auto& r = report ? *report : local;
    r = {};

    std::unordered_map<std::string, std::size_t> known;
    std::unordered_map<std::string, const Chunk*> by_id;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        known.emplace(chunks[i].chunk_id, i);
        by_id.emplace(chunks[i].chunk_id, &chunks[i]);
    }

    detail::drop_unknown(candidate, known, r);
    detail::add_missing(candidate, chunks, r);
    detail::flatten(candidate, 1, max_depth, r);
    detail::dedup(candidate, known, r);
    detail::prune_empty(candidate, r);
    if (candidate.children.empty()) {
        throw Error(ErrorKind::structuring_failure, "outline of '" + doc_id + "' is empty after repair");
    }

    std::vector<std::string> order;
    detail::leaf_order(candidate, order);
    bool in_order = order.size() == chunks.size();
    for (std::size_t i = 0; in_order && i < order.size(); ++i) in_order = order[i] == chunks[i].chunk_id;
    if (!in_order) {
        throw Error(ErrorKind::structuring_failure, "outline of '" + doc_id + "' reorders chunks");
    }

    detail::fill_text(candidate, by_id);
    std::vector<TreeNode> nodes;
    detail::emit(candidate, 1, nodes);
    const auto root_id = nodes.front().node_id;
    return SemanticTree(doc_id, std::move(nodes), root_id, max_depth);
}

/// Builds document trees through the gateway's structure role.
class TreeBuilder {
public:
    TreeBuilder(Gateway& gateway, Tokenizer tokenizer, int max_depth)
        : gateway_(gateway), tokenizer_(std::move(tokenizer)), max_depth_(max_depth) {
        if (max_depth_ < 2) throw Error(ErrorKind::configuration, "max_depth must be >= 2");
    }

    int max_depth() const { return max_depth_; }

    /// One structuring call over the whole chunk sequence, then repair.
    SemanticTree build_tree(std::span<const Chunk> chunks, RepairReport* report = nullptr) const {
        const auto doc_id = check_chunks(chunks);
        nlohmann::json list = nlohmann::json::array();
        for (const auto& c : chunks) list.push_back({{"chunk_id", c.chunk_id}, {"content", c.content}});
        nlohmann::json payload{{"task", "outline"}, {"doc_id", doc_id}, {"max_depth", max_depth_}, {"chunks", std::move(list)}};

        OutlineNode outline;
        try {
            outline = parse_outline(gateway_.call(Role::structure, payload));
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::structuring_failure) throw;
            throw Error(ErrorKind::structuring_failure, "structuring '" + doc_id + "': " + e.what());
        }
        return validate_and_repair(std::move(outline), chunks, doc_id, max_depth_, report);
    }

    /// Joins consecutive partial trees of one document: partial roots are
    /// dissolved, their children become the new root's children in part
    /// order, and the root's title/summary are regenerated from those
    /// children's summaries.
    SemanticTree merge_trees(std::span<const SemanticTree> partials, std::span<const Chunk> chunks) const {
        if (partials.empty()) throw Error(ErrorKind::invalid_input, "merge_trees needs at least one partial tree");
        const auto& doc_id = partials.front().doc_id();
        std::unordered_set<std::string> seen;
        std::unordered_map<std::string, const Chunk*> by_id;
        for (const auto& c : chunks) by_id.emplace(c.chunk_id, &c);

        OutlineNode root;
        nlohmann::json children = nlohmann::json::array();
        nlohmann::json part_titles = nlohmann::json::array();
        for (const auto& t : partials) {
            if (t.doc_id() != doc_id) throw Error(ErrorKind::invalid_input, "partials belong to different documents");
            for (const auto& ref : t.chunk_refs()) {
                if (!seen.insert(ref).second) {
                    throw Error(ErrorKind::invalid_input, "chunk '" + ref + "' appears in more than one partial");
                }
            }
            const auto& proot = t.node(t.root_id());
            part_titles.push_back(proot.title);
            for (const auto& c : proot.children) {
                const auto& child = t.node(c);
                if (child.is_leaf()) {
                    auto it = by_id.find(child.chunk_ref);
                    if (it == by_id.end()) throw Error(ErrorKind::invalid_input, "unknown chunk '" + child.chunk_ref + "'");
                    children.push_back({{"title", ""}, {"summary", text::lead_sentence(it->second->content)}});
                } else {
                    children.push_back({{"title", child.title}, {"summary", child.summary}});
                }
                root.children.push_back(to_outline(t, c));
            }
        }

        try {
            const auto reply = root_heading(doc_id, part_titles, children);
            root.title = reply.at("title").get<std::string>();
            root.summary = reply.at("summary").get<std::string>();
        } catch (const Error& e) {
            throw Error(ErrorKind::structuring_failure, "merging '" + doc_id + "': " + e.what());
        }

        std::vector<Chunk> ordered;
        ordered.reserve(seen.size());
        for (const auto& c : chunks) {
            if (seen.count(c.chunk_id)) ordered.push_back(c);
        }
        return validate_and_repair(std::move(root), ordered, doc_id, max_depth_);
    }

    /// Title and summary for a root over `children`. When the prompt overflows
    /// the window, each half of the children is condensed first and the
    /// root is asked over the two condensed entries (once; an overflow there
    /// is final).
    nlohmann::json root_heading(const std::string& doc_id, const nlohmann::json& part_titles,
                                const nlohmann::json& children, bool split = true) const {
        const nlohmann::json payload{{"task", "merge_root"}, {"doc_id", doc_id}, {"part_titles", part_titles},
                                     {"children", children}};
        try {
            return gateway_.call(Role::structure, payload);
        } catch (const Error& e) {
            if (!split || e.kind() != ErrorKind::context_overflow || children.size() < 2) throw;
        }
        const auto mid = static_cast<std::ptrdiff_t>(children.size() / 2);
        nlohmann::json halves = nlohmann::json::array();
        for (auto [b, end] : {std::pair{children.begin(), children.begin() + mid}, std::pair{children.begin() + mid, children.end()}}) {
            const auto h = root_heading(doc_id, nlohmann::json::array(), nlohmann::json(std::vector<nlohmann::json>(b, end)));
            halves.push_back({{"title", h.at("title")}, {"summary", h.at("summary")}});
        }
        return root_heading(doc_id, part_titles, halves, false);
    }

    /// Builds consecutive parts of `part_size` chunks independently (in
    /// parallel) and merges them. A single part is returned as built.
    SemanticTree build_progressive(std::span<const Chunk> chunks, std::size_t part_size) const {
        check_chunks(chunks);
        if (part_size < 1) throw Error(ErrorKind::invalid_argument, "part_size must be >= 1");
        std::vector<std::future<SemanticTree>> jobs;
        for (std::size_t b = 0; b < chunks.size(); b += part_size) {
            const auto part = chunks.subspan(b, std::min(part_size, chunks.size() - b));
            jobs.push_back(std::async(std::launch::async, [this, part] { return build_tree(part); }));
        }
        std::vector<SemanticTree> partials;
        partials.reserve(jobs.size());
        for (auto& j : jobs) partials.push_back(j.get());
        if (partials.size() == 1) return std::move(partials.front());
        return merge_trees(partials, chunks);
    }

    /// Prompt tokens one chunk costs: its serialized entry, not just the text.
    std::size_t entry_tokens(const Chunk& c) const {
        return tokenizer_.count(nlohmann::json{{"chunk_id", c.chunk_id}, {"content", c.content}}.dump());
    }

    /// Largest chunk count whose worst-case token mass fits 60% of the
    /// structuring model's context window.
    std::size_t default_part_size(std::span<const Chunk> chunks) const {
        std::vector<std::size_t> sizes;
        sizes.reserve(chunks.size());
        for (const auto& c : chunks) sizes.push_back(entry_tokens(c));
        std::sort(sizes.begin(), sizes.end(), std::greater<>());
        const auto limit = gateway_.context_window() * 6 / 10;
        std::size_t total = 0;
        std::size_t k = 0;
        while (k < sizes.size() && total + sizes[k] <= limit) total += sizes[k++];
        return std::max<std::size_t>(k, 1);
    }

    /// Plain build when the document fits the structuring budget, progressive
    /// otherwise.
    SemanticTree build(std::span<const Chunk> chunks, RepairReport* report = nullptr) const {
        std::size_t total = 0;
        for (const auto& c : chunks) total += entry_tokens(c);
        if (total <= gateway_.context_window() * 6 / 10) return build_tree(chunks, report);
        return build_progressive(chunks, default_part_size(chunks));
    }

private:
    static std::string check_chunks(std::span<const Chunk> chunks) {
        if (chunks.empty()) throw Error(ErrorKind::invalid_input, "no chunks to structure");
        const auto& doc_id = chunks.front().doc_id;
        for (const auto& c : chunks) {
            if (c.doc_id != doc_id) throw Error(ErrorKind::invalid_input, "chunks from more than one document");
        }
        return doc_id;
    }

    Gateway& gateway_;
    Tokenizer tokenizer_;
    int max_depth_;
};

}  // namespace fable
