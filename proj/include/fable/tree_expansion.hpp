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

// Structural relevance scoring over document trees.
//
//   s_sim(v)   = cos(e_v, e_q) / depth(v)
//   s_inh(v)   = max over strict ancestors u of s_sim(u);  s_inh(root) = s_sim(root)
//   s_child(v) = mean over children c of s(c);             s_child(leaf) = s_sim(leaf)
//   s(v)       = (s_sim + s_inh + s_child) / 3
//
// Selection walks nodes by descending s and takes a node when no ancestor
// was taken and its subtree still fits the budget. Taking a node releases
// any descendants taken earlier, so only their tokens are credited back.

#include <algorithm>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "fable/budget.hpp"
#include "fable/forest.hpp"
#include "fable/vector_index.hpp"

namespace fable {

struct ScoredNode {
    NodeKey key;
    int depth = 0;
    double s_sim = 0.0;
    double s_inh = 0.0;
    double s_child = 0.0;
    double s = 0.0;
    std::size_t mass = 0;  // subtree tokens

    bool operator==(const ScoredNode&) const = default;
};

/// Ranking order: s descending, then doc_id, then node_id.
inline bool scored_before(const ScoredNode& a, const ScoredNode& b) {
    if (a.s != b.s) return a.s > b.s;
    return a.key < b.key;
}

using CosineFn = std::function<double(const std::string& node_id)>;

/// Scores every node of one tree, in preorder. Mass is left at zero.
inline std::vector<ScoredNode> score_tree(const SemanticTree& tree, const CosineFn& cosine) {
    const auto& order = tree.preorder();
    std::unordered_map<std::string, ScoredNode> by_id;
    for (const auto& id : order) {
        ScoredNode n;
        n.key = {tree.doc_id(), id};
        n.depth = tree.depth(id);
        n.s_sim = cosine(id) / n.depth;
        by_id.emplace(id, n);
    }
    // Parents precede children in preorder, so one forward pass settles s_inh.
    std::unordered_map<std::string, double> best_above;  // max s_sim over v and its ancestors
    for (const auto& id : order) {
        auto& n = by_id.at(id);
        const auto parent = tree.parent(id);
        n.s_inh = parent ? best_above.at(*parent) : n.s_sim;
        best_above[id] = parent ? std::max(best_above.at(*parent), n.s_sim) : n.s_sim;
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& n = by_id.at(*it);
        const auto& children = tree.node(*it).children;
        if (children.empty()) {
            n.s_child = n.s_sim;
        } else {
            double sum = 0.0;
            for (const auto& c : children) sum += by_id.at(c).s;
            n.s_child = sum / static_cast<double>(children.size());
        }
        n.s = (n.s_sim + n.s_inh + n.s_child) / 3.0;
    }
    std::vector<ScoredNode> out;
    out.reserve(order.size());
    for (const auto& id : order) out.push_back(by_id.at(id));
    return out;
}

struct ExpansionResult {
    std::vector<ScoredNode> ranked;    // every scored node, ranking order
    std::vector<ScoredNode> selected;  // final picks, in the order they were taken
    std::vector<NodeKey> released;     // picks later replaced by an ancestor
    std::size_t spent = 0;
};

/// Greedy pick over `ranked` (already in ranking order, masses filled in).
inline ExpansionResult select_greedy(std::vector<ScoredNode> ranked, const Forest& forest, std::size_t budget) {
    ExpansionResult r;
    std::vector<ScoredNode> taken;
    std::size_t remaining = budget;
    for (const auto& n : ranked) {
        if (remaining == 0) break;
        const auto& tree = forest.tree(n.key.doc_id);
        bool blocked = false;
        std::size_t inner = 0;
        for (const auto& t : taken) {
            if (t.key.doc_id != n.key.doc_id) continue;
            if (tree.is_ancestor(t.key.node_id, n.key.node_id)) {
                blocked = true;
                break;
            }
            if (tree.is_ancestor(n.key.node_id, t.key.node_id)) inner += t.mass;
        }
        if (blocked || n.mass - inner > remaining) continue;
        remaining -= n.mass - inner;
        std::erase_if(taken, [&](const ScoredNode& t) {
            const bool under = t.key.doc_id == n.key.doc_id && tree.is_ancestor(n.key.node_id, t.key.node_id);
            if (under) r.released.push_back(t.key);
            return under;
        });
        taken.push_back(n);
    }
    r.selected = std::move(taken);
    r.spent = budget - remaining;
    r.ranked = std::move(ranked);
    return r;
}

/// Scores all nodes of the given documents against the query and selects
/// subtrees within budget.
inline ExpansionResult tree_expansion(std::span<const float> query, const std::vector<std::string>& docs,
                                      const Forest& forest, const VectorIndex& index, const TokenLedger& ledger,
                                      std::size_t budget) {
    std::vector<ScoredNode> all;
    for (const auto& doc_id : docs) {
        const auto& tree = forest.tree(doc_id);
        auto scored = score_tree(tree, [&](const std::string& node_id) {
            auto slot = index.find({doc_id, node_id});
            if (!slot) throw Error(ErrorKind::not_found, "no vector for " + doc_id + "/" + node_id);
            return index.cosine(query, *slot);
        });
        for (auto& n : scored) {
            n.mass = ledger.mass(n.key);
            all.push_back(std::move(n));
        }
    }
    std::sort(all.begin(), all.end(), scored_before);
    return select_greedy(std::move(all), forest, budget);
}

}  // namespace fable
