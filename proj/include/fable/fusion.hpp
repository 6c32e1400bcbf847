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
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "fable/error.hpp"
#include "fable/forest.hpp"

namespace fable {

enum class Provenance { llm, treexp, both };

inline std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::llm: return "llm";
        case Provenance::treexp: return "treexp";
        case Provenance::both: return "both";
    }
    return "?";
}

/// Deduplicated union of two document lists: LLM picks first, in their
/// order, then vector-only picks in theirs.
inline std::vector<std::string> fuse_docs(const std::vector<std::string>& d_llm, const std::vector<std::string>& d_vector) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto* list : {&d_llm, &d_vector}) {
        for (const auto& d : *list) {
            if (seen.insert(d).second) out.push_back(d);
        }
    }
    return out;
}

struct FusedNode {
    NodeKey key;
    Provenance provenance = Provenance::llm;

    bool operator==(const FusedNode&) const = default;
};

struct FusionResult {
    std::vector<FusedNode> nodes;  // survivors, output order
    std::vector<NodeKey> pruned;   // dropped because an ancestor was selected
    std::vector<Chunk> chunks;
};

/// Merges the two node selections: drops nodes whose ancestor is also
/// selected, puts documents holding LLM nodes before treexp-only documents,
/// orders each document's nodes by their first chunk and expands them into
/// chunks. A node picked by both paths counts as an LLM node.
inline FusionResult node_fusion(const std::vector<NodeKey>& n_llm, const std::vector<NodeKey>& n_treexp,
                                const Forest& forest) {
    std::map<NodeKey, Provenance> prov;
    std::vector<NodeKey> first_seen;
    auto note = [&](const NodeKey& k, Provenance p) {
        if (!forest.tree(k.doc_id).contains(k.node_id)) {
            throw Error(ErrorKind::not_found, "node " + k.doc_id + "/" + k.node_id);
        }
        auto [it, fresh] = prov.emplace(k, p);
        if (fresh) {
            first_seen.push_back(k);
        } else if (it->second != p) {
            it->second = Provenance::both;
        }
    };
    for (const auto& k : n_llm) note(k, Provenance::llm);
    for (const auto& k : n_treexp) note(k, Provenance::treexp);

    FusionResult r;
    std::vector<NodeKey> survivors;
    for (const auto& k : first_seen) {
        const auto& tree = forest.tree(k.doc_id);
        bool covered = false;
        for (const auto& a : tree.ancestors(k.node_id)) {
            if (prov.count({k.doc_id, a})) {
                covered = true;
                break;
            }
        }
        (covered ? r.pruned : survivors).push_back(k);
    }

    // Documents are ranked by their earliest surviving node in n_llm, then by
    // their earliest surviving node in n_treexp.
    const std::set<NodeKey> alive(survivors.begin(), survivors.end());
    std::vector<std::string> doc_order;
    std::set<std::string> placed;
    for (const auto* list : {&n_llm, &n_treexp}) {
        for (const auto& k : *list) {
            if (alive.count(k) && placed.insert(k.doc_id).second) doc_order.push_back(k.doc_id);
        }
    }

    for (const auto& doc_id : doc_order) {
        std::vector<NodeKey> mine;
        for (const auto& s : survivors) {
            if (s.doc_id == doc_id) mine.push_back(s);
        }
        const auto& tree = forest.tree(doc_id);
        std::stable_sort(mine.begin(), mine.end(), [&](const NodeKey& a, const NodeKey& b) {
            return tree.leaf_span(a.node_id).first < tree.leaf_span(b.node_id).first;
        });
        std::unordered_set<std::string> emitted;
        for (const auto& k : mine) {
            r.nodes.push_back({k, prov.at(k)});
            for (const auto& c : forest.subtree_chunks(k)) {
                if (emitted.insert(c.chunk_id).second) r.chunks.push_back(c);
            }
        }
    }
    return r;
}

}  // namespace fable
