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

// Library-vs-oracle comparisons shared by the unit suites and the acceptance
// runner. Each returns an empty string on agreement, otherwise a description
// of the first mismatch.

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fable/fable.hpp"
#include "oracles.hpp"

namespace checks {

using CosTable = std::map<std::string, std::map<std::string, double>>;  // doc -> node -> cosine

/// Cosines in [-1, 1]; with `coarse` they come from a five-value set so that
/// ties in the ranking are frequent.
inline CosTable random_cosines(std::mt19937_64& rng, const std::vector<oracle::RawTree>& trees, bool coarse) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    static const double levels[] = {-0.5, 0.0, 0.25, 0.5, 1.0};
    CosTable out;
    for (const auto& t : trees) {
        for (const auto& n : t.nodes) out[t.doc_id][n.node_id] = coarse ? levels[rng() % 5] : u(rng);
    }
    return out;
}

inline std::string expansion(const std::vector<oracle::RawTree>& trees, const CosTable& cos, std::size_t budget) {
    const fable::Tokenizer tok;
    const auto forest = oracle::to_forest(trees);
    const fable::TokenLedger ledger(forest, tok);
    std::vector<fable::ScoredNode> all;
    std::vector<oracle::Candidate> cands;
    for (const auto& t : trees) {
        const auto& table = cos.at(t.doc_id);
        const auto want = oracle::expansion_scores(t, table);
        auto got = fable::score_tree(forest.tree(t.doc_id), [&](const std::string& id) { return table.at(id); });
        if (got.size() != t.nodes.size()) return "score_tree skipped nodes of " + t.doc_id;
        for (auto& n : got) {
            const auto& w = want.at(n.key.node_id);
            const double diffs[] = {n.s_sim - w.s_sim, n.s_inh - w.s_inh, n.s_child - w.s_child, n.s - w.s};
            for (double d : diffs) {
                if (!(std::abs(d) <= 1e-9)) {
                    std::ostringstream m;
                    m << "score mismatch at " << t.doc_id << "/" << n.key.node_id << ": got (" << n.s_sim << ", "
                      << n.s_inh << ", " << n.s_child << ", " << n.s << ") want (" << w.s_sim << ", " << w.s_inh << ", "
                      << w.s_child << ", " << w.s << ")";
                    return m.str();
                }
            }
            n.mass = ledger.mass(n.key);
            cands.push_back({n.key, w.s});
            all.push_back(n);
        }
    }
    std::sort(all.begin(), all.end(), fable::scored_before);
    const auto r = fable::select_greedy(all, forest, budget);
    const auto replay = oracle::greedy_replay(cands, trees, tok, budget);
    std::vector<fable::NodeKey> got;
    for (const auto& n : r.selected) got.push_back(n.key);
    if (got != replay) {
        std::ostringstream m;
        m << "greedy selection differs at budget " << budget << ": got " << got.size() << " nodes, oracle "
          << replay.size();
        return m.str();
    }
    std::size_t spent = 0;
    for (const auto& n : r.selected) spent += n.mass;
    if (spent != r.spent || spent > budget) return "spent tokens inconsistent";
    return {};
}

inline std::vector<fable::NodeKey> random_picks(std::mt19937_64& rng, const std::vector<oracle::RawTree>& trees,
                                                std::size_t n) {
    std::vector<fable::NodeKey> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = trees[rng() % trees.size()];
        out.push_back({t.doc_id, t.nodes[rng() % t.nodes.size()].node_id});
    }
    return out;
}

inline std::vector<oracle::RawTree> random_forest(std::mt19937_64& rng, int docs, int max_nodes, int max_depth = 4) {
    std::vector<oracle::RawTree> trees;
    for (int d = 0; d < docs; ++d) {
        const int n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_nodes - 1));
        char id[16];
        std::snprintf(id, sizeof(id), "doc%02d", d);
        trees.push_back(oracle::materialize(oracle::random_shape(rng, n, max_depth), id, max_depth, rng, true));
    }
    return trees;
}

inline std::string fusion(const std::vector<oracle::RawTree>& trees, const std::vector<fable::NodeKey>& a,
                          const std::vector<fable::NodeKey>& b) {
    const auto forest = oracle::to_forest(trees);
    const auto got = fable::node_fusion(a, b, forest);
    std::vector<std::pair<std::string, std::string>> ids;
    for (const auto& c : got.chunks) ids.emplace_back(c.doc_id, c.chunk_id);
    if (ids != oracle::node_fusion(a, b, trees)) return "node_fusion chunk list differs from the transcription";
    return {};
}

/// Random index of up to max_n vectors, half of the rounds with coarse
/// components and planted duplicates so exact ties occur.
struct TopkCase {
    fable::VectorIndex index{1};
    std::vector<std::pair<fable::NodeKey, std::vector<float>>> stored;
    std::vector<std::vector<float>> queries;
};

inline TopkCase random_topk_case(std::mt19937_64& rng, std::size_t max_n, std::size_t dim, bool coarse) {
    std::normal_distribution<float> gauss;
    auto draw = [&] {
        std::vector<float> v(dim);
        bool any = false;
        for (auto& x : v) {
            x = coarse ? static_cast<float>(static_cast<int>(rng() % 3) - 1) : gauss(rng);
            any |= x != 0.0f;
        }
        if (!any) v[rng() % dim] = 1.0f;
        return v;
    };
    TopkCase c;
    c.index = fable::VectorIndex(dim);
    const std::size_t n = 1 + rng() % max_n;
    std::vector<std::vector<float>> raw;
    for (std::size_t i = 0; i < n; ++i) {
        raw.push_back(i > 0 && rng() % 8 == 0 ? raw[rng() % raw.size()] : draw());
        char doc[16], node[32];
        std::snprintf(doc, sizeof(doc), "d%03d", static_cast<int>(rng() % 97));
        std::snprintf(node, sizeof(node), "n%05zu", i);
        c.index.add({doc, node}, raw.back(), i % 3 ? fable::Granularity::internal : fable::Granularity::leaf);
    }
    for (std::size_t i = 0; i < c.index.size(); ++i) {
        const auto v = c.index.vector(i);
        c.stored.emplace_back(c.index.key(i), std::vector<float>(v.begin(), v.end()));
    }
    for (int q = 0; q < 5; ++q) c.queries.push_back(draw());
    return c;
}

inline std::string topk(const TopkCase& c, const std::vector<float>& q, std::size_t k, unsigned threads) {
    const auto got = c.index.topk(q, k, {}, threads);
    const auto want = oracle::topk(c.stored, q, k);
    if (got.size() != want.size()) return "topk returned " + std::to_string(got.size()) + " hits, oracle " + std::to_string(want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (got[i].key != want[i].key) {
            return "rank " + std::to_string(i) + ": got " + got[i].key.doc_id + "/" + got[i].key.node_id + ", oracle " +
                   want[i].key.doc_id + "/" + want[i].key.node_id;
        }
        if (!(std::abs(got[i].score - want[i].score) <= 1e-9)) return "score drift at rank " + std::to_string(i);
    }
    return {};
}

/// Structural invariants of one mock-built document, including a persistence
/// round trip of the single-document forest.
inline std::string structure(const std::string& text, const std::string& doc_id, fable::Gateway& gateway,
                             const fable::SegmenterSpec& seg, int max_depth) {
    const fable::Tokenizer tok;
    const auto chunks = fable::segment(text, doc_id, seg, tok, &gateway);
    const fable::TreeBuilder builder(gateway, tok, max_depth);
    const auto tree = builder.build(chunks);
    // bijection and order: leaves reference every chunk exactly once, in order
    const auto refs = tree.chunk_refs();
    if (refs.size() != chunks.size()) return doc_id + ": leaf count differs from chunk count";
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i] != chunks[i].chunk_id) return doc_id + ": leaf order differs from chunk order";
    }
    if (tree.height() > max_depth) return doc_id + ": tree deeper than max_depth";
    for (const auto& id : tree.preorder()) {
        if (tree.depth(id) > max_depth) return doc_id + ": node below max_depth";
    }
    fable::Forest forest;
    forest.add(tree, chunks);
    std::stringstream a;
    fable::write_forest(forest, a);
    const auto back = fable::read_forest(a);
    if (!(back == forest)) return doc_id + ": persistence round trip changed the forest";
    std::stringstream b;
    fable::write_forest(back, b);
    if (a.str() != b.str()) return doc_id + ": re-serialization is not byte-identical";
    return {};
}

/// Injects one corruption class into a mock outline and checks the repair.
/// kind: 0 unknown reference, 1 missing chunk, 2 too deep, 3 duplicate.
inline std::string corruption(const std::string& text, fable::Gateway& gateway, int kind, std::mt19937_64& rng) {
    const fable::Tokenizer tok;
    const auto chunks = fable::segment(text, "doc", {fable::SegmenterBackend::structural, 24, 48}, tok);
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : chunks) list.push_back({{"chunk_id", c.chunk_id}, {"content", c.content}});
    auto outline = fable::parse_outline(
        gateway.call(fable::Role::structure, {{"task", "outline"}, {"doc_id", "doc"}, {"max_depth", 8}, {"chunks", list}}));

    std::vector<fable::OutlineNode*> internals;
    std::vector<std::pair<fable::OutlineNode*, std::size_t>> leaves;
    std::vector<fable::OutlineNode*> stack{&outline};
    while (!stack.empty()) {
        auto* n = stack.back();
        stack.pop_back();
        internals.push_back(n);
        for (std::size_t k = 0; k < n->children.size(); ++k) {
            if (n->children[k].is_leaf()) leaves.emplace_back(n, k);
            else stack.push_back(&n->children[k]);
        }
    }
    fable::OutlineNode* at = internals[rng() % internals.size()];
    auto leaf = [](const std::string& id) {
        fable::OutlineNode n;
        n.chunk = id;
        return n;
    };
    switch (kind) {
        case 0: at->children.insert(at->children.begin() + static_cast<std::ptrdiff_t>(rng() % (at->children.size() + 1)),
                                    leaf("c9" + std::to_string(rng() % 1000))); break;
        case 1: {
            const auto [p, k] = leaves[rng() % leaves.size()];
            p->children.erase(p->children.begin() + static_cast<std::ptrdiff_t>(k));
            break;
        }
        case 2: {
            // push one existing chunk 3..6 extra heading levels down in place
            const auto [p, k] = leaves[rng() % leaves.size()];
            auto node = p->children[k];
            for (std::size_t d = 3 + rng() % 4; d-- > 0;) {
                fable::OutlineNode h;
                h.title = "deep";
                h.summary = "deep";
                h.children.push_back(std::move(node));
                node = std::move(h);
            }
            p->children[k] = std::move(node);
            break;
        }
        case 3: at->children.insert(at->children.begin() + static_cast<std::ptrdiff_t>(rng() % (at->children.size() + 1)),
                                    leaf(chunks[rng() % chunks.size()].chunk_id)); break;
    }

    const int max_depth = 4;
    fable::RepairReport report;
    fable::SemanticTree tree;
    try {
        tree = fable::validate_and_repair(outline, chunks, "doc", max_depth, &report);
    } catch (const fable::Error& e) {
        return "corruption " + std::to_string(kind) + " not repaired: " + e.what();
    }
    const auto refs = tree.chunk_refs();
    if (refs.size() != chunks.size()) return "repaired tree lost or gained chunks";
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i] != chunks[i].chunk_id) return "repaired tree reorders chunks";
    }
    if (tree.height() > max_depth) return "repaired tree too deep";
    const std::size_t flag[] = {report.dropped_unknown, report.added_missing, report.flattened, report.deduplicated};
    if (flag[kind] == 0) return "repair report does not record corruption " + std::to_string(kind);
    return {};
}

}  // namespace checks
