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

// Query-time pipeline. Documents are recalled along two paths (gateway
// selection over shallow ToC entries, and vector search over all node
// embeddings) and fused. When the fused documents fit the budget they are
// returned whole; otherwise nodes are recalled along two paths (gateway
// navigation and tree expansion), fused, and cut to the budget.

#include <future>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/budget.hpp"
#include "fable/embedder.hpp"
#include "fable/forest.hpp"
#include "fable/fusion.hpp"
#include "fable/gateway.hpp"
#include "fable/tree_expansion.hpp"
#include "fable/vector_index.hpp"

namespace fable {

enum class RetrievalMode { automatic, llm_docs, docs, llm_nodes, nodes, treexp };

inline std::string_view to_string(RetrievalMode m) {
    switch (m) {
        case RetrievalMode::automatic: return "auto";
        case RetrievalMode::llm_docs: return "llm-docs";
        case RetrievalMode::docs: return "docs";
        case RetrievalMode::llm_nodes: return "llm-nodes";
        case RetrievalMode::nodes: return "nodes";
        case RetrievalMode::treexp: return "treexp";
    }
    return "?";
}

inline RetrievalMode parse_retrieval_mode(std::string_view s) {
    for (auto m : {RetrievalMode::automatic, RetrievalMode::llm_docs, RetrievalMode::docs, RetrievalMode::llm_nodes,
                   RetrievalMode::nodes, RetrievalMode::treexp}) {
        if (to_string(m) == s) return m;
    }
    throw Error(ErrorKind::invalid_argument, "unknown mode '" + std::string(s) + "'");
}

enum class Stage { doc_level, node_level };

inline std::string_view to_string(Stage s) { return s == Stage::doc_level ? "doc_level" : "node_level"; }

enum class RetrievalStatus { ok, no_candidates };

inline std::string_view to_string(RetrievalStatus s) { return s == RetrievalStatus::ok ? "ok" : "no_candidates"; }

struct RetrievalAudit {
    std::vector<std::string> warnings;
    std::vector<std::string> unknown_doc_ids;  // returned by the gateway, not in the forest
    std::vector<NodeKey> rejected_nodes;       // navigation picks that are unknown or leaves
    std::size_t select_calls = 0;
    std::size_t navigate_calls = 0;
    std::vector<Hit> vector_hits;
    std::size_t fused_doc_tokens = 0;          // routing input
    std::vector<ScoredNode> treexp_selected;
    std::vector<ScoredNode> treexp_top;        // best-ranked nodes, for inspection
    std::vector<NodeKey> treexp_released;
    std::vector<FusedNode> fused_nodes;
    std::vector<NodeKey> fusion_pruned;
    std::vector<std::pair<std::string, std::string>> pre_budget;  // (doc_id, chunk_id)
    std::size_t budget_dropped = 0;
    bool empty_by_budget = false;
};

struct RetrievalResult {
    RetrievalStatus status = RetrievalStatus::ok;
    RetrievalMode mode = RetrievalMode::automatic;
    Stage stage = Stage::doc_level;
    std::vector<std::string> d_llm;
    std::vector<std::string> d_vector;
    std::vector<std::string> d_fusion;
    std::vector<NodeKey> n_llm;
    std::vector<NodeKey> n_treexp;
    std::vector<Chunk> chunks;
    std::size_t token_count = 0;
    std::size_t budget = 0;
    RetrievalAudit audit;
};

struct RetrieverOptions {
    unsigned search_threads = 1;
    BudgetPolicy budget_policy = BudgetPolicy::prefix;
    std::size_t search_multiplier = 4;  // node hits fetched per wanted document
    std::size_t audit_top = 20;
};

class Retriever {
public:
    Retriever(const Forest& forest, const VectorIndex& index, const Embedder& embedder, Gateway& gateway,
              RetrievalConfig config, RetrieverOptions options = {})
        : forest_(forest),
          index_(index),
          embedder_(embedder),
          gateway_(gateway),
          config_(std::move(config)),
          options_(options),
          tok_(config_.tokenizer),
          ledger_(forest, tok_) {
        config_.validate();
        if (index_.dimension() != embedder_.dimension()) {
            throw Error(ErrorKind::configuration, "index dimension " + std::to_string(index_.dimension()) +
                                                      " differs from embedder dimension " +
                                                      std::to_string(embedder_.dimension()));
        }
    }

    const RetrievalConfig& config() const { return config_; }
    const TokenLedger& ledger() const { return ledger_; }
    const Tokenizer& tokenizer() const { return tok_; }

    /// Gateway context entry for an internal node.
    nlohmann::json entry(const SemanticTree& tree, const std::string& id) const {
        const auto parent = tree.parent(id);
        return {{"node_id", id},
                {"parent", parent.value_or("")},
                {"depth", tree.depth(id)},
                {"toc", tree.toc_path(id)},
                {"summary", tree.node(id).summary}};
    }

    /// Internal nodes up to max_depth, preorder, for each listed document.
    nlohmann::json context(const std::vector<std::string>& docs, int max_depth) const {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& doc_id : docs) {
            const auto& tree = forest_.tree(doc_id);
            nlohmann::json entries = nlohmann::json::array();
            for (const auto& id : tree.preorder()) {
                if (!tree.node(id).is_leaf() && tree.depth(id) <= max_depth) entries.push_back(entry(tree, id));
            }
            out.push_back({{"doc_id", doc_id}, {"entries", std::move(entries)}});
        }
        return out;
    }

    std::vector<std::string> select_docs_llm(const std::string& query, RetrievalAudit& audit) const {
        std::vector<nlohmann::json> responses;
        try {
            sharded_call(Role::select_docs, query, forest_.doc_ids(), config_.hierarchy_threshold, responses,
                         audit.select_calls);
        } catch (const Error& e) {
            audit.warnings.push_back("llm document selection failed: " + std::string(e.what()));
            return {};
        }
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& r : responses) {
            for (const auto& id : r.at("doc_ids")) {
                const auto s = id.get<std::string>();
                if (!forest_.contains(s)) {
                    audit.unknown_doc_ids.push_back(s);
                } else if (seen.insert(s).second) {
                    out.push_back(s);
                }
            }
        }
        return out;
    }

    std::vector<std::string> select_docs_vector(std::span<const float> q, RetrievalAudit& audit) const {
        if (index_.empty()) return {};
        audit.vector_hits = index_.topk(q, options_.search_multiplier * config_.k_doc, {}, options_.search_threads);
        return docs_of(audit.vector_hits, config_.k_doc);
    }

    std::vector<NodeKey> navigate_nodes_llm(const std::string& query, const std::vector<std::string>& docs,
                                            RetrievalAudit& audit) const {
        std::vector<nlohmann::json> responses;
        try {
            sharded_call(Role::navigate_nodes, query, docs, config_.max_depth, responses, audit.navigate_calls);
        } catch (const Error& e) {
            audit.warnings.push_back("llm node navigation failed: " + std::string(e.what()));
            return {};
        }
        const std::set<std::string> allowed(docs.begin(), docs.end());
        std::vector<NodeKey> out;
        std::set<NodeKey> seen;
        for (const auto& r : responses) {
            for (const auto& n : r.at("nodes")) {
                NodeKey k{n.at("doc_id").get<std::string>(), n.at("node_id").get<std::string>()};
                const bool ok = allowed.count(k.doc_id) && forest_.tree(k.doc_id).contains(k.node_id) &&
                                !forest_.tree(k.doc_id).node(k.node_id).is_leaf();
                if (!ok) {
                    audit.rejected_nodes.push_back(k);
                } else if (seen.insert(k).second) {
                    out.push_back(std::move(k));
                }
            }
        }
        return out;
    }

    /// Summed chunk tokens of the listed documents.
    std::size_t doc_tokens(const std::vector<std::string>& docs) const {
        std::size_t t = 0;
        for (const auto& d : docs) t += ledger_.doc_tokens(d);
        return t;
    }

    Stage route(const std::vector<std::string>& fused) const {
        return doc_tokens(fused) <= config_.budget ? Stage::doc_level : Stage::node_level;
    }

    RetrievalResult retrieve(const std::string& query, RetrievalMode mode = RetrievalMode::automatic) const {
        RetrievalResult r;
        r.mode = mode;
        r.budget = config_.budget;
        auto& audit = r.audit;

        std::vector<float> q;
        try {
            q = embedder_.embed(query);
        } catch (const Error& e) {
            audit.warnings.push_back("query embedding failed: " + std::string(e.what()));
        }

        RetrievalAudit llm_audit;
        auto llm_docs = std::async(std::launch::async, [&] { return select_docs_llm(query, llm_audit); });
        if (!q.empty() && mode != RetrievalMode::llm_docs) r.d_vector = select_docs_vector(q, audit);
        r.d_llm = llm_docs.get();
        merge_audit(audit, llm_audit);

        r.d_fusion = mode == RetrievalMode::llm_docs ? r.d_llm : fuse_docs(r.d_llm, r.d_vector);
        if (r.d_fusion.empty()) {
            r.status = RetrievalStatus::no_candidates;
            return r;
        }
        audit.fused_doc_tokens = doc_tokens(r.d_fusion);

        switch (mode) {
            case RetrievalMode::automatic: r.stage = route(r.d_fusion); break;
            case RetrievalMode::llm_docs:
            case RetrievalMode::docs: r.stage = Stage::doc_level; break;
            default: r.stage = Stage::node_level; break;
        }

        std::vector<Chunk> ordered;
        if (r.stage == Stage::doc_level) {
            for (const auto& d : r.d_fusion) {
                const auto& cs = forest_.chunks(d);
                ordered.insert(ordered.end(), cs.begin(), cs.end());
            }
        } else {
            const bool use_llm = mode != RetrievalMode::treexp;
            const bool use_treexp = mode != RetrievalMode::llm_nodes && !q.empty();
            RetrievalAudit nav_audit;
            std::future<std::vector<NodeKey>> nav;
            if (use_llm) {
                nav = std::async(std::launch::async, [&] { return navigate_nodes_llm(query, r.d_fusion, nav_audit); });
            }
            if (use_treexp) {
                auto ex = tree_expansion(q, r.d_fusion, forest_, index_, ledger_, config_.budget);
                for (const auto& n : ex.selected) r.n_treexp.push_back(n.key);
                audit.treexp_selected = ex.selected;
                audit.treexp_released = ex.released;
                ex.ranked.resize(std::min(ex.ranked.size(), options_.audit_top));
                audit.treexp_top = std::move(ex.ranked);
            }
            if (use_llm) {
                r.n_llm = nav.get();
                merge_audit(audit, nav_audit);
            }
            auto fused = node_fusion(r.n_llm, r.n_treexp, forest_);
            audit.fused_nodes = fused.nodes;
            audit.fusion_pruned = fused.pruned;
            ordered = std::move(fused.chunks);
        }

        for (const auto& c : ordered) audit.pre_budget.emplace_back(c.doc_id, c.chunk_id);
        auto cut = budget_control(ordered, config_.budget, tok_, options_.budget_policy);
        r.chunks = std::move(cut.chunks);
        r.token_count = cut.spent;
        audit.budget_dropped = cut.dropped;
        audit.empty_by_budget = cut.empty_by_budget;
        if (r.token_count > config_.budget) {
            throw Error(ErrorKind::invariant_violation, "retrieved content exceeds the budget");
        }
        return r;
    }

private:
    /// Calls `role` over the context of `docs`; when the prompt overflows the
    /// window the document list is split in halves and each half asked alone.
    void sharded_call(Role role, const std::string& query, const std::vector<std::string>& docs, int max_depth,
                      std::vector<nlohmann::json>& responses, std::size_t& calls) const {
        if (docs.empty()) return;
        const nlohmann::json payload{{"query", query}, {"documents", context(docs, max_depth)}};
        try {
            ++calls;
            responses.push_back(gateway_.call(role, payload));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::context_overflow || docs.size() == 1) throw;
            const auto mid = docs.begin() + static_cast<std::ptrdiff_t>(docs.size() / 2);
            sharded_call(role, query, {docs.begin(), mid}, max_depth, responses, calls);
            sharded_call(role, query, {mid, docs.end()}, max_depth, responses, calls);
        }
    }

    static void merge_audit(RetrievalAudit& into, RetrievalAudit& from) {
        into.warnings.insert(into.warnings.end(), from.warnings.begin(), from.warnings.end());
        into.unknown_doc_ids.insert(into.unknown_doc_ids.end(), from.unknown_doc_ids.begin(), from.unknown_doc_ids.end());
        into.rejected_nodes.insert(into.rejected_nodes.end(), from.rejected_nodes.begin(), from.rejected_nodes.end());
        into.select_calls += from.select_calls;
        into.navigate_calls += from.navigate_calls;
    }

    const Forest& forest_;
    const VectorIndex& index_;
    const Embedder& embedder_;
    Gateway& gateway_;
    RetrievalConfig config_;
    RetrieverOptions options_;
    Tokenizer tok_;
    TokenLedger ledger_;
};

inline nlohmann::json to_json(const NodeKey& k) { return {{"doc_id", k.doc_id}, {"node_id", k.node_id}}; }

inline nlohmann::json to_json(const ScoredNode& n) {
    return {{"doc_id", n.key.doc_id}, {"node_id", n.key.node_id}, {"depth", n.depth}, {"s_sim", n.s_sim},
            {"s_inh", n.s_inh},       {"s_child", n.s_child},     {"s", n.s},         {"mass", n.mass}};
}

template <typename T>
nlohmann::json to_json_array(const std::vector<T>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& x : v) out.push_back(to_json(x));
    return out;
}

inline nlohmann::json to_json(const RetrievalResult& r, bool with_text = true) {
    const auto& a = r.audit;
    nlohmann::json hits = nlohmann::json::array();
    for (const auto& h : a.vector_hits) hits.push_back({{"doc_id", h.key.doc_id}, {"node_id", h.key.node_id}, {"score", h.score}});
    nlohmann::json fused = nlohmann::json::array();
    for (const auto& f : a.fused_nodes) {
        fused.push_back({{"doc_id", f.key.doc_id}, {"node_id", f.key.node_id}, {"provenance", to_string(f.provenance)}});
    }
    nlohmann::json pre = nlohmann::json::array();
    for (const auto& [d, c] : a.pre_budget) pre.push_back({{"doc_id", d}, {"chunk_id", c}});
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : r.chunks) {
        nlohmann::json j{{"doc_id", c.doc_id}, {"chunk_id", c.chunk_id}};
        if (with_text) j["content"] = c.content;
        chunks.push_back(std::move(j));
    }
    return {
        {"status", to_string(r.status)},
        {"mode", to_string(r.mode)},
        {"stage", to_string(r.stage)},
        {"budget", r.budget},
        {"token_count", r.token_count},
        {"docs", {{"llm", r.d_llm}, {"vector", r.d_vector}, {"fusion", r.d_fusion}}},
        {"nodes", {{"llm", to_json_array(r.n_llm)}, {"treexp", to_json_array(r.n_treexp)}}},
        {"chunks", std::move(chunks)},
        {"audit",
         {{"warnings", a.warnings},
          {"unknown_doc_ids", a.unknown_doc_ids},
          {"rejected_nodes", to_json_array(a.rejected_nodes)},
          {"select_calls", a.select_calls},
          {"navigate_calls", a.navigate_calls},
          {"vector_hits", std::move(hits)},
          {"fused_doc_tokens", a.fused_doc_tokens},
          {"treexp_selected", to_json_array(a.treexp_selected)},
          {"treexp_top", to_json_array(a.treexp_top)},
          {"treexp_released", to_json_array(a.treexp_released)},
          {"fused_nodes", std::move(fused)},
          {"fusion_pruned", to_json_array(a.fusion_pruned)},
          {"pre_budget", std::move(pre)},
          {"budget_dropped", a.budget_dropped},
          {"empty_by_budget", a.empty_by_budget}}},
    };
}

}  // namespace fable
