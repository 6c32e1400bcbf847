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

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fable/error.hpp"
#include "fable/forest.hpp"
#include "fable/tokenizer.hpp"

namespace fable {

/// Token counts of every chunk in a forest, with per-document prefix sums so
/// the mass of any subtree is O(1).
class TokenLedger {
public:
    TokenLedger(const Forest& forest, const Tokenizer& tok) : forest_(forest) {
        for (const auto& [doc_id, doc] : forest.documents()) {
            auto& prefix = prefix_[doc_id];
            prefix.assign(1, 0);
            for (const auto& c : doc.chunks) prefix.push_back(prefix.back() + tok.count(c.content));
        }
    }

    std::size_t chunk_tokens(std::string_view doc_id, std::string_view chunk_id) const {
        const auto& p = prefix(doc_id);
        const auto i = forest_.chunk_position(doc_id, chunk_id);
        return p[i + 1] - p[i];
    }

    /// Summed chunk tokens under node.
    std::size_t mass(std::string_view doc_id, std::string_view node_id) const {
        const auto [b, e] = forest_.tree(doc_id).leaf_span(node_id);
        const auto& p = prefix(doc_id);
        return p[e] - p[b];
    }

    std::size_t mass(const NodeKey& k) const { return mass(k.doc_id, k.node_id); }

    std::size_t doc_tokens(std::string_view doc_id) const { return prefix(doc_id).back(); }

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& [_, p] : prefix_) t += p.back();
        return t;
    }

private:
    const std::vector<std::size_t>& prefix(std::string_view doc_id) const {
        auto it = prefix_.find(std::string(doc_id));
        if (it == prefix_.end()) throw Error(ErrorKind::not_found, "document '" + std::string(doc_id) + "'");
        return it->second;
    }

    const Forest& forest_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> prefix_;
};

enum class BudgetPolicy { prefix, skip_greedy };

inline std::string_view to_string(BudgetPolicy p) { return p == BudgetPolicy::prefix ? "prefix" : "skip_greedy"; }

inline BudgetPolicy parse_budget_policy(std::string_view s) {
    if (s == "prefix") return BudgetPolicy::prefix;
    if (s == "skip_greedy") return BudgetPolicy::skip_greedy;
    throw Error(ErrorKind::configuration, "unknown budget policy '" + std::string(s) + "'");
}

struct BudgetResult {
    std::vector<Chunk> chunks;
    std::size_t spent = 0;
    std::size_t remaining = 0;
    std::size_t dropped = 0;     // input chunks not kept
    bool empty_by_budget = false;  // input was non-empty but nothing fit
};

/// Keeps the longest prefix whose summed token counts stay within budget.
/// skip_greedy instead walks the whole list and keeps every chunk that still
/// fits, preserving order.
inline BudgetResult budget_control(std::span<const Chunk> ordered, std::size_t budget, const Tokenizer& tok,
                                   BudgetPolicy policy = BudgetPolicy::prefix) {
    BudgetResult r;
    for (const auto& c : ordered) {
        const auto t = tok.count(c.content);
        if (r.spent + t <= budget) {
            r.spent += t;
            r.chunks.push_back(c);
        } else if (policy == BudgetPolicy::prefix) {
            break;
        }
    }
    r.remaining = budget - r.spent;
    r.dropped = ordered.size() - r.chunks.size();
    r.empty_by_budget = !ordered.empty() && r.chunks.empty();
    return r;
}

/// Summed per-chunk token counts.
inline std::size_t chunk_tokens(std::span<const Chunk> chunks, const Tokenizer& tok) {
    std::size_t t = 0;
    for (const auto& c : chunks) t += tok.count(c.content);
    return t;
}

}  // namespace fable
