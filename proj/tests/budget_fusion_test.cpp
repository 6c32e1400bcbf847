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

#include <gtest/gtest.h>

#include <random>

#include "fable/fable.hpp"
#include "oracles.hpp"

using namespace fable;

namespace {

std::vector<Chunk> random_chunks(std::mt19937_64& rng, std::size_t n) {
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({"c" + std::to_string(i), std::string(1 + rng() % 400, 'x'), "d" + std::to_string(i % 3)});
    }
    return out;
}

std::vector<oracle::RawTree> random_forest(std::mt19937_64& rng, int docs, int max_nodes) {
    std::vector<oracle::RawTree> trees;
    for (int d = 0; d < docs; ++d) {
        const int n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_nodes - 1));
        trees.push_back(oracle::materialize(oracle::random_shape(rng, n, 4), "doc" + std::to_string(d), 4, rng, true));
    }
    return trees;
}

std::vector<NodeKey> random_picks(std::mt19937_64& rng, const std::vector<oracle::RawTree>& trees, std::size_t n) {
    std::vector<NodeKey> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = trees[rng() % trees.size()];
        out.push_back({t.doc_id, t.nodes[rng() % t.nodes.size()].node_id});
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> ids(const std::vector<Chunk>& chunks) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& c : chunks) out.emplace_back(c.doc_id, c.chunk_id);
    return out;
}

}  // namespace

TEST(Budget, PrefixMatchesCumulativeSumOracle) {
    std::mt19937_64 rng(31);
    const Tokenizer tok;
    for (int i = 0; i < 2000; ++i) {
        const auto chunks = random_chunks(rng, rng() % 30);
        const std::size_t budget = 1 + rng() % 2000;
        std::vector<std::size_t> lengths;
        for (const auto& c : chunks) lengths.push_back(tok.count(c.content));
        const auto r = budget_control(chunks, budget, tok);
        const auto k = oracle::prefix_length(lengths, budget);
        ASSERT_EQ(r.chunks.size(), k);
        EXPECT_TRUE(std::equal(r.chunks.begin(), r.chunks.end(), chunks.begin()));
        EXPECT_LE(r.spent, budget);
        EXPECT_EQ(r.spent + r.remaining, budget);
        EXPECT_EQ(r.dropped, chunks.size() - k);
        EXPECT_EQ(r.empty_by_budget, !chunks.empty() && k == 0);
        const auto again = budget_control(r.chunks, budget, tok);
        EXPECT_TRUE(std::equal(again.chunks.begin(), again.chunks.end(), r.chunks.begin(), r.chunks.end()));
    }
}

TEST(Budget, SkipGreedyKeepsLaterChunksThatFit) {
    const Tokenizer tok;
    const std::vector<Chunk> chunks{{"a", std::string(40, 'x'), "d"}, {"b", std::string(400, 'x'), "d"}, {"c", std::string(20, 'x'), "d"}};
    EXPECT_EQ(budget_control(chunks, 20, tok).chunks.size(), 1u);
    const auto skip = budget_control(chunks, 20, tok, BudgetPolicy::skip_greedy);
    ASSERT_EQ(skip.chunks.size(), 2u);
    EXPECT_EQ(skip.chunks[1].chunk_id, "c");
    EXPECT_EQ(skip.spent, 15u);
    EXPECT_EQ(parse_budget_policy("skip_greedy"), BudgetPolicy::skip_greedy);
    EXPECT_THROW(parse_budget_policy("knapsack"), Error);
}

TEST(Budget, ZeroLengthInputIsNotEmptyByBudget) {
    const auto r = budget_control({}, 10, Tokenizer{});
    EXPECT_FALSE(r.empty_by_budget);
    EXPECT_EQ(r.remaining, 10u);
}

TEST(TokenLedger, MassIsSubtreeTokenSum) {
    std::mt19937_64 rng(6);
    const Tokenizer tok;
    for (int round = 0; round < 30; ++round) {
        const auto trees = random_forest(rng, 3, 30);
        const auto forest = oracle::to_forest(trees);
        const TokenLedger ledger(forest, tok);
        std::size_t total = 0;
        for (const auto& t : trees) {
            const oracle::View view(t);
            for (const auto& n : t.nodes) {
                std::size_t want = 0;
                for (const auto& c : view.leaf_chunks(n.node_id)) want += tok.count(view.chunk(c).content);
                EXPECT_EQ(ledger.mass(t.doc_id, n.node_id), want);
            }
            for (const auto& c : t.chunks) {
                total += tok.count(c.content);
                EXPECT_EQ(ledger.chunk_tokens(t.doc_id, c.chunk_id), tok.count(c.content));
            }
        }
        EXPECT_EQ(ledger.total(), total);
    }
}

TEST(FuseDocs, OrderedUnionWithLlmFirst) {
    EXPECT_EQ(fuse_docs({"b", "a", "b"}, {"c", "a", "d"}), (std::vector<std::string>{"b", "a", "c", "d"}));
    EXPECT_EQ(fuse_docs({}, {"x"}), (std::vector<std::string>{"x"}));
    std::mt19937_64 rng(2);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::string> a, b;
        for (std::size_t k = rng() % 8; k-- > 0;) a.push_back("d" + std::to_string(rng() % 10));
        for (std::size_t k = rng() % 8; k-- > 0;) b.push_back("d" + std::to_string(rng() % 10));
        const auto f = fuse_docs(a, b);
        std::set<std::string> want(a.begin(), a.end());
        want.insert(b.begin(), b.end());
        EXPECT_EQ(std::set<std::string>(f.begin(), f.end()), want);
        EXPECT_EQ(f.size(), want.size());
        // every LLM document precedes every vector-only document
        std::set<std::string> llm(a.begin(), a.end());
        bool in_tail = false;
        for (const auto& d : f) {
            if (!llm.count(d)) in_tail = true;
            else EXPECT_FALSE(in_tail);
        }
    }
}

TEST(NodeFusion, MatchesTranscriptionOnRandomForests) {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 300; ++round) {
        const auto trees = random_forest(rng, 1 + static_cast<int>(rng() % 5), 25);
        const auto forest = oracle::to_forest(trees);
        const auto a = random_picks(rng, trees, rng() % 8);
        const auto b = random_picks(rng, trees, rng() % 8);
        const auto got = node_fusion(a, b, forest);
        ASSERT_EQ(ids(got.chunks), oracle::node_fusion(a, b, trees));
        // survivors and pruned nodes partition the distinct picks
        std::set<NodeKey> all(a.begin(), a.end());
        all.insert(b.begin(), b.end());
        EXPECT_EQ(got.nodes.size() + got.pruned.size(), all.size());
    }
}

TEST(NodeFusion, ProvenanceAndPruning) {
    std::mt19937_64 rng(1);
    // root -> {s1 -> {l1, l2}, l3}
    oracle::Shape shape{{-1, 0, 1, 1, 0}};
    const auto raw = oracle::materialize(shape, "d", 4, rng);
    const auto forest = oracle::to_forest({raw});
    const NodeKey s1{"d", "n0001"}, l2{"d", "n0003"}, l3{"d", "n0004"};
    const auto r = node_fusion({l3, s1}, {s1, l2}, forest);
    ASSERT_EQ(r.nodes.size(), 2u);
    EXPECT_EQ(r.nodes[0], (FusedNode{s1, Provenance::both}));  // first by position
    EXPECT_EQ(r.nodes[1], (FusedNode{l3, Provenance::llm}));
    EXPECT_EQ(r.pruned, (std::vector<NodeKey>{l2}));
    EXPECT_EQ(r.chunks.size(), 3u);
    EXPECT_THROW(node_fusion({{"d", "nope"}}, {}, forest), Error);
    EXPECT_TRUE(node_fusion({}, {}, forest).chunks.empty());
}

TEST(NodeFusion, DocumentsRankedBySurvivingNodes) {
    std::mt19937_64 rng(1);
    oracle::Shape shape{{-1, 0, 1, 1, 0}};
    const auto a = oracle::materialize(shape, "a", 4, rng);
    const auto b = oracle::materialize(shape, "b", 4, rng);
    const auto forest = oracle::to_forest({a, b});
    // a's only LLM node is pruned by a treexp ancestor, so b leads
    const auto r = node_fusion({{"a", "n0002"}, {"b", "n0001"}}, {{"a", "n0000"}}, forest);
    ASSERT_EQ(r.nodes.size(), 2u);
    EXPECT_EQ(r.nodes[0].key.doc_id, "b");
    EXPECT_EQ(r.nodes[1], (FusedNode{{"a", "n0000"}, Provenance::treexp}));
}
