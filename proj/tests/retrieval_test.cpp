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

#include "fable/fable.hpp"
#include "fixtures.hpp"

using namespace fable;

namespace {

std::vector<SourceDocument> corpus() {
    return {{"alpha", fixtures::small_doc("Alpha", "qx7a", 3, 3)},
            {"beta", fixtures::small_doc("Beta", "zz42", 3, 3)},
            {"gamma", fixtures::small_doc("Gamma", "", 2, 4)},
            {"delta", fixtures::small_doc("Delta", "zz42", 2, 2)}};
}

class RetrievalTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() { stack = new fixtures::Stack(corpus()); }
    static void TearDownTestSuite() {
        delete stack;
        stack = nullptr;
    }
    static RetrievalConfig rc(std::size_t budget, std::size_t k_doc = 2) {
        RetrievalConfig c;
        c.budget = budget;
        c.k_doc = k_doc;
        return c;
    }
    static fixtures::Stack* stack;
};

fixtures::Stack* RetrievalTest::stack = nullptr;

}  // namespace

TEST_F(RetrievalTest, BuildsOneTreePerDocument) {
    EXPECT_EQ(stack->built.forest.size(), 4u);
    EXPECT_TRUE(stack->built.failures.empty());
    std::size_t nodes = 0;
    for (const auto& [id, doc] : stack->built.forest.documents()) nodes += doc.tree.size();
    EXPECT_EQ(stack->built.index.size(), nodes);
}

TEST_F(RetrievalTest, LargeBudgetReturnsWholeDocuments) {
    const auto r = stack->retriever(rc(1000000)).retrieve("Find zz42", RetrievalMode::automatic);
    EXPECT_EQ(r.status, RetrievalStatus::ok);
    EXPECT_EQ(r.stage, Stage::doc_level);
    EXPECT_EQ((std::vector<std::string>(r.d_llm.begin(), r.d_llm.end())), (std::vector<std::string>{"beta", "delta"}));
    EXPECT_EQ(r.d_fusion.front(), "beta");
    std::size_t want = 0;
    for (const auto& d : r.d_fusion) want += stack->built.forest.chunks(d).size();
    EXPECT_EQ(r.chunks.size(), want);
    EXPECT_EQ(r.chunks.front().doc_id, "beta");
    EXPECT_EQ(r.audit.select_calls, 1u);
}

TEST_F(RetrievalTest, RoutingBoundaryIsInclusive) {
    const auto probe = stack->retriever(rc(1000000)).retrieve("Find zz42");
    const auto total = probe.audit.fused_doc_tokens;
    EXPECT_EQ(stack->retriever(rc(total)).retrieve("Find zz42").stage, Stage::doc_level);
    EXPECT_EQ(stack->retriever(rc(total + 1)).retrieve("Find zz42").stage, Stage::doc_level);
    const auto below = stack->retriever(rc(total - 1)).retrieve("Find zz42");
    EXPECT_EQ(below.stage, Stage::node_level);
    EXPECT_LE(below.token_count, total - 1);
}

TEST_F(RetrievalTest, NodeLevelFindsTaggedParagraph) {
    const auto r = stack->retriever(rc(100)).retrieve("Find qx7a", RetrievalMode::nodes);
    EXPECT_EQ(r.stage, Stage::node_level);
    EXPECT_LE(r.token_count, 100u);
    ASSERT_FALSE(r.n_llm.empty());
    bool found = false;
    for (const auto& c : r.chunks) found |= c.content.find("qx7a") != std::string::npos;
    EXPECT_TRUE(found);
    EXPECT_EQ(r.audit.navigate_calls, 1u);
    EXPECT_FALSE(r.audit.treexp_top.empty());
}

TEST_F(RetrievalTest, ModesSelectPaths) {
    const auto treexp = stack->retriever(rc(60)).retrieve("Find qx7a", RetrievalMode::treexp);
    EXPECT_TRUE(treexp.n_llm.empty());
    EXPECT_EQ(treexp.audit.navigate_calls, 0u);
    EXPECT_FALSE(treexp.n_treexp.empty());

    const auto llm = stack->retriever(rc(60)).retrieve("Find qx7a", RetrievalMode::llm_nodes);
    EXPECT_TRUE(llm.n_treexp.empty());
    EXPECT_FALSE(llm.n_llm.empty());

    const auto docs = stack->retriever(rc(60)).retrieve("Find qx7a", RetrievalMode::docs);
    EXPECT_EQ(docs.stage, Stage::doc_level);
    EXPECT_FALSE(docs.d_vector.empty());

    const auto llm_docs = stack->retriever(rc(60)).retrieve("Find qx7a", RetrievalMode::llm_docs);
    EXPECT_TRUE(llm_docs.d_vector.empty());
    EXPECT_TRUE(llm_docs.audit.vector_hits.empty());
    EXPECT_EQ(llm_docs.d_fusion, (std::vector<std::string>{"alpha"}));
}

TEST_F(RetrievalTest, NoCandidatesWhenNothingMatches) {
    const auto r = stack->retriever(rc(100)).retrieve("plain words only", RetrievalMode::llm_docs);
    EXPECT_EQ(r.status, RetrievalStatus::no_candidates);
    EXPECT_TRUE(r.chunks.empty());
}

TEST_F(RetrievalTest, TinyBudgetMayReturnNothing) {
    const auto r = stack->retriever(rc(1)).retrieve("Find qx7a", RetrievalMode::nodes);
    EXPECT_LE(r.token_count, 1u);
    if (r.chunks.empty()) {
        EXPECT_TRUE(r.audit.empty_by_budget || r.audit.pre_budget.empty());
    }
}

TEST_F(RetrievalTest, LlmFailureFallsBackToVectorPath) {
    FaultInjectingGateway broken(*stack->gateway, {Role::select_docs, Role::navigate_nodes});
    const Retriever r(stack->built.forest, stack->built.index, stack->embedder, broken, rc(60));
    const auto out = r.retrieve("Find qx7a", RetrievalMode::nodes);
    EXPECT_EQ(out.status, RetrievalStatus::ok);
    EXPECT_TRUE(out.d_llm.empty());
    EXPECT_TRUE(out.n_llm.empty());
    EXPECT_FALSE(out.chunks.empty());
    EXPECT_EQ(out.audit.warnings.size(), 2u);
}

TEST_F(RetrievalTest, OverflowShardsTheDocumentList) {
    auto small = make_mock_gateway({}, 700);
    const Retriever r(stack->built.forest, stack->built.index, stack->embedder, *small, rc(1000000));
    const auto out = r.retrieve("Find zz42");
    EXPECT_GT(out.audit.select_calls, 1u);
    EXPECT_TRUE(out.audit.warnings.empty());
    const auto ref = stack->retriever(rc(1000000)).retrieve("Find zz42");
    EXPECT_EQ(std::set<std::string>(out.d_llm.begin(), out.d_llm.end()), std::set<std::string>(ref.d_llm.begin(), ref.d_llm.end()));
}

TEST_F(RetrievalTest, UnknownIdsFromModelAreAudited) {
    MockScript script;
    script.defaults[Role::select_docs] = [](const nlohmann::json&) { return nlohmann::json{{"doc_ids", {"ghost", "beta", "beta"}}}; };
    script.defaults[Role::navigate_nodes] = [](const nlohmann::json&) {
        return nlohmann::json{{"nodes", {{{"doc_id", "beta"}, {"node_id", "nope"}}, {{"doc_id", "beta"}, {"node_id", "n0000"}}}}};
    };
    MockGateway gw(script);
    const Retriever r(stack->built.forest, stack->built.index, stack->embedder, gw, rc(40, 1));
    const auto out = r.retrieve("anything", RetrievalMode::llm_nodes);
    EXPECT_EQ(out.d_llm, (std::vector<std::string>{"beta"}));
    EXPECT_EQ(out.audit.unknown_doc_ids, (std::vector<std::string>{"ghost"}));
    ASSERT_EQ(out.audit.rejected_nodes.size(), 1u);
    EXPECT_EQ(out.n_llm, (std::vector<NodeKey>{{"beta", "n0000"}}));
}

TEST_F(RetrievalTest, DimensionMismatchIsRejected) {
    const HashEmbedder other(64);
    EXPECT_THROW(Retriever(stack->built.forest, stack->built.index, other, *stack->gateway, rc(10)), Error);
    auto bad = rc(10);
    bad.k_doc = 0;
    EXPECT_THROW(stack->retriever(bad), Error);
}

TEST_F(RetrievalTest, RepeatedQueriesSerializeIdentically) {
    for (auto mode : {RetrievalMode::automatic, RetrievalMode::nodes, RetrievalMode::treexp}) {
        const auto a = to_json(stack->retriever(rc(80)).retrieve("Find zz42 qx7a", mode)).dump();
        const auto b = to_json(stack->retriever(rc(80), {4, BudgetPolicy::prefix, 4, 20}).retrieve("Find zz42 qx7a", mode)).dump();
        EXPECT_EQ(a, b);
    }
}

TEST_F(RetrievalTest, JsonCarriesAuditAndOptionalText) {
    const auto r = stack->retriever(rc(60)).retrieve("Find qx7a", RetrievalMode::nodes);
    const auto j = to_json(r, false);
    EXPECT_EQ(j["mode"], "nodes");
    EXPECT_EQ(j["stage"], "node_level");
    EXPECT_TRUE(j["audit"].contains("treexp_selected"));
    EXPECT_FALSE(j["chunks"].empty());
    EXPECT_FALSE(j["chunks"][0].contains("content"));
    EXPECT_TRUE(to_json(r)["chunks"][0].contains("content"));
}

TEST_F(RetrievalTest, RandomQueriesKeepOutputProperties) {
    std::mt19937_64 rng(4);
    const char* terms[] = {"qx7a", "zz42", "part", "words", "ab9z"};
    const RetrievalMode modes[] = {RetrievalMode::automatic, RetrievalMode::docs, RetrievalMode::nodes, RetrievalMode::treexp,
                                   RetrievalMode::llm_nodes};
    for (int i = 0; i < 300; ++i) {
        std::string query = "find";
        for (std::size_t k = rng() % 4; k-- > 0;) query += std::string(" ") + terms[rng() % 5];
        const auto mode = modes[rng() % 5];
        const auto r = stack->retriever(rc(1 + rng() % 600, 1 + rng() % 4)).retrieve(query, mode);
        EXPECT_LE(r.token_count, r.budget);
        // fused documents cover both paths
        const std::set<std::string> fused(r.d_fusion.begin(), r.d_fusion.end());
        for (const auto& d : r.d_llm) EXPECT_TRUE(fused.count(d));
        for (const auto& d : r.d_vector) EXPECT_TRUE(fused.count(d));
        if (mode == RetrievalMode::automatic && r.status == RetrievalStatus::ok) {
            EXPECT_EQ(r.stage == Stage::doc_level, r.audit.fused_doc_tokens <= r.budget);
        }
        // no repeats; document order kept within each document's segment
        std::set<std::pair<std::string, std::string>> seen;
        std::map<std::string, std::size_t> last;
        for (const auto& c : r.chunks) {
            EXPECT_TRUE(seen.emplace(c.doc_id, c.chunk_id).second);
            const auto pos = stack->built.forest.chunk_position(c.doc_id, c.chunk_id);
            if (last.count(c.doc_id)) {
                EXPECT_GT(pos, last[c.doc_id]);
            }
            last[c.doc_id] = pos;
        }
        // surviving fused nodes are pairwise unrelated
        for (const auto& a : r.audit.fused_nodes) {
            for (const auto& b : r.audit.fused_nodes) {
                if (a.key.doc_id == b.key.doc_id) {
                    EXPECT_FALSE(stack->built.forest.tree(a.key.doc_id).is_ancestor(a.key.node_id, b.key.node_id));
                }
            }
        }
        for (std::size_t k = 1; k < r.audit.vector_hits.size(); ++k) {
            EXPECT_GE(r.audit.vector_hits[k - 1].score, r.audit.vector_hits[k].score);
        }
    }
}

TEST(RetrievalModes, ParseNames) {
    for (const char* name : {"auto", "llm-docs", "docs", "llm-nodes", "nodes", "treexp"}) {
        EXPECT_EQ(to_string(parse_retrieval_mode(name)), name);
    }
    EXPECT_THROW(parse_retrieval_mode("hybrid"), Error);
}
