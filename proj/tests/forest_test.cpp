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
#include <sstream>

#include "fable/fable.hpp"
#include "oracles.hpp"

using namespace fable;

namespace {

TreeNode internal(std::string id, NodeKind kind, std::vector<std::string> children) {
    TreeNode n;
    n.node_id = std::move(id);
    n.kind = kind;
    n.title = "t";
    n.summary = "s";
    n.children = std::move(children);
    return n;
}

TreeNode leaf(std::string id, std::string chunk) {
    TreeNode n;
    n.node_id = std::move(id);
    n.chunk_ref = std::move(chunk);
    return n;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::io;
}

std::vector<TreeNode> basic_nodes() {
    return {internal("r", NodeKind::root, {"s1", "l3"}), internal("s1", NodeKind::section, {"l1", "l2"}),
            leaf("l1", "c1"), leaf("l2", "c2"), leaf("l3", "c3")};
}

std::vector<Chunk> basic_chunks() { return {{"c1", "one", "d"}, {"c2", "two", "d"}, {"c3", "three", "d"}}; }

}  // namespace

TEST(SemanticTree, IndexesBasicTree) {
    const SemanticTree t("d", basic_nodes(), "r", 3);
    EXPECT_EQ(t.size(), 5u);
    EXPECT_EQ(t.height(), 3);
    EXPECT_EQ(t.depth("r"), 1);
    EXPECT_EQ(t.depth("l1"), 3);
    EXPECT_EQ(t.preorder(), (std::vector<std::string>{"r", "s1", "l1", "l2", "l3"}));
    EXPECT_EQ(t.chunk_refs(), (std::vector<std::string>{"c1", "c2", "c3"}));
    EXPECT_EQ(t.leaf_span("s1"), (std::pair<std::size_t, std::size_t>{0, 2}));
    EXPECT_EQ(t.ancestors("l2"), (std::vector<std::string>{"r", "s1"}));
    EXPECT_EQ(t.descendants("s1"), (std::set<std::string>{"l1", "l2"}));
    EXPECT_TRUE(t.is_ancestor("r", "l3"));
    EXPECT_FALSE(t.is_ancestor("s1", "l3"));
    EXPECT_FALSE(t.is_ancestor("s1", "s1"));
    EXPECT_EQ(t.toc_path("s1"), (std::vector<std::string>{"t", "t"}));
    EXPECT_THROW(t.toc_path("l1"), Error);
    EXPECT_EQ(kind_of([&] { t.depth("zz"); }), ErrorKind::not_found);
}

TEST(SemanticTree, RejectsBrokenStructure) {
    auto nodes = basic_nodes();
    auto with = [&](auto edit) {
        auto n = basic_nodes();
        edit(n);
        return kind_of([&] { SemanticTree("d", n, "r", 3); });
    };
    EXPECT_EQ(with([](auto& n) { n[1].children.push_back("l3"); }), ErrorKind::invariant_violation);  // two parents
    EXPECT_EQ(with([](auto& n) { n[0].children.push_back("ghost"); }), ErrorKind::invariant_violation);
    EXPECT_EQ(with([](auto& n) { n[3].chunk_ref = "c1"; }), ErrorKind::invariant_violation);  // duplicate ref
    EXPECT_EQ(with([](auto& n) { n[1].kind = NodeKind::subsection; }), ErrorKind::invariant_violation);
    EXPECT_EQ(with([](auto& n) { n[1].children.clear(); }), ErrorKind::invariant_violation);
    EXPECT_EQ(with([](auto& n) { n[2].title = "x"; }), ErrorKind::invariant_violation);
    EXPECT_EQ(with([](auto& n) { n[1].summary.clear(); }), ErrorKind::invariant_violation);
    EXPECT_EQ(with([](auto& n) { n.push_back(leaf("orphan", "c9")); }), ErrorKind::invariant_violation);
    EXPECT_EQ(with([](auto& n) { n[1].children.push_back("s1"); }), ErrorKind::invariant_violation);  // cycle
    EXPECT_EQ(kind_of([&] { SemanticTree("d", nodes, "r", 2); }), ErrorKind::invariant_violation);    // too deep
    EXPECT_EQ(kind_of([&] { SemanticTree("d", nodes, "s1", 3); }), ErrorKind::invariant_violation);   // root kind
}

TEST(SemanticTree, AncestryMatchesParentWalkOnRandomTrees) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        const int n = 2 + static_cast<int>(rng() % 30);
        const int d = 2 + static_cast<int>(rng() % 5);
        const auto raw = oracle::materialize(oracle::random_shape(rng, n, d), "doc", d, rng, true);
        const auto tree = oracle::to_tree(raw);
        const oracle::View view(raw);
        for (const auto& a : raw.nodes) {
            EXPECT_EQ(tree.depth(a.node_id), view.depth(a.node_id));
            for (const auto& b : raw.nodes) {
                ASSERT_EQ(tree.is_ancestor(a.node_id, b.node_id), view.is_ancestor(a.node_id, b.node_id));
            }
            const auto [lb, le] = tree.leaf_span(a.node_id);
            const auto leaves = view.leaf_chunks(a.node_id);
            ASSERT_EQ(le - lb, leaves.size());
            EXPECT_EQ(tree.chunk_refs()[lb], leaves.front());
        }
        // one root, |edges| = |nodes| - 1, every node reached once
        std::size_t edges = 0;
        for (const auto& id : tree.preorder()) edges += tree.node(id).children.size();
        EXPECT_EQ(edges + 1, raw.nodes.size());
        const auto order = tree.preorder();
        EXPECT_EQ(std::set<std::string>(order.begin(), order.end()).size(), raw.nodes.size());
        EXPECT_FALSE(tree.parent(tree.root_id()).has_value());
    }
}

TEST(Forest, AddChecksChunkAlignment) {
    Forest f;
    f.add(SemanticTree("d", basic_nodes(), "r", 3), basic_chunks());
    EXPECT_EQ(f.size(), 1u);
    EXPECT_EQ(f.chunk("d", "c2").content, "two");
    const auto span = f.subtree_chunks("d", "s1");
    ASSERT_EQ(span.size(), 2u);
    EXPECT_EQ(span[1].chunk_id, "c2");

    EXPECT_EQ(kind_of([&] { f.add(SemanticTree("d", basic_nodes(), "r", 3), basic_chunks()); }), ErrorKind::invalid_argument);
    Forest g;
    auto chunks = basic_chunks();
    std::swap(chunks[0], chunks[1]);
    EXPECT_EQ(kind_of([&] { g.add(SemanticTree("d", basic_nodes(), "r", 3), chunks); }), ErrorKind::invariant_violation);
    chunks = basic_chunks();
    chunks.push_back({"c4", "four", "d"});
    EXPECT_EQ(kind_of([&] { g.add(SemanticTree("d", basic_nodes(), "r", 3), chunks); }), ErrorKind::invariant_violation);
    chunks = basic_chunks();
    chunks[2].content.clear();
    EXPECT_EQ(kind_of([&] { g.add(SemanticTree("d", basic_nodes(), "r", 3), chunks); }), ErrorKind::invariant_violation);
    chunks = basic_chunks();
    chunks[0].doc_id = "other";
    EXPECT_EQ(kind_of([&] { g.add(SemanticTree("d", basic_nodes(), "r", 3), chunks); }), ErrorKind::invariant_violation);
    EXPECT_EQ(kind_of([&] { g.document("nope"); }), ErrorKind::not_found);
}

TEST(ForestIO, RoundTripIsIdentity) {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 30; ++round) {
        std::vector<oracle::RawTree> trees;
        const int docs = 1 + static_cast<int>(rng() % 6);
        for (int d = 0; d < docs; ++d) {
            trees.push_back(oracle::materialize(oracle::random_shape(rng, 2 + static_cast<int>(rng() % 25), 4),
                                                "doc" + std::to_string(d), 4, rng, true));
        }
        auto forest = oracle::to_forest(trees);
        forest.set_meta({kForestFormatVersion, RetrievalConfig{4, 2, 3, 1000, {}}, "bundle-x"});
        std::stringstream a;
        write_forest(forest, a);
        const auto back = read_forest(a);
        EXPECT_EQ(back, forest);
        std::stringstream b;
        write_forest(back, b);
        EXPECT_EQ(a.str(), b.str());
    }
}

TEST(ForestIO, KeepsUnicodeAndEscapes) {
    Forest f;
    std::vector<Chunk> chunks{{"c1", "caf\xc3\xa9 \"quoted\"\n\ttab", "d"}, {"c2", "two", "d"}, {"c3", "three", "d"}};
    f.add(SemanticTree("d", basic_nodes(), "r", 3), chunks);
    std::stringstream s;
    write_forest(f, s);
    EXPECT_EQ(read_forest(s).chunk("d", "c1").content, chunks[0].content);
}

TEST(ForestIO, RejectsBadInput) {
    Forest f;
    f.add(SemanticTree("d", basic_nodes(), "r", 3), basic_chunks());
    std::stringstream s;
    write_forest(f, s);
    const auto good = s.str();

    auto read = [](const std::string& text) {
        std::stringstream in(text);
        return kind_of([&] { read_forest(in); });
    };
    auto version = good;
    version.replace(version.find("\"format_version\":1"), 18, "\"format_version\":9");
    EXPECT_EQ(read(version), ErrorKind::version_mismatch);
    EXPECT_EQ(read(good + "{not json\n"), ErrorKind::malformed_file);
    EXPECT_EQ(read(good + "{\"t\":\"mystery\"}\n"), ErrorKind::malformed_file);
    EXPECT_EQ(read(good.substr(good.find('\n') + 1)), ErrorKind::malformed_file);  // meta missing
    EXPECT_EQ(read(""), ErrorKind::malformed_file);

    // dropping a chunk record leaves a dangling leaf
    const auto pos = good.find("\"c2\"");
    const auto line_begin = good.rfind('\n', pos) + 1;
    const auto line_end = good.find('\n', pos) + 1;
    auto dangling = good;
    dangling.erase(line_begin, line_end - line_begin);
    EXPECT_NE(read(dangling), ErrorKind::io);
}
