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

// Deterministic stand-ins for the four model roles, used by the offline
// pipeline and the test suites.
//
//  * segment: structural chunking, reported as code point boundaries.
//  * structure: markdown headings drive the outline ("#" titles the root,
//    "##" opens a section, "###" and deeper open a subsection); headingless
//    documents are grouped into fixed-size sections. Summaries are the lead
//    sentences of the covered chunks.
//  * select_docs / navigate_nodes: keyed on "key terms", i.e. query tokens
//    matching a pattern (by default identifier-like tokens mixing letters and
//    digits). A context entry matches when its toc titles or summary contain
//    a key term. select_docs returns every document with a matching entry;
//    navigate_nodes returns the most specific matching nodes (those without a
//    matching descendant).

#include <map>
#include <memory>
#include <regex>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/gateway.hpp"
#include "fable/segmenter.hpp"
#include "fable/text.hpp"
#include "fable/tokenizer.hpp"
#include "fable/tree_builder.hpp"

namespace fable {

inline constexpr const char* kDefaultKeyTermPattern = "(?=[a-z0-9]*[a-z])(?=[a-z0-9]*[0-9])[a-z0-9]{3,}";

struct MockOptions {
    SegmenterSpec segmenter{};
    TokenizerSpec tokenizer{};
    std::string key_term_pattern = kDefaultKeyTermPattern;
    bool match_titles = true;
    bool match_summaries = true;
    std::size_t group_size = 4;  // chunks per section for headingless documents
};

namespace mock {

inline std::vector<std::string> key_terms(const std::string& query, const std::regex& pattern) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (auto& t : text::word_tokens(query)) {
        if (std::regex_match(t, pattern) && seen.insert(t).second) out.push_back(t);
    }
    return out;
}

inline bool entry_matches(const nlohmann::json& entry, const std::vector<std::string>& terms, const MockOptions& opt) {
    std::string haystack;
    if (opt.match_titles && entry.contains("toc")) {
        for (const auto& t : entry["toc"]) haystack += t.get<std::string>() + " ";
    }
    if (opt.match_summaries) haystack += entry.value("summary", std::string{});
    const auto tokens = text::word_tokens(haystack);
    const std::unordered_set<std::string> bag(tokens.begin(), tokens.end());
    for (const auto& term : terms) {
        if (bag.count(term)) return true;
    }
    return false;
}

inline nlohmann::json outline(const nlohmann::json& payload, const MockOptions& opt) {
    const auto doc_id = payload.value("doc_id", std::string{});
    std::vector<Chunk> chunks;
    for (const auto& c : payload.at("chunks")) {
        chunks.push_back({c.at("chunk_id").get<std::string>(), c.at("content").get<std::string>(), doc_id});
    }

    OutlineNode root;
    OutlineNode* section = nullptr;
    OutlineNode* subsection = nullptr;
    bool any_heading = false;
    for (const auto& c : chunks) {
        const auto line = text::trim(text::first_line(text::trim(c.content)));
        const int level = text::heading_level(line);
        if (level == 1 && root.title.empty()) {
            root.title = text::heading_text(line);
            section = subsection = nullptr;
        } else if (level == 1 || level == 2 || (level >= 3 && section == nullptr)) {
            any_heading = true;
            OutlineNode s;
            s.title = text::heading_text(line);
            root.children.push_back(std::move(s));
            section = &root.children.back();
            subsection = nullptr;
        } else if (level >= 3) {
            any_heading = true;
            OutlineNode s;
            s.title = text::heading_text(line);
            section->children.push_back(std::move(s));
            subsection = &section->children.back();
        }
        OutlineNode leaf;
        leaf.chunk = c.chunk_id;
        OutlineNode* container = subsection ? subsection : (section ? section : &root);
        container->children.push_back(std::move(leaf));
    }

    if (!any_heading && chunks.size() > opt.group_size) {
        std::vector<OutlineNode> grouped;
        for (std::size_t i = 0; i < root.children.size(); i += opt.group_size) {
            OutlineNode s;
            for (std::size_t j = i; j < std::min(root.children.size(), i + opt.group_size); ++j) {
                s.children.push_back(root.children[j]);
            }
            grouped.push_back(std::move(s));
        }
        root.children = std::move(grouped);
    }
    if (root.title.empty()) root.title = doc_id;

    std::unordered_map<std::string, const Chunk*> by_id;
    for (const auto& c : chunks) by_id.emplace(c.chunk_id, &c);
    detail::fill_text(root, by_id);
    return to_json(root);
}

inline nlohmann::json merge_root(const nlohmann::json& payload) {
    std::string title;
    for (const auto& t : payload.value("part_titles", nlohmann::json::array())) {
        if (t.is_string() && !t.get<std::string>().empty()) {
            title = t.get<std::string>();
            break;
        }
    }
    if (title.empty()) title = payload.value("doc_id", std::string("Document"));
    std::vector<std::string> parts;
    for (const auto& c : payload.at("children")) {
        const auto s = c.value("summary", std::string{});
        if (!s.empty()) parts.push_back(s);
    }
    return {{"title", title}, {"summary", text::join(parts, " ")}};
}

}  // namespace mock

/// Mock script whose per-role defaults implement the heuristics described at
/// the top of this header.
inline MockScript default_mock_script(const MockOptions& options = {}) {
    auto opt = std::make_shared<const MockOptions>(options);
    auto pattern = std::make_shared<const std::regex>(options.key_term_pattern, std::regex::ECMAScript);
    auto tok = std::make_shared<const Tokenizer>(options.tokenizer);

    MockScript script;
    script.defaults[Role::segment] = [opt, tok](const nlohmann::json& payload) {
        const auto doc = payload.at("text").get<std::string>();
        auto spec = opt->segmenter;
        spec.max_chunk_tokens = payload.value("max_chunk_tokens", spec.max_chunk_tokens);
        spec.target_chunk_tokens = std::min(spec.target_chunk_tokens, spec.max_chunk_tokens);
        nlohmann::json bounds = nlohmann::json::array();
        const auto spans = structural_spans(doc, spec, *tok);
        for (std::size_t i = 1; i < spans.size(); ++i) bounds.push_back(text::byte_to_codepoint(doc, spans[i].begin));
        return nlohmann::json{{"boundaries", bounds}};
    };
    script.defaults[Role::structure] = [opt](const nlohmann::json& payload) {
        if (payload.is_object() && payload.value("task", std::string{}) == "merge_root") return mock::merge_root(payload);
        return mock::outline(payload, *opt);
    };
    script.defaults[Role::select_docs] = [opt, pattern](const nlohmann::json& payload) {
        const auto terms = mock::key_terms(payload.value("query", std::string{}), *pattern);
        nlohmann::json ids = nlohmann::json::array();
        if (!terms.empty()) {
            for (const auto& d : payload.at("documents")) {
                for (const auto& e : d.at("entries")) {
                    if (mock::entry_matches(e, terms, *opt)) {
                        ids.push_back(d.at("doc_id"));
                        break;
                    }
                }
            }
        }
        return nlohmann::json{{"doc_ids", ids}};
    };
    script.defaults[Role::navigate_nodes] = [opt, pattern](const nlohmann::json& payload) {
        const auto terms = mock::key_terms(payload.value("query", std::string{}), *pattern);
        nlohmann::json nodes = nlohmann::json::array();
        if (terms.empty()) return nlohmann::json{{"nodes", nodes}};
        for (const auto& d : payload.at("documents")) {
            std::map<std::string, std::string> parent;
            std::vector<std::string> matching;
            for (const auto& e : d.at("entries")) {
                const auto id = e.at("node_id").get<std::string>();
                parent[id] = e.value("parent", std::string{});
                if (mock::entry_matches(e, terms, *opt)) matching.push_back(id);
            }
            const std::set<std::string> matched(matching.begin(), matching.end());
            std::set<std::string> has_matching_descendant;
            for (const auto& m : matching) {
                for (auto p = parent[m]; !p.empty(); p = parent.count(p) ? parent[p] : std::string{}) {
                    has_matching_descendant.insert(p);
                }
            }
            for (const auto& m : matching) {
                if (!has_matching_descendant.count(m)) nodes.push_back({{"doc_id", d.at("doc_id")}, {"node_id", m}});
            }
        }
        return nlohmann::json{{"nodes", nodes}};
    };
    return script;
}

inline std::unique_ptr<MockGateway> make_mock_gateway(const MockOptions& options = {},
                                                      std::size_t context_window = kDefaultContextWindow) {
    return std::make_unique<MockGateway>(default_mock_script(options), context_window);
}

}  // namespace fable
