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

// Prompt bundle. Bump kPromptBundleVersion whenever any template or schema
// text changes; the version is stored in every index's meta record.

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace fable {

inline constexpr std::string_view kPromptBundleVersion = "fable-prompts-1";

enum class Role { segment, structure, select_docs, navigate_nodes };

inline std::string_view to_string(Role role) {
    switch (role) {
        case Role::segment: return "segment";
        case Role::structure: return "structure";
        case Role::select_docs: return "select_docs";
        case Role::navigate_nodes: return "navigate_nodes";
    }
    return "segment";
}

namespace prompts {

inline constexpr std::string_view kSystem =
    "You are a retrieval component inside a document indexing system. "
    "Respond only with JSON matching the schema you are given. Do not add prose, "
    "comments or code fences.";

inline constexpr std::string_view kSegment =
    "Split the document below into semantically self-contained chunks aligned with "
    "paragraphs or topical shifts. Never split inside a sentence. Do not rewrite the "
    "text: return the code point offsets at which each chunk after the first begins, "
    "in increasing order. No chunk may exceed {{max_chunk_tokens}} tokens.\n\n"
    "Schema: {\"boundaries\": [integer, ...]}\n\nDocument:\n{{text}}";

inline constexpr std::string_view kStructureOutline =
    "Build a hierarchical table of contents over the ordered chunks below. Every "
    "chunk_id must appear exactly once, in the given order. Nest headings at most "
    "{{max_depth}} levels deep counting the root and the chunk level. Give every "
    "heading a concise title and a summary of everything beneath it.\n\n"
    "Schema: {\"title\": string, \"summary\": string, \"children\": [ heading | {\"chunk\": chunk_id} ]} "
    "where heading has the same shape as the root.\n\nChunks:\n{{chunks}}";

inline constexpr std::string_view kStructureMerge =
    "The sections below are consecutive parts of one document. Write a title and a "
    "summary for the whole document that stays coherent across all parts.\n\n"
    "Schema: {\"title\": string, \"summary\": string}\n\nSections:\n{{children}}";

inline constexpr std::string_view kSelectDocs =
    "Query: {{query}}\n\nEach document below is described by its table of contents "
    "entries (toc path and summary). Select every document that may contain evidence "
    "for answering the query, most relevant first.\n\n"
    "Schema: {\"doc_ids\": [string, ...]}\n\nDocuments:\n{{documents}}";

inline constexpr std::string_view kNavigateNodes =
    "Query: {{query}}\n\nBelow are the section nodes of candidate documents. Select the "
    "most specific nodes whose content is needed to answer the query. Selecting a node "
    "selects everything beneath it.\n\n"
    "Schema: {\"nodes\": [{\"doc_id\": string, \"node_id\": string}, ...]}\n\nNodes:\n{{documents}}";

inline constexpr std::string_view kRepair =
    "Your previous reply was rejected: {{error}}. Reply again with JSON only, matching "
    "the schema exactly.";

inline std::string substitute(std::string_view tmpl, std::string_view key, std::string_view value) {
    std::string out(tmpl);
    const std::string needle = "{{" + std::string(key) + "}}";
    for (auto pos = out.find(needle); pos != std::string::npos; pos = out.find(needle, pos + value.size())) {
        out.replace(pos, needle.size(), value);
    }
    return out;
}

struct Rendered {
    std::string system;
    std::string user;
};

inline std::string dump_field(const nlohmann::json& payload, const char* key) {
    if (!payload.contains(key)) return {};
    const auto& v = payload.at(key);
    return v.is_string() ? v.get<std::string>() : v.dump(1);
}

/// Renders the role's template over the structured payload.
inline Rendered render(Role role, const nlohmann::json& payload) {
    std::string user;
    switch (role) {
        case Role::segment:
            user = substitute(kSegment, "max_chunk_tokens", dump_field(payload, "max_chunk_tokens"));
            user = substitute(user, "text", dump_field(payload, "text"));
            break;
        case Role::structure:
            if (payload.is_object() && payload.value("task", std::string{}) == "merge_root") {
                user = substitute(kStructureMerge, "children", dump_field(payload, "children"));
            } else {
                user = substitute(kStructureOutline, "max_depth", dump_field(payload, "max_depth"));
                user = substitute(user, "chunks", dump_field(payload, "chunks"));
            }
            break;
        case Role::select_docs:
            user = substitute(kSelectDocs, "query", dump_field(payload, "query"));
            user = substitute(user, "documents", dump_field(payload, "documents"));
            break;
        case Role::navigate_nodes:
            user = substitute(kNavigateNodes, "query", dump_field(payload, "query"));
            user = substitute(user, "documents", dump_field(payload, "documents"));
            break;
    }
    return {std::string(kSystem), std::move(user)};
}

}  // namespace prompts
}  // namespace fable
