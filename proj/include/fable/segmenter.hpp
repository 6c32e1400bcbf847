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

#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/error.hpp"
#include "fable/forest.hpp"
#include "fable/gateway.hpp"
#include "fable/text.hpp"
#include "fable/tokenizer.hpp"

namespace fable {

enum class SegmenterBackend { llm, structural };

inline std::string_view to_string(SegmenterBackend b) { return b == SegmenterBackend::llm ? "llm" : "structural"; }

inline SegmenterBackend parse_segmenter_backend(std::string_view s) {
    if (s == "llm") return SegmenterBackend::llm;
    if (s == "structural") return SegmenterBackend::structural;
    throw Error(ErrorKind::configuration, "unknown segmenter backend '" + std::string(s) + "'");
}

struct SegmenterSpec {
    SegmenterBackend backend = SegmenterBackend::structural;
    std::size_t target_chunk_tokens = 256;
    std::size_t max_chunk_tokens = 512;

    void validate() const {
        if (target_chunk_tokens < 1 || max_chunk_tokens < 1) {
            throw Error(ErrorKind::configuration, "chunk token sizes must be positive");
        }
        if (target_chunk_tokens > max_chunk_tokens) {
            throw Error(ErrorKind::configuration, "target_chunk_tokens exceeds max_chunk_tokens");
        }
    }

    bool operator==(const SegmenterSpec&) const = default;
};

/// Byte range [begin, end) of the normalized document.
struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    bool heading = false;
};

/// CRLF/CR to LF, trailing whitespace stripped from every line, the whole
/// document trimmed.
inline std::string normalize_document(std::string_view raw) {
    std::string unix;
    unix.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\r') {
            unix += '\n';
            if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
        } else {
            unix += raw[i];
        }
    }
    std::string out;
    out.reserve(unix.size());
    std::size_t pos = 0;
    while (pos <= unix.size()) {
        auto nl = unix.find('\n', pos);
        if (nl == std::string::npos) nl = unix.size();
        auto line = std::string_view(unix).substr(pos, nl - pos);
        while (!line.empty() && text::is_space(line.back())) line.remove_suffix(1);
        out.append(line);
        if (nl < unix.size()) out += '\n';
        pos = nl + 1;
    }
    return std::string(text::trim(out));
}

namespace detail {

inline TextSpan trimmed(std::string_view doc, std::size_t b, std::size_t e, bool heading) {
    while (b < e && text::is_space(doc[b])) ++b;
    while (e > b && text::is_space(doc[e - 1])) --e;
    return {b, e, heading};
}

/// Paragraph-level units: blank lines separate units, and a heading line
/// always opens a new unit.
inline std::vector<TextSpan> paragraph_units(std::string_view doc) {
    std::vector<TextSpan> units;
    bool open = false;
    TextSpan cur;
    std::size_t pos = 0;
    const auto close = [&] {
        if (open) {
            auto t = trimmed(doc, cur.begin, cur.end, cur.heading);
            if (t.end > t.begin) units.push_back(t);
        }
        open = false;
    };
    while (pos < doc.size()) {
        auto nl = doc.find('\n', pos);
        if (nl == std::string_view::npos) nl = doc.size();
        const auto line = doc.substr(pos, nl - pos);
        if (text::is_blank(line)) {
            close();
        } else if (text::is_heading_line(text::trim(line))) {
            close();
            cur = {pos, nl, true};
            open = true;
        } else {
            if (!open) {
                cur = {pos, nl, false};
                open = true;
            }
            cur.end = nl;
        }
        pos = nl + 1;
    }
    close();
    return units;
}

/// Sentence spans inside [b, e): a sentence ends after . ! ? followed by
/// whitespace, or at a line break.
inline std::vector<TextSpan> sentence_spans(std::string_view doc, std::size_t b, std::size_t e) {
    std::vector<TextSpan> out;
    std::size_t start = b;
    for (std::size_t i = b; i < e; ++i) {
        const char c = doc[i];
        const bool terminal = (c == '.' || c == '!' || c == '?') && (i + 1 == e || text::is_space(doc[i + 1]));
        if (terminal || c == '\n') {
            auto t = trimmed(doc, start, terminal ? i + 1 : i, false);
            if (t.end > t.begin) out.push_back(t);
            start = i + 1;
        }
    }
    auto t = trimmed(doc, start, e, false);
    if (t.end > t.begin) out.push_back(t);
    return out;
}

inline std::vector<TextSpan> word_spans(std::string_view doc, std::size_t b, std::size_t e) {
    std::vector<TextSpan> out;
    std::size_t i = b;
    while (i < e) {
        while (i < e && text::is_space(doc[i])) ++i;
        const std::size_t s = i;
        while (i < e && !text::is_space(doc[i])) ++i;
        if (i > s) out.push_back({s, i, false});
    }
    return out;
}

/// Cuts [b, e) into code-point-aligned pieces of at most `limit` tokens.
inline std::vector<TextSpan> byte_pieces(std::string_view doc, std::size_t b, std::size_t e, std::size_t limit,
                                         const Tokenizer& tok) {
    std::vector<TextSpan> out;
    std::size_t start = b;
    while (start < e) {
        std::size_t end = start + 1;
        while (end < e && !text::is_utf8_boundary(doc, end)) ++end;
        for (std::size_t next = end; next < e;) {
            std::size_t n = next + 1;
            while (n < e && !text::is_utf8_boundary(doc, n)) ++n;
            if (tok.count(doc.substr(start, n - start)) > limit) break;
            end = n;
            next = n;
        }
        out.push_back({start, end, false});
        start = end;
    }
    return out;
}

inline std::vector<TextSpan> fit_pieces(std::string_view doc, const TextSpan& span, std::size_t limit,
                                        const Tokenizer& tok, int level);

/// Greedily packs consecutive atoms into pieces of at most `limit` tokens;
/// atoms that are too large on their own are split at the next finer level.
inline std::vector<TextSpan> pack(std::string_view doc, const std::vector<TextSpan>& atoms, std::size_t limit,
                                  const Tokenizer& tok, int level) {
    std::vector<TextSpan> out;
    bool open = false;
    TextSpan cur;
    for (const auto& a : atoms) {
        if (tok.count(doc.substr(a.begin, a.end - a.begin)) > limit) {
            if (open) out.push_back(cur);
            open = false;
            auto finer = fit_pieces(doc, a, limit, tok, level);
            out.insert(out.end(), finer.begin(), finer.end());
            continue;
        }
        if (open && tok.count(doc.substr(cur.begin, a.end - cur.begin)) <= limit) {
            cur.end = a.end;
        } else {
            if (open) out.push_back(cur);
            cur = {a.begin, a.end, false};
            open = true;
        }
    }
    if (open) out.push_back(cur);
    return out;
}

inline std::vector<TextSpan> fit_pieces(std::string_view doc, const TextSpan& span, std::size_t limit,
                                        const Tokenizer& tok, int level) {
    if (tok.count(doc.substr(span.begin, span.end - span.begin)) <= limit) return {span};
    std::vector<TextSpan> pieces;
    if (level == 0) {
        pieces = pack(doc, sentence_spans(doc, span.begin, span.end), limit, tok, 1);
    } else if (level == 1) {
        pieces = pack(doc, word_spans(doc, span.begin, span.end), limit, tok, 2);
    } else {
        pieces = byte_pieces(doc, span.begin, span.end, limit, tok);
    }
    if (!pieces.empty()) pieces.front().heading = span.heading;
    return pieces;
}

inline std::vector<Chunk> make_chunks(std::string_view doc, const std::vector<TextSpan>& spans, std::string_view doc_id) {
    std::vector<Chunk> chunks;
    chunks.reserve(spans.size());
    char id[32];
    for (std::size_t i = 0; i < spans.size(); ++i) {
        std::snprintf(id, sizeof(id), "c%04zu", i + 1);
        chunks.push_back({id, std::string(doc.substr(spans[i].begin, spans[i].end - spans[i].begin)), std::string(doc_id)});
    }
    return chunks;
}

}  // namespace detail

/// Deterministic structural chunking of a normalized document: paragraph and
/// heading units, oversize units split at sentence boundaries, then adjacent
/// units merged greedily up to the target size without crossing a heading.
inline std::vector<TextSpan> structural_spans(std::string_view doc, const SegmenterSpec& spec, const Tokenizer& tok) {
    std::vector<TextSpan> pieces;
    for (const auto& u : detail::paragraph_units(doc)) {
        auto p = detail::fit_pieces(doc, u, spec.max_chunk_tokens, tok, 0);
        pieces.insert(pieces.end(), p.begin(), p.end());
    }
    std::vector<TextSpan> chunks;
    for (const auto& p : pieces) {
        if (!chunks.empty() && !p.heading &&
            tok.count(doc.substr(chunks.back().begin, p.end - chunks.back().begin)) <= spec.target_chunk_tokens) {
            chunks.back().end = p.end;
        } else {
            chunks.push_back(p);
        }
    }
    return chunks;
}

/// Slices a normalized document at model-proposed code point offsets. Throws
/// Error(integrity) when the offsets are not strictly increasing inside the
/// document.
inline std::vector<TextSpan> spans_from_boundaries(std::string_view doc, const nlohmann::json& boundaries,
                                                   const SegmenterSpec& spec, const Tokenizer& tok) {
    std::vector<std::size_t> cuts{0};
    for (const auto& b : boundaries) {
        if (!b.is_number_integer() || b.get<long long>() <= 0) {
            throw Error(ErrorKind::integrity, "boundary offsets must be positive integers");
        }
        const auto byte = text::codepoint_to_byte(doc, static_cast<std::size_t>(b.get<long long>()));
        if (!byte || *byte >= doc.size()) throw Error(ErrorKind::integrity, "boundary offset past end of document");
        if (*byte <= cuts.back()) throw Error(ErrorKind::integrity, "boundary offsets are not strictly increasing");
        cuts.push_back(*byte);
    }
    cuts.push_back(doc.size());
    std::vector<TextSpan> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        auto t = detail::trimmed(doc, cuts[i], cuts[i + 1], false);
        if (t.end <= t.begin) continue;
        auto p = detail::fit_pieces(doc, t, spec.max_chunk_tokens, tok, 0);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

/// Splits a document into ordered chunks with ids c0001, c0002, ... The llm
/// backend falls back to the structural one (with a warning) when the gateway
/// fails or its boundaries do not slice the document cleanly.
inline std::vector<Chunk> segment(std::string_view raw, std::string_view doc_id, const SegmenterSpec& spec,
                                  const Tokenizer& tok, Gateway* gateway = nullptr,
                                  std::vector<std::string>* warnings = nullptr) {
    spec.validate();
    const auto doc = normalize_document(raw);
    if (doc.empty()) throw Error(ErrorKind::invalid_input, "document '" + std::string(doc_id) + "' is empty");

    if (spec.backend == SegmenterBackend::llm) {
        if (!gateway) throw Error(ErrorKind::configuration, "llm segmenter needs a gateway");
        try {
            nlohmann::json payload{{"doc_id", doc_id}, {"text", doc}, {"max_chunk_tokens", spec.max_chunk_tokens}};
            const auto reply = gateway->call(Role::segment, payload);
            return detail::make_chunks(doc, spans_from_boundaries(doc, reply.at("boundaries"), spec, tok), doc_id);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::configuration) throw;
            if (warnings) {
                warnings->push_back("segment '" + std::string(doc_id) + "': " + e.what() +
                                    "; using structural segmentation");
            }
        }
    }
    return detail::make_chunks(doc, structural_spans(doc, spec, tok), doc_id);
}

}  // namespace fable
