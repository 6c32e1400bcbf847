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

// Small string helpers shared by the segmenter, the mock backends and the
// hash embedder. ASCII-oriented; bytes >= 0x80 are treated as word characters
// so UTF-8 words survive tokenization intact.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fable::text {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
}

inline std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

inline bool is_blank(std::string_view s) { return trim(s).empty(); }

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

/// Lower-cased maximal runs of word characters.
inline std::vector<std::string> word_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !is_word_char(s[i])) ++i;
        const std::size_t b = i;
        while (i < s.size() && is_word_char(s[i])) ++i;
        if (i > b) out.push_back(to_lower(s.substr(b, i - b)));
    }
    return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline bool is_heading_line(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && line[i] == '#') ++i;
    return i > 0 && i <= 6 && (i == line.size() || line[i] == ' ');
}

/// Heading level (number of leading '#') or 0 when the line is not a heading.
inline int heading_level(std::string_view line) {
    if (!is_heading_line(line)) return 0;
    int n = 0;
    while (static_cast<std::size_t>(n) < line.size() && line[n] == '#') ++n;
    return n;
}

inline std::string heading_text(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && line[i] == '#') ++i;
    return std::string(trim(line.substr(i)));
}

inline std::string_view first_line(std::string_view s) {
    const auto nl = s.find('\n');
    return nl == std::string_view::npos ? s : s.substr(0, nl);
}

/// First sentence of the first non-heading line, cut to max_words words.
inline std::string lead_sentence(std::string_view s, std::size_t max_words = 24) {
    std::string_view body;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto nl = s.find('\n', pos);
        if (nl == std::string_view::npos) nl = s.size();
        const auto line = trim(s.substr(pos, nl - pos));
        if (!line.empty() && !is_heading_line(line)) {
            body = s.substr(pos);
            break;
        }
        pos = nl + 1;
    }
    if (body.empty()) return heading_text(first_line(trim(s)));
    body = trim(body);
    std::size_t end = body.size();
    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (c == '\n') { end = i; break; }
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == body.size() || is_space(body[i + 1]))) {
            end = i + 1;
            break;
        }
    }
    std::string out;
    std::size_t words = 0;
    std::size_t i = 0;
    const auto sentence = body.substr(0, end);
    while (i < sentence.size() && words < max_words) {
        while (i < sentence.size() && is_space(sentence[i])) ++i;
        const std::size_t b = i;
        while (i < sentence.size() && !is_space(sentence[i])) ++i;
        if (i > b) {
            if (!out.empty()) out += ' ';
            out.append(sentence.substr(b, i - b));
            ++words;
        }
    }
    return out;
}

/// Byte offset of the given code point index in a UTF-8 string, or nullopt
/// when the index is past the end.
inline std::optional<std::size_t> codepoint_to_byte(std::string_view s, std::size_t index) {
    std::size_t cp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto u = static_cast<unsigned char>(s[i]);
        if ((u & 0xC0) == 0x80) continue;
        if (cp == index) return i;
        ++cp;
    }
    if (cp == index) return s.size();
    return std::nullopt;
}

inline std::size_t byte_to_codepoint(std::string_view s, std::size_t byte_offset) {
    std::size_t cp = 0;
    for (std::size_t i = 0; i < byte_offset && i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) ++cp;
    }
    return cp;
}

inline bool is_utf8_boundary(std::string_view s, std::size_t pos) {
    return pos >= s.size() || (static_cast<unsigned char>(s[pos]) & 0xC0) != 0x80;
}

}  // namespace fable::text
