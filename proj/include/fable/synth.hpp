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

// Seeded synthetic corpora with planted evidence.
//
// Each document is markdown: a "# " title and an intro paragraph, then
// sections ("## ") with an intro paragraph each, split into subsections
// ("### ") of several paragraphs. Words are pronounceable nonsense drawn
// from a shared filler vocabulary and a per-document topic vocabulary.
//
// Each query owns two marker tokens (letters and digits, unique in the
// corpus). Its evidence is 1..k paragraphs in distinct documents that open
// with "Entry <m1> <m2> concerns ..." and repeat the markers. The query text
// is "Find entries <m1> <m2>"; gold labels are the chunks the default
// structural segmenter puts those paragraphs in.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fable/eval.hpp"
#include "fable/indexer.hpp"
#include "fable/segmenter.hpp"

namespace fable {

struct SynthSpec {
    std::size_t docs = 50;
    std::size_t queries = 100;
    std::size_t max_evidence = 3;  // gold chunks per query, drawn from [1, max_evidence]
    std::uint64_t seed = 7;
    std::size_t sections = 5;
    std::size_t subsections = 2;
    std::size_t paragraphs = 5;  // per subsection
    std::size_t min_paragraph_bytes = 680;
    std::size_t max_paragraph_bytes = 760;

    void validate() const {
        if (docs < 1) throw Error(ErrorKind::invalid_argument, "synth needs at least one document");
        if (max_evidence < 1) throw Error(ErrorKind::invalid_argument, "evidence per query must be >= 1");
        if (sections < 1 || subsections < 1 || paragraphs < 1) {
            throw Error(ErrorKind::invalid_argument, "synth document shape must be non-empty");
        }
        if (min_paragraph_bytes < 64 || min_paragraph_bytes > max_paragraph_bytes) {
            throw Error(ErrorKind::invalid_argument, "bad paragraph size range");
        }
        if (queries * max_evidence > docs * sections * subsections * paragraphs) {
            throw Error(ErrorKind::invalid_argument, "too many evidence paragraphs for the corpus size");
        }
    }
};

struct SynthCorpus {
    std::vector<SourceDocument> docs;
    std::vector<EvalQuery> queries;
    std::vector<std::vector<std::string>> markers;  // per query
};

namespace detail {

/// mt19937_64 with a portable bounded draw (the standard distributions are
/// not specified bit-for-bit across library vendors).
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do x = gen_();
        while (x >= limit);
        return x % n;
    }

    std::size_t between(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(below(hi - lo + 1)); }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(below(v.size()))];
    }

private:
    std::mt19937_64 gen_;
};

inline std::string pseudo_word(SynthRng& rng) {
    static const std::vector<std::string> onset{"b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t",
                                                "v", "z", "br", "st", "tr", "pl", "gr", "sh", "th", "dr"};
    static const std::vector<std::string> vowel{"a", "e", "i", "o", "u", "ai", "ou", "ea"};
    static const std::vector<std::string> coda{"", "", "n", "r", "l", "s", "m", "t"};
    std::string w;
    const auto syllables = rng.between(2, 3);
    for (std::size_t i = 0; i < syllables; ++i) w += rng.pick(onset) + rng.pick(vowel) + rng.pick(coda);
    return w;
}

inline std::vector<std::string> vocabulary(SynthRng& rng, std::size_t n, std::set<std::string>& taken) {
    static const std::set<std::string> reserved{"entry", "entries", "find", "concerns", "see", "also", "and"};
    std::vector<std::string> out;
    while (out.size() < n) {
        auto w = pseudo_word(rng);
        if (!reserved.count(w) && taken.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

inline std::string marker(SynthRng& rng, std::set<std::string>& taken) {
    static const std::string letters = "abcdefghijklmnopqrstuvwxyz";
    static const std::string digits = "0123456789";
    for (;;) {
        std::string m;
        m += letters[rng.below(26)];
        m += letters[rng.below(26)];
        m += digits[rng.below(10)];
        m += letters[rng.below(26)];
        m += digits[rng.below(10)];
        if (taken.insert(m).second) return m;
    }
}

inline std::string sentence(SynthRng& rng, const std::vector<std::string>& topic, const std::vector<std::string>& filler) {
    const auto n = rng.between(8, 15);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += rng.below(3) == 0 ? rng.pick(topic) : rng.pick(filler);
    }
    s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s + ".";
}

inline std::string paragraph(SynthRng& rng, const SynthSpec& spec, const std::vector<std::string>& topic,
                             const std::vector<std::string>& filler, std::string lead = {},
                             const std::vector<std::string>& repeat = {}) {
    const auto target = rng.between(spec.min_paragraph_bytes, spec.max_paragraph_bytes);
    std::string p = std::move(lead);
    std::size_t k = 0;
    while (p.size() < target) {
        auto s = sentence(rng, topic, filler);
        if (!repeat.empty() && k++ % 2 == 0) {
            s.pop_back();
            s += " " + repeat[(k / 2) % repeat.size()] + ".";
        }
        if (!p.empty()) p += ' ';
        p += s;
    }
    return p;
}

inline std::string title_case(std::vector<std::string> words) {
    for (auto& w : words) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return text::join(words, " ");
}

}  // namespace detail

/// Builds the corpus and queries. Gold chunk ids follow the given segmenter
/// settings, which must match the ones used when indexing.
inline SynthCorpus generate_synth(const SynthSpec& spec, const SegmenterSpec& seg = {}, const TokenizerSpec& tok_spec = {}) {
    spec.validate();
    detail::SynthRng rng(spec.seed);
    std::set<std::string> words;
    const auto filler = detail::vocabulary(rng, 400, words);

    // Evidence slots: (doc, section, subsection, paragraph).
    struct Slot {
        std::size_t doc, sec, sub, par;
        auto operator<=>(const Slot&) const = default;
    };
    std::set<std::string> marks;
    std::vector<std::vector<std::string>> markers(spec.queries);
    std::vector<std::vector<Slot>> evidence(spec.queries);
    std::map<Slot, std::size_t> owner;
    for (std::size_t q = 0; q < spec.queries; ++q) {
        markers[q] = {detail::marker(rng, marks), detail::marker(rng, marks)};
        const auto count = std::min(spec.docs, rng.between(1, spec.max_evidence));
        std::set<std::size_t> used_docs;
        while (evidence[q].size() < count) {
            Slot s{rng.below(spec.docs), rng.below(spec.sections), rng.below(spec.subsections), rng.below(spec.paragraphs)};
            if (used_docs.count(s.doc) || owner.count(s)) continue;
            used_docs.insert(s.doc);
            owner.emplace(s, q);
            evidence[q].push_back(s);
        }
    }

    SynthCorpus out;
    out.markers = markers;
    std::map<Slot, std::string> lead_of;
    for (std::size_t d = 0; d < spec.docs; ++d) {
        const auto topic = detail::vocabulary(rng, 60, words);
        char id[32];
        std::snprintf(id, sizeof(id), "doc_%04zu", d + 1);
        auto pick_words = [&](std::size_t n) {
            std::vector<std::string> w;
            for (std::size_t i = 0; i < n; ++i) w.push_back(rng.pick(topic));
            return detail::title_case(w);
        };
        std::string doc = "# " + pick_words(3) + "\n\n" + detail::paragraph(rng, spec, topic, filler) + "\n";
        for (std::size_t s = 0; s < spec.sections; ++s) {
            doc += "\n## " + pick_words(2) + "\n\n" + detail::paragraph(rng, spec, topic, filler) + "\n";
            for (std::size_t u = 0; u < spec.subsections; ++u) {
                doc += "\n### " + pick_words(2) + "\n";
                for (std::size_t p = 0; p < spec.paragraphs; ++p) {
                    auto it = owner.find({d, s, u, p});
                    if (it == owner.end()) {
                        doc += "\n" + detail::paragraph(rng, spec, topic, filler) + "\n";
                        continue;
                    }
                    const auto& m = markers[it->second];
                    auto lead = "Entry " + m[0] + " " + m[1] + " concerns " + rng.pick(topic) + " " + rng.pick(topic) + ".";
                    lead_of[it->first] = lead;
                    doc += "\n" + detail::paragraph(rng, spec, topic, filler, lead, m) + "\n";
                }
            }
        }
        out.docs.push_back({id, std::move(doc)});
    }

    const Tokenizer tok(tok_spec);
    for (std::size_t q = 0; q < spec.queries; ++q) {
        char qid[32];
        std::snprintf(qid, sizeof(qid), "q%04zu", q + 1);
        EvalQuery query{qid, "Find entries " + markers[q][0] + " " + markers[q][1], {}};
        for (const auto& s : evidence[q]) {
            const auto& src = out.docs[s.doc];
            const auto chunks = segment(src.text, src.doc_id, seg, tok);
            const auto& lead = lead_of.at(s);
            std::string found;
            for (const auto& c : chunks) {
                if (c.content.find(lead) != std::string::npos) {
                    found = c.chunk_id;
                    break;
                }
            }
            if (found.empty()) throw Error(ErrorKind::invariant_violation, "evidence of " + query.id + " not found in any chunk");
            query.gold.push_back({src.doc_id, found});
        }
        out.queries.push_back(std::move(query));
    }
    return out;
}

/// Writes out_dir/corpus/<doc_id>.md and out_dir/queries.jsonl.
inline void write_synth(const SynthCorpus& corpus, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "corpus");
    for (const auto& d : corpus.docs) {
        std::ofstream f(out_dir / "corpus" / (d.doc_id + ".md"), std::ios::binary);
        if (!f) throw Error(ErrorKind::io, "cannot write " + d.doc_id);
        f << d.text;
    }
    std::ofstream q(out_dir / "queries.jsonl", std::ios::binary);
    if (!q) throw Error(ErrorKind::io, "cannot write queries.jsonl");
    for (const auto& query : corpus.queries) q << to_json(query).dump() << "\n";
}

}  // namespace fable
