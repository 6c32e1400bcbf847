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

// Chunk-level retrieval metrics.
//
//   Recall = |gold chunks in output| / |gold chunks|
//   EIR    = tokens of gold chunks in output / tokens of output  (0 when the output is empty)
//
// Both are computed per query and macro-averaged.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fable/retrieval.hpp"

namespace fable {

struct GoldRef {
    std::string doc_id;
    std::string chunk_id;

    auto operator<=>(const GoldRef&) const = default;
};

struct EvalQuery {
    std::string id;
    std::string text;
    std::vector<GoldRef> gold;
};

inline nlohmann::json to_json(const EvalQuery& q) {
    nlohmann::json gold = nlohmann::json::array();
    for (const auto& g : q.gold) gold.push_back({{"doc_id", g.doc_id}, {"chunk_id", g.chunk_id}});
    return {{"id", q.id}, {"query", q.text}, {"gold", gold}};
}

inline std::vector<EvalQuery> parse_queries(std::istream& in) {
    std::vector<EvalQuery> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::is_blank(line)) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        try {
            if (j.is_discarded()) throw std::runtime_error("not JSON");
            EvalQuery q{j.at("id").get<std::string>(), j.at("query").get<std::string>(), {}};
            for (const auto& g : j.at("gold")) q.gold.push_back({g.at("doc_id").get<std::string>(), g.at("chunk_id").get<std::string>()});
            out.push_back(std::move(q));
        } catch (const std::exception& e) {
            throw Error(ErrorKind::malformed_file, "queries line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::vector<EvalQuery> load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    return parse_queries(in);
}

/// Every gold label must name a chunk of the indexed corpus.
inline void check_gold(const Forest& forest, const std::vector<EvalQuery>& queries) {
    for (const auto& q : queries) {
        if (q.gold.empty()) throw Error(ErrorKind::invalid_input, "query " + q.id + " has no gold chunks");
        for (const auto& g : q.gold) {
            if (!forest.contains(g.doc_id) || !forest.document(g.doc_id).position.count(g.chunk_id)) {
                throw Error(ErrorKind::invalid_input,
                            "query " + q.id + ": gold chunk " + g.doc_id + "/" + g.chunk_id + " is not in the index");
            }
        }
    }
}

struct QueryMetrics {
    double recall = 0.0;
    double eir = 0.0;
    std::size_t tokens = 0;
};

inline QueryMetrics score_output(std::span<const Chunk> output, const std::vector<GoldRef>& gold, const Tokenizer& tok) {
    const std::set<GoldRef> wanted(gold.begin(), gold.end());
    std::set<GoldRef> found;
    std::size_t gold_tokens = 0;
    QueryMetrics m;
    for (const auto& c : output) {
        const auto t = tok.count(c.content);
        m.tokens += t;
        GoldRef ref{c.doc_id, c.chunk_id};
        if (wanted.count(ref) && found.insert(ref).second) gold_tokens += t;
    }
    m.recall = wanted.empty() ? 0.0 : static_cast<double>(found.size()) / static_cast<double>(wanted.size());
    m.eir = m.tokens == 0 ? 0.0 : static_cast<double>(gold_tokens) / static_cast<double>(m.tokens);
    return m;
}

struct EvalRow {
    RetrievalMode mode = RetrievalMode::automatic;
    std::size_t budget = 0;
    std::size_t queries = 0;
    double recall = 0.0;
    double eir = 0.0;
    double mean_tokens = 0.0;
    std::size_t max_tokens = 0;
    std::size_t doc_level = 0;
    std::size_t no_candidates = 0;
    double mean_latency_ms = 0.0;
};

struct EvalOptions {
    std::vector<RetrievalMode> modes{RetrievalMode::automatic};
    std::vector<std::size_t> budgets{8192};
    unsigned threads = 4;
    RetrieverOptions retriever{};
};

/// Runs every query under every (mode, budget) pair. Rows come out in
/// (mode, budget) order whatever the scheduling.
inline std::vector<EvalRow> evaluate(const Forest& forest, const VectorIndex& index, const Embedder& embedder,
                                     Gateway& gateway, const RetrievalConfig& base, const std::vector<EvalQuery>& queries,
                                     const EvalOptions& opt) {
    check_gold(forest, queries);
    std::vector<EvalRow> rows;
    for (auto mode : opt.modes) {
        for (auto budget : opt.budgets) {
            auto cfg = base;
            cfg.budget = budget;
            const Retriever retriever(forest, index, embedder, gateway, cfg, opt.retriever);
            std::vector<QueryMetrics> per(queries.size());
            std::vector<double> latency(queries.size());
            std::vector<Stage> stage(queries.size());
            std::vector<RetrievalStatus> status(queries.size());
            std::atomic<std::size_t> next{0};
            auto worker = [&] {
                for (auto i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1)) {
                    const auto t0 = std::chrono::steady_clock::now();
                    const auto r = retriever.retrieve(queries[i].text, mode);
                    latency[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                    per[i] = score_output(r.chunks, queries[i].gold, retriever.tokenizer());
                    stage[i] = r.stage;
                    status[i] = r.status;
                }
            };
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < std::max(1u, opt.threads); ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();

            EvalRow row{mode, budget, queries.size()};
            for (std::size_t i = 0; i < queries.size(); ++i) {
                row.recall += per[i].recall;
                row.eir += per[i].eir;
                row.mean_tokens += static_cast<double>(per[i].tokens);
                row.max_tokens = std::max(row.max_tokens, per[i].tokens);
                row.mean_latency_ms += latency[i];
                if (status[i] == RetrievalStatus::no_candidates) {
                    ++row.no_candidates;
                } else if (stage[i] == Stage::doc_level) {
                    ++row.doc_level;
                }
            }
            if (!queries.empty()) {
                const auto n = static_cast<double>(queries.size());
                row.recall /= n;
                row.eir /= n;
                row.mean_tokens /= n;
                row.mean_latency_ms /= n;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline std::string fixed(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

/// Tab-separated table. Latency is machine-dependent and only included on request.
inline std::string to_tsv(const std::vector<EvalRow>& rows, bool with_latency) {
    std::ostringstream out;
    out << "mode\tbudget\tqueries\trecall\teir\tmean_tokens\tmax_tokens\tdoc_level\tno_candidates";
    if (with_latency) out << "\tmean_latency_ms";
    out << "\n";
    for (const auto& r : rows) {
        out << to_string(r.mode) << "\t" << r.budget << "\t" << r.queries << "\t" << fixed(r.recall, 4) << "\t"
            << fixed(r.eir, 4) << "\t" << fixed(r.mean_tokens, 1) << "\t" << r.max_tokens << "\t" << r.doc_level << "\t"
            << r.no_candidates;
        if (with_latency) out << "\t" << fixed(r.mean_latency_ms, 3);
        out << "\n";
    }
    return out.str();
}

inline nlohmann::json to_json(const std::vector<EvalRow>& rows, bool with_latency) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j{{"mode", to_string(r.mode)}, {"budget", r.budget},           {"queries", r.queries},
                         {"recall", r.recall},         {"eir", r.eir},                 {"mean_tokens", r.mean_tokens},
                         {"max_tokens", r.max_tokens}, {"doc_level", r.doc_level},     {"no_candidates", r.no_candidates}};
        if (with_latency) j["mean_latency_ms"] = r.mean_latency_ms;
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace fable
