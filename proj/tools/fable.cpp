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

// fable index|query|synth|eval
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fable/fable.hpp"
#include "fable/httplib_transport.hpp"

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Backends {
    std::unique_ptr<fable::Transport> transport;
    std::unique_ptr<fable::Gateway> gateway;
    std::unique_ptr<fable::Embedder> embedder;
};

Backends make_backends(const fable::FableConfig& cfg) {
    Backends b;
    if (cfg.gateway.backend == fable::GatewayBackend::http_chat || cfg.embedder.backend == fable::EmbedderBackend::http) {
        b.transport = std::make_unique<fable::HttplibTransport>();
    }
    if (cfg.gateway.backend == fable::GatewayBackend::mock) {
        fable::MockOptions opt;
        opt.segmenter = cfg.segmenter;
        opt.tokenizer = cfg.retrieval.tokenizer;
        b.gateway = fable::make_mock_gateway(opt, cfg.gateway.context_window);
    } else {
        b.gateway = std::make_unique<fable::HttpChatGateway>(cfg.gateway, *b.transport);
    }
    if (cfg.embedder.backend == fable::EmbedderBackend::hash_mock) {
        b.embedder = std::make_unique<fable::HashEmbedder>(cfg.embedder.dimension, cfg.embedder.seed);
    } else {
        b.embedder = std::make_unique<fable::HttpEmbedder>(cfg.embedder, *b.transport);
    }
    return b;
}

fable::FableConfig base_config(const std::string& path) {
    fable::FableConfig cfg;
    if (!path.empty()) cfg = fable::load_config(path);
    cfg.gateway.apply_environment();
    return cfg;
}

bool has_entries(const fs::path& p) { return fs::exists(p) && (!fs::is_directory(p) || !fs::is_empty(p)); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = std::string(fable::text::trim(item));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

struct QueryFlags {
    std::optional<std::size_t> budget;
    std::optional<std::size_t> k_doc;
    std::optional<int> hierarchy_threshold;
};

void add_query_flags(CLI::App* cmd, QueryFlags& f) {
    cmd->add_option("--budget", f.budget, "Token budget B_max");
    cmd->add_option("--k-doc", f.k_doc, "Documents taken from vector search");
    cmd->add_option("--hierarchy-threshold", f.hierarchy_threshold, "Deepest ToC level shown for document selection");
}

/// Index settings, then the config file's gateway/backends, then flags.
fable::FableConfig query_config(const fable::LoadedIndex& idx, const std::string& config_path, const QueryFlags& f) {
    auto cfg = base_config(config_path);
    fable::apply_index_meta(cfg, idx.meta);
    if (f.budget) {
        if (*f.budget < 1) throw UsageError("--budget must be >= 1");
        cfg.retrieval.budget = *f.budget;
    }
    if (f.k_doc) {
        if (*f.k_doc < 1) throw UsageError("--k-doc must be >= 1");
        cfg.retrieval.k_doc = *f.k_doc;
    }
    if (f.hierarchy_threshold) cfg.retrieval.hierarchy_threshold = *f.hierarchy_threshold;
    try {
        cfg.retrieval.validate();
    } catch (const fable::Error& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

int cmd_index(const std::string& corpus_dir, const std::string& out_dir, const std::string& config_path, bool force,
              bool skip_failed, std::optional<unsigned> threads) {
    auto cfg = base_config(config_path);
    if (threads) cfg.threads = *threads;
    cfg.validate();
    const auto docs = fable::read_corpus(corpus_dir);
    if (docs.empty()) {
        std::cerr << "fable index: no documents found in " << corpus_dir << "\n";
        return 2;
    }
    if (has_entries(out_dir) && !force) {
        std::cerr << "fable index: " << out_dir << " already exists (use --force to overwrite)\n";
        return 2;
    }
    auto backends = make_backends(cfg);
    const auto built = fable::build_index(docs, cfg, *backends.gateway, *backends.embedder);
    for (const auto& w : built.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& s : built.stats) {
        std::cout << s.doc_id << "\tdepth=" << s.height << "\tinternal=" << s.internal_nodes << "\tleaves=" << s.leaves
                  << "\ttokens=" << s.tokens << "\n";
    }
    for (const auto& f : built.failures) std::cerr << "failed: " << f.doc_id << ": " << f.error << "\n";
    if (!built.failures.empty() && !skip_failed) {
        std::cerr << "fable index: " << built.failures.size() << " document(s) failed; nothing written"
                  << " (use --skip-failed to index the rest)\n";
        return 1;
    }
    if (built.forest.empty()) {
        std::cerr << "fable index: every document failed\n";
        return 1;
    }
    if (force && fs::exists(out_dir)) {
        for (const char* name : {"forest.jsonl", "vectors.fvec", "meta.json"}) fs::remove(fs::path(out_dir) / name);
    }
    fable::write_index(out_dir, built, cfg);
    std::cout << "indexed " << built.forest.size() << " document(s) into " << out_dir << "\n";
    return 0;
}

int cmd_query(const std::string& index_dir, const std::string& query, const std::string& config_path,
              const QueryFlags& flags, const std::string& mode_name, bool json) {
    fable::RetrievalMode mode;
    try {
        mode = fable::parse_retrieval_mode(mode_name);
    } catch (const fable::Error& e) {
        throw UsageError(e.what());
    }
    auto idx = fable::read_index(index_dir);
    auto cfg = query_config(idx, config_path, flags);
    auto backends = make_backends(cfg);
    fable::RetrieverOptions opt;
    opt.budget_policy = cfg.budget_policy;
    opt.search_threads = cfg.threads;
    const fable::Retriever retriever(idx.forest, idx.index, *backends.embedder, *backends.gateway, cfg.retrieval, opt);
    const auto r = retriever.retrieve(query, mode);
    if (json) {
        std::cout << fable::to_json(r).dump(2) << "\n";
        return 0;
    }
    for (const auto& w : r.audit.warnings) std::cerr << "warning: " << w << "\n";
    if (r.status == fable::RetrievalStatus::no_candidates) {
        std::cerr << "no candidate documents\n";
        return 0;
    }
    for (const auto& c : r.chunks) std::cout << "=== " << c.doc_id << "/" << c.chunk_id << "\n" << c.content << "\n\n";
    std::cerr << fable::to_string(r.stage) << ", " << r.chunks.size() << " chunk(s), " << r.token_count << "/"
              << r.budget << " tokens\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, const fable::SynthSpec& spec, const std::string& config_path, bool force) {
    if (spec.docs < 1) throw UsageError("--docs must be >= 1");
    if (has_entries(out_dir) && !force) {
        std::cerr << "fable synth: " << out_dir << " already exists (use --force to overwrite)\n";
        return 2;
    }
    const auto cfg = base_config(config_path);
    const auto corpus = fable::generate_synth(spec, cfg.segmenter, cfg.retrieval.tokenizer);
    fable::write_synth(corpus, out_dir);
    std::cout << "wrote " << corpus.docs.size() << " document(s) and " << corpus.queries.size() << " queries to "
              << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& index_dir, const std::string& queries_path, const std::string& config_path,
             const QueryFlags& flags, const std::string& modes, const std::string& budgets, const std::string& out_prefix,
             bool no_latency, std::optional<unsigned> threads) {
    fable::EvalOptions opt;
    opt.modes.clear();
    try {
        for (const auto& m : split_list(modes)) opt.modes.push_back(fable::parse_retrieval_mode(m));
    } catch (const fable::Error& e) {
        throw UsageError(e.what());
    }
    if (opt.modes.empty()) throw UsageError("--modes is empty");
    auto idx = fable::read_index(index_dir);
    auto cfg = query_config(idx, config_path, flags);
    if (threads) cfg.threads = *threads;
    opt.budgets.clear();
    if (budgets.empty()) {
        opt.budgets.push_back(cfg.retrieval.budget);
    } else {
        for (const auto& b : split_list(budgets)) {
            std::size_t v = 0;
            try {
                v = std::stoull(b);
            } catch (const std::exception&) {
                throw UsageError("bad budget '" + b + "'");
            }
            if (v < 1) throw UsageError("budgets must be >= 1");
            opt.budgets.push_back(v);
        }
    }
    opt.threads = cfg.threads;
    opt.retriever.budget_policy = cfg.budget_policy;
    const auto queries = fable::load_queries(queries_path);
    auto backends = make_backends(cfg);
    const auto rows =
        fable::evaluate(idx.forest, idx.index, *backends.embedder, *backends.gateway, cfg.retrieval, queries, opt);
    const auto tsv = fable::to_tsv(rows, !no_latency);
    std::cout << tsv;
    if (!out_prefix.empty()) {
        std::ofstream t(out_prefix + ".tsv", std::ios::binary);
        std::ofstream j(out_prefix + ".json", std::ios::binary);
        if (!t || !j) throw fable::Error(fable::ErrorKind::io, "cannot write " + out_prefix + ".{tsv,json}");
        t << tsv;
        j << fable::to_json(rows, !no_latency).dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical document forests with budget-adaptive retrieval"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);

    std::string corpus_dir, out_dir, index_dir, query, queries_path, mode = "auto", modes = "auto", budgets, out_prefix;
    bool force = false, skip_failed = false, json = false, no_latency = false;
    std::optional<unsigned> threads;
    QueryFlags qflags, eflags;
    fable::SynthSpec synth;

    auto* index = app.add_subcommand("index", "Build a forest and vector store from a directory of .md/.txt files");
    index->add_option("corpus_dir", corpus_dir)->required();
    index->add_option("out_dir", out_dir)->required();
    index->add_flag("--force", force, "Overwrite an existing index");
    index->add_flag("--skip-failed", skip_failed, "Index the remaining documents when some fail");
    index->add_option("--threads", threads, "Parallel document builds");

    auto* q = app.add_subcommand("query", "Retrieve content for one query");
    q->add_option("index_dir", index_dir)->required();
    q->add_option("query", query)->required();
    add_query_flags(q, qflags);
    q->add_option("--mode", mode, "auto | llm-docs | docs | llm-nodes | nodes | treexp");
    q->add_flag("--json", json, "Print the result and audit as JSON");

    auto* s = app.add_subcommand("synth", "Generate a synthetic corpus with planted evidence");
    s->add_option("out_dir", out_dir)->required();
    s->add_option("--docs", synth.docs, "Number of documents");
    s->add_option("--queries", synth.queries, "Number of queries");
    s->add_option("--evidence-per-query", synth.max_evidence, "Maximum gold chunks per query");
    s->add_option("--seed", synth.seed, "Random seed");
    s->add_flag("--force", force, "Write into an existing directory");

    auto* e = app.add_subcommand("eval", "Recall and EIR over a query file, per mode and budget");
    e->add_option("index_dir", index_dir)->required();
    e->add_option("queries", queries_path, "queries.jsonl with gold labels")->required();
    add_query_flags(e, eflags);
    e->add_option("--modes", modes, "Comma-separated modes");
    e->add_option("--budgets", budgets, "Comma-separated budgets, e.g. 1024,2048,4096,8192");
    e->add_option("--out", out_prefix, "Also write <prefix>.tsv and <prefix>.json");
    e->add_flag("--no-latency", no_latency, "Leave latency out of the tables");
    e->add_option("--threads", threads, "Parallel queries");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (index->parsed()) return cmd_index(corpus_dir, out_dir, config_path, force, skip_failed, threads);
        if (q->parsed()) return cmd_query(index_dir, query, config_path, qflags, mode, json);
        if (s->parsed()) return cmd_synth(out_dir, synth, config_path, force);
        if (e->parsed()) {
            return cmd_eval(index_dir, queries_path, config_path, eflags, modes, budgets, out_prefix, no_latency, threads);
        }
    } catch (const UsageError& err) {
        std::cerr << "fable: " << err.what() << "\n";
        return 2;
    } catch (const fable::Error& err) {
        std::cerr << "fable: " << err.what() << "\n";
        return err.kind() == fable::ErrorKind::configuration ? 2 : 1;
    } catch (const std::exception& err) {
        std::cerr << "fable: " << err.what() << "\n";
        return 1;
    }
    return 2;
}
