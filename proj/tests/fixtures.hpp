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

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "fable/fable.hpp"

namespace fixtures {

/// Mock gateway, hash embedder and the index they build over `docs`.
struct Stack {
    fable::FableConfig cfg;
    std::unique_ptr<fable::MockGateway> gateway;
    fable::HashEmbedder embedder;
    fable::BuiltIndex built;

    Stack(const std::vector<fable::SourceDocument>& docs, fable::FableConfig config = {}, std::size_t dim = 256)
        : cfg(std::move(config)),
          gateway(fable::make_mock_gateway({cfg.segmenter, cfg.retrieval.tokenizer})),
          embedder(dim, cfg.embedder.seed) {
        cfg.embedder.dimension = dim;
        built = fable::build_index(docs, cfg, *gateway, embedder);
    }

    fable::Retriever retriever(fable::RetrievalConfig rc, fable::RetrieverOptions opt = {}) const {
        return fable::Retriever(built.forest, built.index, embedder, *gateway, rc, opt);
    }
};

/// Small markdown document; `tag` lands in the first section's paragraph.
inline std::string small_doc(const std::string& title, const std::string& tag, int sections = 2, int paragraphs = 2) {
    std::string s = "# " + title + "\n\nIntro of " + title + " with plain words.\n";
    for (int i = 0; i < sections; ++i) {
        s += "\n## Part " + std::to_string(i + 1) + "\n";
        for (int p = 0; p < paragraphs; ++p) {
            s += "\nParagraph " + std::to_string(p + 1) + " of part " + std::to_string(i + 1) + " in " + title;
            if (i == 0 && p == 0 && !tag.empty()) s += " mentions " + tag;
            s += ".";
            s += " Filler words follow here to give it some body.\n";
        }
    }
    return s;
}

/// Random markdown with a random heading layout (possibly none).
inline std::string random_markdown(std::mt19937_64& rng, int index) {
    static const char* words[] = {"river", "stone", "cloud", "field", "ember", "frost", "grove", "marsh",
                                  "ridge", "shore", "thorn", "vale",  "bloom", "cinder", "dune", "fjord"};
    auto sentence = [&] {
        std::string s;
        const int n = 4 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) s += std::string(i ? " " : "") + words[rng() % 16];
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
        return s + ".";
    };
    auto paragraph = [&] {
        std::string p;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) p += (i ? " " : "") + sentence();
        return p;
    };
    std::string doc;
    const int layout = static_cast<int>(rng() % 4);
    if (layout != 0) doc += "# Document " + std::to_string(index) + "\n\n";
    const int blocks = 1 + static_cast<int>(rng() % 14);
    for (int b = 0; b < blocks; ++b) {
        if (layout >= 2 && rng() % 3 == 0) {
            const int level = 2 + static_cast<int>(rng() % (layout == 3 ? 4 : 1));
            doc += std::string(static_cast<std::size_t>(level), '#') + " Heading " + std::to_string(b) + "\n\n";
        }
        doc += paragraph() + "\n\n";
    }
    return doc;
}

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() /
               (name + "_" + std::to_string(std::random_device{}()) + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

}  // namespace fixtures
