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

// Everything except the cpp-httplib transport, which pulls in <httplib.h>;
// include fable/httplib_transport.hpp separately when talking to real
// endpoints.

#include "fable/budget.hpp"
#include "fable/config.hpp"
#include "fable/embedder.hpp"
#include "fable/error.hpp"
#include "fable/eval.hpp"
#include "fable/forest.hpp"
#include "fable/forest_io.hpp"
#include "fable/fusion.hpp"
#include "fable/gateway.hpp"
#include "fable/indexer.hpp"
#include "fable/mock_backends.hpp"
#include "fable/prompts.hpp"
#include "fable/retrieval.hpp"
#include "fable/segmenter.hpp"
#include "fable/synth.hpp"
#include "fable/text.hpp"
#include "fable/tokenizer.hpp"
#include "fable/tree_builder.hpp"
#include "fable/tree_expansion.hpp"
#include "fable/vector_index.hpp"
