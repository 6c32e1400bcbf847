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

#include <stdexcept>
#include <string>
#include <string_view>

namespace fable {

enum class ErrorKind {
    not_found,
    invalid_argument,
    invalid_input,
    version_mismatch,
    malformed_file,
    invariant_violation,
    structuring_failure,
    integrity,
    gateway_transient,
    gateway_schema,
    context_overflow,
    configuration,
    io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::not_found: return "not found";
        case ErrorKind::invalid_argument: return "invalid argument";
        case ErrorKind::invalid_input: return "invalid input";
        case ErrorKind::version_mismatch: return "version mismatch";
        case ErrorKind::malformed_file: return "malformed file";
        case ErrorKind::invariant_violation: return "invariant violation";
        case ErrorKind::structuring_failure: return "structuring failure";
        case ErrorKind::integrity: return "integrity error";
        case ErrorKind::gateway_transient: return "gateway transient failure";
        case ErrorKind::gateway_schema: return "gateway schema violation";
        case ErrorKind::context_overflow: return "context overflow";
        case ErrorKind::configuration: return "configuration error";
        case ErrorKind::io: return "io error";
    }
    return "unknown error";
}

/// All library failures are reported as fable::Error; kind() tells callers
/// which contract was broken.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace fable
