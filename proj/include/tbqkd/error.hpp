// Copyright 2026 The tbqkd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
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

namespace tbqkd {

enum class ErrorCategory {
    InvalidInput,
    InvalidState,
    NoData,
    Config,
    Io,
};

inline std::string_view category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::InvalidInput: return "invalid-input";
        case ErrorCategory::InvalidState: return "invalid-state";
        case ErrorCategory::NoData: return "no-data";
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Io: return "io";
    }
    return "unknown";
}

/// Process exit code used by the CLI for each category.
inline int exit_code(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Config: return 2;
        case ErrorCategory::InvalidInput: return 3;
        case ErrorCategory::InvalidState: return 4;
        case ErrorCategory::NoData: return 5;
        case ErrorCategory::Io: return 6;
    }
    return 1;
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, const std::string &message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

  private:
    ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string &message) {
    throw Error(category, message);
}

}  // namespace tbqkd
