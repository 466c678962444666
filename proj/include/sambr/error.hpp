// Copyright 2026  The sambr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace sambr {

/// Base of every error thrown by the library. `kind()` is a stable
/// machine-readable tag used in the CLI's error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SAMBR_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(tag, what) {}        \
  };

SAMBR_DEFINE_ERROR(DimensionError, "dimension")
SAMBR_DEFINE_ERROR(NumericError, "numeric")
SAMBR_DEFINE_ERROR(ContractError, "contract")
SAMBR_DEFINE_ERROR(ConfigError, "config")
SAMBR_DEFINE_ERROR(MalformedHypothesisError, "malformed_hypothesis")
SAMBR_DEFINE_ERROR(MissingProfileError, "missing_profile")
SAMBR_DEFINE_ERROR(UndefinedDenominatorError, "undefined_denominator")
SAMBR_DEFINE_ERROR(CostBoundError, "cost_bound")
SAMBR_DEFINE_ERROR(IoError, "io")

#undef SAMBR_DEFINE_ERROR

/// Schema violation in an input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::string file, long line, const std::string& what)
      : Error("parse", file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}
  const std::string& file() const noexcept { return file_; }
  long line() const noexcept { return line_; }

 private:
  std::string file_;
  long line_;
};

}  // namespace sambr
