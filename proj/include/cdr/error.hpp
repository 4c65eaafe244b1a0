// Copyright 2026 The CDR Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdr {

// Raised for malformed inputs and inconsistent configuration. The CLI maps
// this to exit code 1; every other exception maps to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what)
      : ValidationError(path + ":" + std::to_string(line) + ": " + what),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

}  // namespace cdr
