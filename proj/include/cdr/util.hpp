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

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cdr {

// mt19937_64 with bounded draws done by hand: std::uniform_*_distribution is
// implementation-defined, and seeded runs must agree across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, bound); bound must be positive.
  std::uint64_t index(std::uint64_t bound);
  // Uniform in [0, 1) with 53 random bits.
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

std::uint64_t fnv1a64(std::string_view data);
std::string to_hex(std::uint64_t value);

// Plain-text key=value manifests. Keys are written in sorted order.
using Manifest = std::map<std::string, std::string>;
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

}  // namespace cdr
