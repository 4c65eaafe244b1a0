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

#include "cdr/util.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "cdr/error.hpp"

namespace cdr {

std::uint64_t Rng::index(std::uint64_t bound) {
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return draw % bound;
}

double Rng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buffer, end);
}

double parse_double(std::string_view text) {
  text = trim(text);
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ValidationError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string to_hex(std::uint64_t value) {
  char buffer[17];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value, 16);
  std::string digits(buffer, end);
  return std::string(16 - digits.size(), '0') + digits;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [key, value] : manifest) out << key << '=' << value << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read manifest " + path.string());
  Manifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(path.string(), line_no, "expected key=value");
    manifest[std::string(trim(view.substr(0, eq)))] = std::string(trim(view.substr(eq + 1)));
  }
  return manifest;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    parts.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

}  // namespace cdr
