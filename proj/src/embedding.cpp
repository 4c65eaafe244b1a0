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

#include "cdr/embedding.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cdr/error.hpp"

namespace cdr {

std::string_view to_string(EmbeddingRole role) {
  switch (role) {
    case EmbeddingRole::Pretrain: return "pretrain";
    case EmbeddingRole::Finetune: return "finetune";
    case EmbeddingRole::Concatenated: return "concatenated";
  }
  return "?";
}

namespace {

EmbeddingRole parse_role(const std::string& text) {
  if (text == "pretrain") return EmbeddingRole::Pretrain;
  if (text == "finetune") return EmbeddingRole::Finetune;
  if (text == "concatenated") return EmbeddingRole::Concatenated;
  throw ValidationError("unknown embedding role '" + text + "'");
}

}  // namespace

EmbeddingTable init_embeddings(std::size_t rows, std::size_t dim, std::uint64_t seed,
                               EmbeddingRole role) {
  if (dim == 0) throw ValidationError("embedding dimension must be at least 1");
  EmbeddingTable table;
  table.role = role;
  table.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  table.trainable_cols = dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  Rng rng(seed);
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    do {
      for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
        table.values(r, c) = (2.0 * rng.unit() - 1.0) * bound;
      }
    } while (table.values.row(r).squaredNorm() == 0.0);
  }
  return table;
}

EmbeddingTable concatenate(const EmbeddingTable& fine, const EmbeddingTable& pre) {
  if (fine.rows() != pre.rows()) throw ValidationError("cannot concatenate tables with different row counts");
  EmbeddingTable out;
  out.role = EmbeddingRole::Concatenated;
  out.values.resize(fine.values.rows(), fine.values.cols() + pre.values.cols());
  out.values.leftCols(fine.values.cols()) = fine.values;
  out.values.rightCols(pre.values.cols()) = pre.values;
  out.trainable_cols = fine.dim();
  return out;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     const Manifest& extra) {
  Manifest manifest = extra;
  manifest["rows"] = std::to_string(table.rows());
  manifest["dim"] = std::to_string(table.dim());
  manifest["role"] = std::string(to_string(table.role));
  manifest["trainable_cols"] = std::to_string(table.trainable_cols);
  auto manifest_path = path;
  manifest_path += ".manifest";
  write_manifest(manifest, manifest_path);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      if (c) out << ' ';
      out << format_double(table.values(r, c));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, Manifest* manifest_out) {
  auto manifest_path = path;
  manifest_path += ".manifest";
  const auto manifest = read_manifest(manifest_path);
  auto get = [&](const std::string& key) {
    auto it = manifest.find(key);
    if (it == manifest.end()) throw ValidationError("checkpoint manifest lacks '" + key + "'");
    return it->second;
  };
  EmbeddingTable table;
  table.role = parse_role(get("role"));
  const auto rows = static_cast<Eigen::Index>(std::stoull(get("rows")));
  const auto dim = static_cast<Eigen::Index>(std::stoull(get("dim")));
  table.trainable_cols = std::stoull(get("trainable_cols"));
  table.values.resize(rows, dim);

  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read checkpoint " + path.string());
  std::string line;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw ParseError(path.string(), static_cast<std::size_t>(r + 1), "missing row");
    std::istringstream fields(line);
    std::string field;
    for (Eigen::Index c = 0; c < dim; ++c) {
      if (!(fields >> field)) throw ParseError(path.string(), static_cast<std::size_t>(r + 1), "short row");
      table.values(r, c) = parse_double(field);
    }
  }
  if (manifest_out) *manifest_out = manifest;
  return table;
}

}  // namespace cdr
