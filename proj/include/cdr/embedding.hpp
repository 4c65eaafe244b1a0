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

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "cdr/util.hpp"

namespace cdr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class EmbeddingRole : std::uint8_t { Pretrain, Finetune, Concatenated };

std::string_view to_string(EmbeddingRole role);

// One row per joint tuple+object node. The leading `trainable_cols` columns
// are updated by the optimizer; the remaining columns are frozen.
struct EmbeddingTable {
  EmbeddingRole role = EmbeddingRole::Pretrain;
  Matrix values;
  std::size_t trainable_cols = 0;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t frozen_cols() const { return dim() - trainable_cols; }
};

// Entries i.i.d. uniform in [-1/sqrt(dim), 1/sqrt(dim)]; all-zero rows are redrawn.
EmbeddingTable init_embeddings(std::size_t rows, std::size_t dim, std::uint64_t seed,
                               EmbeddingRole role = EmbeddingRole::Pretrain);

// Row v of the result is fine[v] || pre[v]; only the fine-tuned slice trains.
EmbeddingTable concatenate(const EmbeddingTable& fine, const EmbeddingTable& pre);

// Text checkpoint: a manifest (rows, dim, role, trainable columns and any
// extra keys) plus one shortest-round-trip row per line.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path,
                     const Manifest& extra = {});
EmbeddingTable load_embeddings(const std::filesystem::path& path, Manifest* manifest = nullptr);

}  // namespace cdr
