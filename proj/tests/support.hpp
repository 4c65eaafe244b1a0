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

#include <cmath>
#include <functional>
#include <vector>

#include "cdr/embedding.hpp"
#include "cdr/loss.hpp"
#include "cdr/metrics.hpp"
#include "cdr/util.hpp"

namespace cdr::testing {

// MetricSet holding arbitrary dense c and d over a joint space of
// `tuples + objects` nodes (row-major n x n). Every entry is stored in the
// two-hop layout with a zero column sum, so d(a, b) = 0 - (-d) exactly.
inline MetricSet dense_metric_set(std::size_t tuples, std::size_t objects,
                                  const std::vector<double>& c, const std::vector<double>& d) {
  const std::size_t n = tuples + objects;
  std::array<MetricBlock, 4> blocks;
  const NodeKind kinds[2] = {NodeKind::Tuple, NodeKind::Object};
  for (int bi = 0; bi < 4; ++bi) {
    const NodeKind rk = kinds[bi / 2], ck = kinds[bi % 2];
    const std::size_t r0 = rk == NodeKind::Tuple ? 0 : tuples, rn = rk == NodeKind::Tuple ? tuples : objects;
    const std::size_t c0 = ck == NodeKind::Tuple ? 0 : tuples, cn = ck == NodeKind::Tuple ? tuples : objects;
    auto& b = blocks[bi];
    b.row_kind = rk;
    b.col_kind = ck;
    b.one_hop = false;
    b.consistency.rows = rn;
    b.consistency.cols = cn;
    b.consistency.offsets.assign(1, 0);
    for (std::size_t r = 0; r < rn; ++r) {
      for (std::size_t k = 0; k < cn; ++k) {
        b.consistency.indices.push_back(static_cast<NodeIndex>(k));
        b.consistency.values.push_back(c[(r0 + r) * n + c0 + k]);
        b.consistency.overlap.push_back(1);
        b.subtrahend.push_back(-d[(r0 + r) * n + c0 + k]);
      }
      b.consistency.offsets.push_back(b.consistency.indices.size());
    }
    b.colsum.assign(cn, 0.0);
    b.support.assign(cn, 1);
  }
  return MetricSet(Regime::Finetune, tuples, objects, std::move(blocks));
}

// Random problem on n joint nodes: c > 0 on a sparse pattern, d > 0 elsewhere.
struct Problem {
  MetricSet metrics;
  EmbeddingTable table;
  Batch batch;
};

inline Problem random_problem(std::uint64_t seed, std::size_t n = 10, std::size_t dim = 6,
                              std::size_t frozen = 0) {
  Rng rng(seed);
  const std::size_t tuples = n / 2;
  std::vector<double> c(n * n, 0.0), d(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      if (rng.unit() < 0.3) c[a * n + b] = 0.1 + rng.unit();
      d[a * n + b] = rng.unit() < 0.2 ? 0.0 : 0.05 + rng.unit();
    }
    // Keep every anchor usable.
    const std::size_t partner = (a + 1) % n;
    if (c[a * n + partner] == 0.0) c[a * n + partner] = 0.5;
    d[a * n + (a + 2) % n] = 0.7;
  }
  Problem p{dense_metric_set(tuples, n - tuples, c, d), init_embeddings(n, dim, seed + 7), {}};
  p.table.trainable_cols = dim - frozen;
  p.batch.pairs = p.metrics.positive_pairs();
  return p;
}

// Central finite differences of `f` with respect to every entry of `table`.
inline Matrix numeric_gradient(EmbeddingTable table, const std::function<double(const EmbeddingTable&)>& f,
                               double step = 1e-5) {
  Matrix g = Matrix::Zero(table.values.rows(), table.values.cols());
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      const double keep = table.values(r, k);
      table.values(r, k) = keep + step;
      const double up = f(table);
      table.values(r, k) = keep - step;
      const double down = f(table);
      table.values(r, k) = keep;
      g(r, k) = (up - down) / (2 * step);
    }
  }
  return g;
}

// max |a - b| / max(1, max |b|), a scale-aware relative error.
inline double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace cdr::testing
