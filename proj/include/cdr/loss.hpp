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
#include <optional>
#include <string_view>
#include <vector>

#include "cdr/embedding.hpp"
#include "cdr/metrics.hpp"

namespace cdr {

enum class LossKind : std::uint8_t { CD, Origin, MSE, CE };

std::string_view to_string(LossKind kind);
std::optional<LossKind> parse_loss(std::string_view text);

// Anchored positive pairs (c > 0, no self pairs) plus the candidate set that
// forms the contrastive denominator: every node when `candidates` is empty,
// otherwise the listed ids.
struct Batch {
  std::vector<NodePair> pairs;
  std::optional<std::vector<JointId>> candidates;
};

struct LossOutput {
  double loss = 0.0;
  // One value per batch pair, in batch order (NaN for skipped pairs).
  std::vector<double> per_pair;
  // Pairs whose anchor has an all-zero discrepancy row.
  std::size_t skipped = 0;
};

// sum over pairs of -log( c(v1,v2) exp(cos(v1,v2)/tau) /
//                         sum_{v != v1} d(v1,v) exp(cos(v1,v)/tau) ).
// With sampled candidates the denominator is rescaled by (n - 1) / |K \ {a}|.
// When `grad` is given it receives dL/dE with frozen columns zeroed.
LossOutput cd_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                   double tau, Matrix* grad = nullptr);
Matrix cd_loss_grad(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                    double tau);

// Pointwise ablation losses on the logit x = e_v1 . e_v2, summed over every
// (anchor, candidate) pair of the batch with the candidate != anchor. With
// sampled candidates each anchor's batch positives are added to its pairs.
//   origin: (d - c) * sigmoid(x)
//   ce:     -c log s - d log(1 - s), s = clamp(sigmoid(x), 1e-7, 1 - 1e-7)
//   mse:    (sigmoid(x) - sigmoid(c - d))^2
LossOutput origin_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                       Matrix* grad = nullptr);
LossOutput ce_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                   Matrix* grad = nullptr);
LossOutput mse_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                    Matrix* grad = nullptr);

LossOutput compute_loss(LossKind kind, const Batch& batch, const MetricSet& metrics,
                        const EmbeddingTable& table, double tau, Matrix* grad = nullptr);

// Scalar terms and their derivatives with respect to the logit.
double sigmoid(double x);
double origin_term(double c, double d, double logit);
double origin_term_grad(double c, double d, double logit);
double ce_term(double c, double d, double logit);
double ce_term_grad(double c, double d, double logit);
double mse_term(double c, double d, double logit);
double mse_term_grad(double c, double d, double logit);

}  // namespace cdr
