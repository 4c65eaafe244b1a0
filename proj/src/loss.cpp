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

#include "cdr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdr/error.hpp"

namespace cdr {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CD: return "CD";
    case LossKind::Origin: return "Origin";
    case LossKind::MSE: return "MSE";
    case LossKind::CE: return "CE";
  }
  return "?";
}

std::optional<LossKind> parse_loss(std::string_view text) {
  for (auto k : {LossKind::CD, LossKind::Origin, LossKind::MSE, LossKind::CE}) {
    if (to_string(k) == text) return k;
  }
  if (text == "cd") return LossKind::CD;
  if (text == "origin") return LossKind::Origin;
  if (text == "mse") return LossKind::MSE;
  if (text == "ce") return LossKind::CE;
  return std::nullopt;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double origin_term(double c, double d, double logit) { return (d - c) * sigmoid(logit); }

double origin_term_grad(double c, double d, double logit) {
  const double s = sigmoid(logit);
  return (d - c) * s * (1.0 - s);
}

namespace {
constexpr double kProbFloor = 1e-7;
}

double ce_term(double c, double d, double logit) {
  const double s = std::clamp(sigmoid(logit), kProbFloor, 1.0 - kProbFloor);
  return -c * std::log(s) - d * std::log(1.0 - s);
}

double ce_term_grad(double c, double d, double logit) {
  const double s = sigmoid(logit);
  if (s <= kProbFloor || s >= 1.0 - kProbFloor) return 0.0;
  return -c * (1.0 - s) + d * s;
}

double mse_term(double c, double d, double logit) {
  const double diff = sigmoid(logit) - sigmoid(c - d);
  return diff * diff;
}

double mse_term_grad(double c, double d, double logit) {
  const double s = sigmoid(logit);
  return 2.0 * (s - sigmoid(c - d)) * s * (1.0 - s);
}

namespace {

// Unique anchors of a batch, ascending, with their pair multiplicities.
struct AnchorIndex {
  std::vector<JointId> anchors;
  std::vector<int> slot;             // joint id -> row in `anchors`, or -1
  std::vector<std::size_t> multiplicity;

  AnchorIndex(const Batch& batch, std::size_t n) : slot(n, -1) {
    for (const auto& p : batch.pairs) {
      if (p.first >= n || p.second >= n) throw ValidationError("batch pair outside the node space");
      if (p.first == p.second) throw ValidationError("self pairs are not allowed in a batch");
      anchors.push_back(p.first);
    }
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
    multiplicity.assign(anchors.size(), 0);
    for (std::size_t i = 0; i < anchors.size(); ++i) slot[anchors[i]] = static_cast<int>(i);
    for (const auto& p : batch.pairs) ++multiplicity[static_cast<std::size_t>(slot[p.first])];
  }
};

Matrix gather(const Matrix& source, const std::vector<JointId>& ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), source.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = source.row(ids[i]);
  return out;
}

std::vector<JointId> all_nodes(std::size_t n) {
  std::vector<JointId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<JointId>(i);
  return ids;
}

void check_shapes(const MetricSet& metrics, const EmbeddingTable& table) {
  if (table.rows() != metrics.node_count()) {
    throw ValidationError("embedding rows (" + std::to_string(table.rows()) +
                          ") do not match the metric node space (" +
                          std::to_string(metrics.node_count()) + ")");
  }
}

}  // namespace

LossOutput cd_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                   double tau, Matrix* grad) {
  if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
  check_shapes(metrics, table);
  const std::size_t n = metrics.node_count();
  const AnchorIndex index(batch, n);
  const bool sampled = batch.candidates.has_value();
  const std::vector<JointId> cand = sampled ? *batch.candidates : all_nodes(n);
  // Sampled denominators estimate the sum over all n - 1 non-anchor nodes.
  auto scale_for = [&](JointId a) {
    if (!sampled) return 1.0;
    const auto others = cand.size() - static_cast<std::size_t>(std::count(cand.begin(), cand.end(), a));
    return others == 0 ? 1.0 : static_cast<double>(n - 1) / static_cast<double>(others);
  };

  // Unit rows; a zero row stays zero, giving cosine 0 and no gradient.
  const Eigen::VectorXd norms = table.values.rowwise().norm();
  Matrix unit = table.values;
  for (Eigen::Index r = 0; r < unit.rows(); ++r) {
    if (norms(r) > 0.0) unit.row(r) /= norms(r);
  }
  const Matrix ua = gather(unit, index.anchors);
  const Matrix uk = gather(unit, cand);
  const Matrix cos = ua * uk.transpose();  // |A| x |K|

  const auto na = static_cast<Eigen::Index>(index.anchors.size());
  const auto nk = static_cast<Eigen::Index>(cand.size());
  Matrix weight(na, nk);  // d * exp(cos / tau - shift), later the gradient weights
  std::vector<double> drow(n);
  std::vector<double> log_den(index.anchors.size(), 0.0);
  std::vector<bool> degenerate(index.anchors.size(), false);
  for (Eigen::Index i = 0; i < na; ++i) {
    const JointId a = index.anchors[static_cast<std::size_t>(i)];
    metrics.discrepancy_row(a, drow);
    const double shift = cos.row(i).maxCoeff() / tau;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < nk; ++k) {
      const JointId v = cand[static_cast<std::size_t>(k)];
      const double d = v == a ? 0.0 : drow[v];
      const double w = d * std::exp(cos(i, k) / tau - shift);
      weight(i, k) = w;
      sum += w;
    }
    if (sum > 0.0) {
      log_den[static_cast<std::size_t>(i)] = shift + std::log(sum * scale_for(a));
      weight.row(i) *= static_cast<double>(index.multiplicity[static_cast<std::size_t>(i)]) / (tau * sum);
    } else {
      degenerate[static_cast<std::size_t>(i)] = true;
      weight.row(i).setZero();
    }
  }

  LossOutput out;
  out.per_pair.resize(batch.pairs.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const auto [a, b] = batch.pairs[p];
    const auto i = static_cast<std::size_t>(index.slot[a]);
    if (degenerate[i]) {
      ++out.skipped;
      continue;
    }
    const double c = metrics.consistency(a, b);
    if (!(c > 0.0)) throw ValidationError("batch pair has no positive consistency");
    const double s = unit.row(a).dot(unit.row(b));
    const double l = -std::log(c) - s / tau + log_den[i];
    out.per_pair[p] = l;
    out.loss += l;
  }
  if (!grad) return out;

  // d cos(a, v) / d e_a = (u_v - cos * u_a) / |e_a|, symmetric for e_v.
  Matrix g = Matrix::Zero(table.values.rows(), table.values.cols());
  const Matrix weighted_cos = weight.cwiseProduct(cos);
  const Eigen::VectorXd row_mass = weighted_cos.rowwise().sum();
  const Eigen::VectorXd col_mass = weighted_cos.colwise().sum().transpose();
  Matrix ga = weight * uk;
  Matrix gk = weight.transpose() * ua;
  for (Eigen::Index i = 0; i < na; ++i) ga.row(i) -= row_mass(i) * ua.row(i);
  for (Eigen::Index k = 0; k < nk; ++k) gk.row(k) -= col_mass(k) * uk.row(k);
  for (Eigen::Index i = 0; i < na; ++i) {
    const JointId a = index.anchors[static_cast<std::size_t>(i)];
    if (norms(a) > 0.0) g.row(a) += ga.row(i) / norms(a);
  }
  for (Eigen::Index k = 0; k < nk; ++k) {
    const JointId v = cand[static_cast<std::size_t>(k)];
    if (norms(v) > 0.0) g.row(v) += gk.row(k) / norms(v);
  }
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    const auto [a, b] = batch.pairs[p];
    if (degenerate[static_cast<std::size_t>(index.slot[a])]) continue;
    const double s = unit.row(a).dot(unit.row(b));
    const double w = -1.0 / tau;
    if (norms(a) > 0.0) g.row(a) += w * (unit.row(b) - s * unit.row(a)) / norms(a);
    if (norms(b) > 0.0) g.row(b) += w * (unit.row(a) - s * unit.row(b)) / norms(b);
  }
  if (table.frozen_cols() > 0) g.rightCols(static_cast<Eigen::Index>(table.frozen_cols())).setZero();
  *grad = std::move(g);
  return out;
}

Matrix cd_loss_grad(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                    double tau) {
  Matrix grad;
  cd_loss(batch, metrics, table, tau, &grad);
  return grad;
}

namespace {

using Term = double (*)(double, double, double);

LossOutput pointwise_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                          Term term, Term term_grad, Matrix* grad) {
  check_shapes(metrics, table);
  const std::size_t n = metrics.node_count();
  const AnchorIndex index(batch, n);
  std::vector<JointId> cand;
  if (batch.candidates) {
    cand = *batch.candidates;
    for (const auto& p : batch.pairs) cand.push_back(p.second);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  } else {
    cand = all_nodes(n);
  }
  std::vector<int> cand_slot(n, -1);
  for (std::size_t k = 0; k < cand.size(); ++k) cand_slot[cand[k]] = static_cast<int>(k);

  const auto na = static_cast<Eigen::Index>(index.anchors.size());
  const auto nk = static_cast<Eigen::Index>(cand.size());
  // mask(i, k): pair (anchor i, candidate k) contributes.
  Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask(na, nk);
  if (batch.candidates) {
    mask.setZero();
    std::vector<char> sampled(n, 0);
    for (auto v : *batch.candidates) sampled[v] = 1;
    for (Eigen::Index k = 0; k < nk; ++k) {
      if (sampled[cand[static_cast<std::size_t>(k)]]) mask.col(k).setOnes();
    }
    for (const auto& p : batch.pairs) mask(index.slot[p.first], cand_slot[p.second]) = 1;
  } else {
    mask.setOnes();
  }
  for (Eigen::Index i = 0; i < na; ++i) {
    const int k = cand_slot[index.anchors[static_cast<std::size_t>(i)]];
    if (k >= 0) mask(i, k) = 0;
  }

  const Matrix ea = gather(table.values, index.anchors);
  const Matrix ek = gather(table.values, cand);
  const Matrix logits = ea * ek.transpose();
  Matrix values = Matrix::Zero(na, nk);
  Matrix weight = Matrix::Zero(na, nk);
  std::vector<double> crow(n), drow(n);
  LossOutput out;
  for (Eigen::Index i = 0; i < na; ++i) {
    const JointId a = index.anchors[static_cast<std::size_t>(i)];
    metrics.consistency_row(a, crow);
    metrics.discrepancy_row(a, drow);
    for (Eigen::Index k = 0; k < nk; ++k) {
      if (!mask(i, k)) continue;
      const JointId v = cand[static_cast<std::size_t>(k)];
      values(i, k) = term(crow[v], drow[v], logits(i, k));
      weight(i, k) = term_grad(crow[v], drow[v], logits(i, k));
      out.loss += values(i, k);
    }
  }
  out.per_pair.reserve(batch.pairs.size());
  for (const auto& p : batch.pairs) out.per_pair.push_back(values(index.slot[p.first], cand_slot[p.second]));
  if (!grad) return out;

  Matrix g = Matrix::Zero(table.values.rows(), table.values.cols());
  const Matrix ga = weight * ek;
  const Matrix gk = weight.transpose() * ea;
  for (Eigen::Index i = 0; i < na; ++i) g.row(index.anchors[static_cast<std::size_t>(i)]) += ga.row(i);
  for (Eigen::Index k = 0; k < nk; ++k) g.row(cand[static_cast<std::size_t>(k)]) += gk.row(k);
  if (table.frozen_cols() > 0) g.rightCols(static_cast<Eigen::Index>(table.frozen_cols())).setZero();
  *grad = std::move(g);
  return out;
}

}  // namespace

LossOutput origin_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                       Matrix* grad) {
  return pointwise_loss(batch, metrics, table, origin_term, origin_term_grad, grad);
}

LossOutput ce_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                   Matrix* grad) {
  return pointwise_loss(batch, metrics, table, ce_term, ce_term_grad, grad);
}

LossOutput mse_loss(const Batch& batch, const MetricSet& metrics, const EmbeddingTable& table,
                    Matrix* grad) {
  return pointwise_loss(batch, metrics, table, mse_term, mse_term_grad, grad);
}

LossOutput compute_loss(LossKind kind, const Batch& batch, const MetricSet& metrics,
                        const EmbeddingTable& table, double tau, Matrix* grad) {
  switch (kind) {
    case LossKind::CD: return cd_loss(batch, metrics, table, tau, grad);
    case LossKind::Origin: return origin_loss(batch, metrics, table, grad);
    case LossKind::MSE: return mse_loss(batch, metrics, table, grad);
    case LossKind::CE: return ce_loss(batch, metrics, table, grad);
  }
  throw ValidationError("unknown loss");
}

}  // namespace cdr
