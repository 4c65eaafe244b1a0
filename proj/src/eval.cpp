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

#include "cdr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include "json.hpp"
#include <sstream>

#include "cdr/error.hpp"

namespace cdr {

std::vector<NodeIndex> rank_objects(NodeIndex tuple, const EmbeddingTable& table,
                                    std::size_t tuples, std::size_t objects,
                                    std::span<const NodeIndex> excluded,
                                    const RankingOptions& options,
                                    std::size_t* zero_norm_candidates) {
  if (table.rows() != tuples + objects) throw ValidationError("embedding rows do not match the graph");
  const auto query = table.values.row(tuple);
  const double query_norm = query.norm();
  std::vector<std::pair<double, NodeIndex>> scored;
  scored.reserve(objects);
  for (NodeIndex o = 0; o < objects; ++o) {
    if (std::binary_search(excluded.begin(), excluded.end(), o)) continue;
    const auto row = table.values.row(static_cast<Eigen::Index>(tuples + o));
    double score = query.dot(row);
    if (options.mode == ScoreMode::Cosine) {
      const double norm = row.norm();
      if (norm == 0.0 || query_norm == 0.0) {
        score = -std::numeric_limits<double>::infinity();
        if (zero_norm_candidates) ++*zero_norm_candidates;
      } else {
        score /= norm * query_norm;
      }
    }
    scored.emplace_back(score, o);
  }
  auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  const std::size_t keep = options.limit ? std::min(options.limit, scored.size()) : scored.size();
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
  std::vector<NodeIndex> out(keep);
  for (std::size_t i = 0; i < keep; ++i) out[i] = scored[i].second;
  return out;
}

TopKMetrics topk_metrics(const std::vector<std::vector<NodeIndex>>& rankings,
                         const std::vector<std::vector<NodeIndex>>& truth, std::size_t k) {
  if (k == 0) throw ValidationError("K must be at least 1");
  if (rankings.size() != truth.size()) throw ValidationError("rankings and truth differ in length");
  TopKMetrics m;
  m.k = k;
  std::size_t counted = 0;
  for (std::size_t u = 0; u < truth.size(); ++u) {
    const auto& relevant = truth[u];
    if (relevant.empty()) continue;
    ++counted;
    const auto& ranked = rankings[u];
    const std::size_t depth = std::min(k, ranked.size());
    double hits = 0.0, dcg = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
      if (std::binary_search(relevant.begin(), relevant.end(), ranked[i])) {
        hits += 1.0;
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      }
    }
    double idcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i) {
      idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    m.recall += hits / static_cast<double>(relevant.size());
    m.precision += hits / static_cast<double>(k);
    m.ndcg += dcg / idcg;
  }
  if (counted == 0) throw ValidationError("no recommendee has ground truth");
  m.recall /= static_cast<double>(counted);
  m.precision /= static_cast<double>(counted);
  m.ndcg /= static_cast<double>(counted);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationReport correlation_analysis(std::span<const PairLoss> losses) {
  std::vector<double> c, d, mass, l;
  for (const auto& p : losses) {
    c.push_back(p.c);
    d.push_back(p.d);
    mass.push_back(p.d_mass);
    l.push_back(p.loss);
  }
  CorrelationReport r;
  r.pairs = losses.size();
  r.consistency_vs_loss = pearson(c, l);
  r.discrepancy_vs_loss = pearson(mass, l);
  r.pair_discrepancy_vs_loss = pearson(d, l);
  return r;
}

const TopKMetrics* EvalReport::at(std::size_t k) const {
  for (const auto& m : per_k) {
    if (m.k == k) return &m;
  }
  return nullptr;
}

EvalReport evaluate(const EmbeddingTable& table, const Relation& truth, const Relation& exclude,
                    std::span<const std::size_t> ks, ScoreMode mode) {
  if (ks.empty()) throw ValidationError("no K values requested");
  const std::size_t tuples = truth.src_count(), objects = truth.dst_count();
  if (exclude.src_count() != tuples || exclude.dst_count() != objects) {
    throw ValidationError("exclusion and truth relations differ in shape");
  }
  const std::size_t depth = *std::max_element(ks.begin(), ks.end());
  EvalReport report;
  std::vector<std::vector<NodeIndex>> rankings, targets;
  for (NodeIndex t = 0; t < tuples; ++t) {
    const auto relevant = truth.neighbors(t);
    if (relevant.empty()) continue;
    const auto excluded = exclude.neighbors(t);
    // Ground truth must stay disjoint from the exclusions.
    std::vector<NodeIndex> kept;
    std::set_difference(relevant.begin(), relevant.end(), excluded.begin(), excluded.end(),
                        std::back_inserter(kept));
    if (kept.empty()) continue;
    rankings.push_back(rank_objects(t, table, tuples, objects, excluded, {mode, depth},
                                    &report.zero_norm_candidates));
    targets.push_back(std::move(kept));
  }
  report.recommendees = targets.size();
  for (auto k : ks) report.per_k.push_back(topk_metrics(rankings, targets, k));
  return report;
}

Validator make_validator(const Relation& truth, const Relation& exclude, std::size_t k,
                         ScoreMode mode) {
  return [truth, exclude, k, mode](const EmbeddingTable& table) {
    const std::size_t ks[] = {k};
    return evaluate(table, truth, exclude, ks, mode).per_k.front().ndcg;
  };
}

std::string report_jsonl(const EvalReport& report, const std::string& label,
                         const std::vector<std::pair<std::string, std::string>>& extra) {
  std::ostringstream out;
  for (const auto& m : report.per_k) {
    nlohmann::json rec = {{"record", "topk"},      {"label", label},         {"k", m.k},
                          {"recall", m.recall},    {"precision", m.precision}, {"ndcg", m.ndcg},
                          {"f1", m.f1},            {"recommendees", report.recommendees}};
    for (const auto& [key, value] : extra) rec[key] = value;
    out << rec.dump() << '\n';
  }
  if (report.correlation) {
    const auto& c = *report.correlation;
    nlohmann::json rec = {{"record", "correlation"}, {"label", label}, {"pairs", c.pairs}};
    for (const auto& [key, value] : extra) rec[key] = value;
    rec["corr_c_loss"] = c.consistency_vs_loss ? nlohmann::json(*c.consistency_vs_loss) : nlohmann::json();
    rec["corr_d_loss"] = c.discrepancy_vs_loss ? nlohmann::json(*c.discrepancy_vs_loss) : nlohmann::json();
    rec["corr_pair_d_loss"] =
        c.pair_discrepancy_vs_loss ? nlohmann::json(*c.pair_discrepancy_vs_loss) : nlohmann::json();
    out << rec.dump() << '\n';
  }
  return out.str();
}

std::string report_table(const std::vector<ReportRow>& rows) {
  std::vector<std::size_t> ks;
  for (const auto& row : rows) {
    for (const auto& m : row.report.per_k) {
      if (std::find(ks.begin(), ks.end(), m.k) == ks.end()) ks.push_back(m.k);
    }
  }
  std::sort(ks.begin(), ks.end());
  std::size_t label_width = 8;
  for (const auto& row : rows) label_width = std::max(label_width, row.label.size() + 2);

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(label_width)) << "Method";
  for (auto k : ks) out << std::setw(10) << ("R@" + std::to_string(k));
  for (auto k : ks) out << std::setw(10) << ("N@" + std::to_string(k));
  out << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& row : rows) {
    out << std::setw(static_cast<int>(label_width)) << row.label;
    for (auto k : ks) {
      const auto* m = row.report.at(k);
      out << std::setw(10);
      if (m) out << m->recall; else out << "-";
    }
    for (auto k : ks) {
      const auto* m = row.report.at(k);
      out << std::setw(10);
      if (m) out << m->ndcg; else out << "-";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cdr
