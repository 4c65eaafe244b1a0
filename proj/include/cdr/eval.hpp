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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdr/embedding.hpp"
#include "cdr/graph.hpp"
#include "cdr/train.hpp"

namespace cdr {

enum class ScoreMode : std::uint8_t { Cosine, Dot };

struct RankingOptions {
  ScoreMode mode = ScoreMode::Cosine;
  // Truncate the ranking to this many objects (0 keeps all).
  std::size_t limit = 0;
};

// Objects ranked for one tuple by descending score, ties by ascending object
// id. `excluded` must be sorted; excluded objects never appear. Candidates
// with a zero-norm row score -inf under cosine and are counted in
// `zero_norm_candidates` when given.
std::vector<NodeIndex> rank_objects(NodeIndex tuple, const EmbeddingTable& table,
                                    std::size_t tuples, std::size_t objects,
                                    std::span<const NodeIndex> excluded,
                                    const RankingOptions& options = {},
                                    std::size_t* zero_norm_candidates = nullptr);

struct TopKMetrics {
  std::size_t k = 0;
  double recall = 0.0;
  double precision = 0.0;
  double ndcg = 0.0;
  double f1 = 0.0;
};

// Macro averages over recommendees with non-empty truth. `truth` lists must be
// sorted. F1 is computed from the averaged precision and recall.
TopKMetrics topk_metrics(const std::vector<std::vector<NodeIndex>>& rankings,
                         const std::vector<std::vector<NodeIndex>>& truth, std::size_t k);

// Pearson r, or nullopt when either series has zero variance or n < 3.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
  std::size_t pairs = 0;
  std::optional<double> consistency_vs_loss;
  // Against the anchor's total discrepancy mass, i.e. the denominator weights.
  std::optional<double> discrepancy_vs_loss;
  // Against the pair's own d(v1, v2).
  std::optional<double> pair_discrepancy_vs_loss;
};

CorrelationReport correlation_analysis(std::span<const PairLoss> losses);

struct EvalReport {
  std::vector<TopKMetrics> per_k;
  std::size_t recommendees = 0;
  std::size_t zero_norm_candidates = 0;
  std::optional<CorrelationReport> correlation;

  const TopKMetrics* at(std::size_t k) const;
};

// Ranks all objects for each tuple with a non-empty `truth` row, excluding
// the tuple's `exclude` row (train and validation positives).
EvalReport evaluate(const EmbeddingTable& table, const Relation& truth, const Relation& exclude,
                    std::span<const std::size_t> ks, ScoreMode mode = ScoreMode::Cosine);

// NDCG@k over `truth`, used as the early-stopping signal.
Validator make_validator(const Relation& truth, const Relation& exclude, std::size_t k = 20,
                         ScoreMode mode = ScoreMode::Cosine);

// One JSON object per line: a record per K and an optional correlation record.
// `extra` string fields are copied into every record.
std::string report_jsonl(const EvalReport& report, const std::string& label,
                         const std::vector<std::pair<std::string, std::string>>& extra = {});

struct ReportRow {
  std::string label;
  EvalReport report;
};

// Aligned table with R@K columns followed by N@K columns.
std::string report_table(const std::vector<ReportRow>& rows);

}  // namespace cdr
