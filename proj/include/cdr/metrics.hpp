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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdr/graph.hpp"

namespace cdr {

// Degree coefficient of an infinitely deep light graph convolution:
// (1/deg_mid) * sqrt((deg_mid + 1) / (deg_end + 1)), and 0 when deg_mid == 0.
double delta(std::uint32_t deg_mid, std::uint32_t deg_end);

// Meta-path schemas. The first four have member midpoints and are used for
// pre-training; the last four come from tuple interactions.
enum class Schema : std::uint8_t { TMT, TMO, OMT, OMO, TOT, TO, OT, OTO };

std::string_view to_string(Schema schema);
std::optional<Schema> parse_schema(std::string_view text);

enum class Scenario : std::uint8_t { Group, Bundle };

// Domain spelling of a schema: group recommendation maps tuple/member/object
// to G/U/I, bundle recommendation to B/I/U.
std::string domain_label(Schema schema, Scenario scenario);

// Index into the joint tuple+object space: tuples first, then objects.
using JointId = std::uint32_t;

struct NodePair {
  JointId first = 0;
  JointId second = 0;

  friend bool operator==(const NodePair&, const NodePair&) = default;
};

// CSR matrix of consistency values. `overlap` counts the shared midpoints of
// each stored pair (1 for one-hop entries).
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<NodeIndex> indices;
  std::vector<double> values;
  std::vector<std::uint32_t> overlap;

  std::size_t nnz() const { return indices.size(); }
  std::span<const NodeIndex> row_indices(NodeIndex r) const {
    return {indices.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
  std::span<const double> row_values(NodeIndex r) const {
    return {values.data() + offsets[r], offsets[r + 1] - offsets[r]};
  }
  // Position of (r, c) in `values`, if stored.
  std::optional<std::size_t> find(NodeIndex r, NodeIndex c) const;
  double at(NodeIndex r, NodeIndex c) const;
};

struct MetricBlock {
  Schema schema = Schema::TMT;
  NodeKind row_kind = NodeKind::Tuple;
  NodeKind col_kind = NodeKind::Tuple;
  bool one_hop = false;
  SparseMatrix consistency;

  // Two-hop blocks: d(r, c) = colsum[c] - subtrahend(r, c), where the
  // subtrahend is the stored consistency unless a binarized copy overrides it.
  std::vector<double> colsum;
  std::vector<std::uint32_t> support;  // |N(c)| in midpoints
  std::vector<double> subtrahend;      // empty: use consistency.values

  // One-hop blocks: d(r, c) = row_factor[r] * col_factor[c].
  std::vector<double> row_factor;
  std::vector<double> col_factor;

  double c(NodeIndex r, NodeIndex col) const { return consistency.at(r, col); }
  double d(NodeIndex r, NodeIndex col) const;
  double subtrahend_at(std::size_t pos) const {
    return subtrahend.empty() ? consistency.values[pos] : subtrahend[pos];
  }
};

// The four blocks of one stage laid over the joint tuple+object space.
class MetricSet {
 public:
  MetricSet() = default;
  MetricSet(Regime stage, std::size_t tuples, std::size_t objects,
            std::array<MetricBlock, 4> blocks);

  Regime stage() const { return stage_; }
  std::size_t tuples() const { return tuples_; }
  std::size_t objects() const { return objects_; }
  std::size_t node_count() const { return tuples_ + objects_; }
  bool binarized() const { return binarized_c_ || binarized_d_; }

  NodeKind kind_of(JointId v) const { return v < tuples_ ? NodeKind::Tuple : NodeKind::Object; }
  NodeIndex local(JointId v) const {
    return v < tuples_ ? v : static_cast<NodeIndex>(v - tuples_);
  }
  JointId joint(NodeKind kind, NodeIndex index) const {
    return kind == NodeKind::Tuple ? index : static_cast<JointId>(tuples_ + index);
  }

  // Blocks in order TT, TO, OT, OO.
  const std::array<MetricBlock, 4>& blocks() const { return blocks_; }
  const MetricBlock& block(NodeKind row, NodeKind col) const;

  double consistency(JointId a, JointId b) const;
  double discrepancy(JointId a, JointId b) const;

  // Every (v1, v2) with c > 0 and v1 != v2, ascending by (v1, v2).
  std::vector<NodePair> positive_pairs() const;
  // Dense rows over the joint space; the diagonal entry is forced to 0.
  void discrepancy_row(JointId a, std::span<double> out) const;
  void consistency_row(JointId a, std::span<double> out) const;

  // Replaces c by 1{c > 0} and/or d by 1{d > 0}.
  MetricSet binarized(bool binarize_c, bool binarize_d) const;

 private:
  Regime stage_ = Regime::Pretrain;
  std::size_t tuples_ = 0;
  std::size_t objects_ = 0;
  std::array<MetricBlock, 4> blocks_{};
  bool binarized_c_ = false;
  bool binarized_d_ = false;
};

// c(r, c) = sum of delta(deg_m, deg_c) over midpoints m shared by r and c.
// Rows are expanded through their midpoints in ascending midpoint order, so
// every entry accumulates in sorted-midpoint order.
SparseMatrix build_consistency(const Relation& row_to_mid, const Relation& mid_to_col,
                               std::span<const std::uint32_t> mid_degree,
                               std::span<const std::uint32_t> col_degree);

// S(c) = sum of delta(deg_m, deg_c) over the midpoints of c.
std::vector<double> build_colsums(const Relation& col_to_mid,
                                  std::span<const std::uint32_t> mid_degree,
                                  std::span<const std::uint32_t> col_degree);

// Member-midpoint blocks TMT, TMO, OMT, OMO with pre-training degrees.
MetricSet build_member_metrics(const TripartiteGraph& graph);

// Tuple-interaction blocks TOT, TO, OT, OTO with degrees over `interactions`.
MetricSet build_tuple_metrics(const Relation& interactions);

struct DenseMetrics {
  Regime stage = Regime::Pretrain;
  std::size_t tuples = 0;
  std::size_t objects = 0;
  std::vector<double> c;
  std::vector<double> d;

  std::size_t node_count() const { return tuples + objects; }
  double c_at(JointId a, JointId b) const { return c[a * node_count() + b]; }
  double d_at(JointId a, JointId b) const { return d[a * node_count() + b]; }
};

DenseMetrics to_dense(const MetricSet& set);

// Enumerates every reachable and non-reachable meta-path instance explicitly.
// Verification oracle; refuses graphs with more than `node_cap` nodes.
DenseMetrics bruteforce_metrics(const TripartiteGraph& graph, Regime stage,
                                std::size_t node_cap = 200);

// Writes <name>.coo ("block row col c S_or_delta" per stored entry),
// <name>.vec (colsum/support/factor vectors) and <name>.manifest into `dir`.
void export_metrics(const MetricSet& set, const std::filesystem::path& dir,
                    const std::string& name);
MetricSet import_metrics(const std::filesystem::path& dir, const std::string& name);

}  // namespace cdr
