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
#include <string_view>
#include <vector>

namespace cdr {

// Tuples are groups or bundles, members are the users or items they are made
// of, objects are what gets recommended to (or with) a tuple.
enum class NodeKind : std::uint8_t { Tuple, Member, Object };

std::string_view to_string(NodeKind kind);

using NodeIndex = std::uint32_t;

struct Edge {
  NodeIndex src = 0;
  NodeIndex dst = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct UniverseCounts {
  std::size_t tuples = 0;
  std::size_t members = 0;
  std::size_t objects = 0;

  std::size_t of(NodeKind kind) const;
  std::size_t& of(NodeKind kind);

  friend bool operator==(const UniverseCounts&, const UniverseCounts&) = default;
};

// Binary relation between two node kinds stored as CSR rows with strictly
// sorted, duplicate-free destination lists.
class Relation {
 public:
  Relation() = default;
  Relation(NodeKind src_kind, NodeKind dst_kind, std::size_t src_count,
           std::size_t dst_count);
  // Sorts and deduplicates; throws ValidationError for out-of-range ids.
  Relation(NodeKind src_kind, NodeKind dst_kind, std::size_t src_count,
           std::size_t dst_count, std::vector<Edge> edges);

  NodeKind src_kind() const { return src_kind_; }
  NodeKind dst_kind() const { return dst_kind_; }
  std::size_t src_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t dst_count() const { return dst_count_; }
  std::size_t edge_count() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }
  // Number of duplicate edges dropped at construction.
  std::size_t duplicates_removed() const { return duplicates_removed_; }

  std::span<const NodeIndex> neighbors(NodeIndex src) const;
  std::size_t degree(NodeIndex src) const;
  bool contains(NodeIndex src, NodeIndex dst) const;

  Relation transpose() const;
  // Same edges over larger universes; shrinking is an error.
  Relation resized(std::size_t src_count, std::size_t dst_count) const;
  std::vector<Edge> edges() const;

  friend bool operator==(const Relation& a, const Relation& b) {
    return a.src_kind_ == b.src_kind_ && a.dst_kind_ == b.dst_kind_ &&
           a.dst_count_ == b.dst_count_ && a.offsets_ == b.offsets_ &&
           a.targets_ == b.targets_;
  }

 private:
  NodeKind src_kind_ = NodeKind::Tuple;
  NodeKind dst_kind_ = NodeKind::Object;
  std::size_t dst_count_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeIndex> targets_;
  std::size_t duplicates_removed_ = 0;
};

struct LoadedRelation {
  Relation relation;
  std::size_t duplicates = 0;
  bool empty_file = false;
  // Present when the file carries a "#counts <tuples> <members> <objects>" record.
  std::optional<UniverseCounts> declared_counts;
};

// Reads a tab-separated "src<TAB>dst" edge list. Lines starting with '#' are
// comments except for the counts record. Universe sizes come from `counts`,
// then from the file's counts record, then from max index + 1.
LoadedRelation load_relation(const std::filesystem::path& path, NodeKind src_kind,
                             NodeKind dst_kind,
                             std::optional<UniverseCounts> counts = std::nullopt);

void save_relation(const Relation& relation, const std::filesystem::path& path,
                   std::optional<UniverseCounts> counts = std::nullopt);

enum class Regime : std::uint8_t { Pretrain, Finetune };

std::string_view to_string(Regime regime);

// Per-node degree over the relation subset selected by a regime:
// pretrain counts X and Z edges, finetune counts Y edges only.
struct DegreeTable {
  Regime regime = Regime::Pretrain;
  std::vector<std::uint32_t> tuples;
  std::vector<std::uint32_t> members;
  std::vector<std::uint32_t> objects;

  std::span<const std::uint32_t> of(NodeKind kind) const;
  std::uint64_t total() const;

  friend bool operator==(const DegreeTable&, const DegreeTable&) = default;
};

class TripartiteGraph {
 public:
  // Y may be absent or empty (extreme cold start). Counts across relations
  // sharing a node kind must agree exactly.
  static TripartiteGraph build(std::optional<Relation> tuple_object,
                               Relation member_object, Relation tuple_member);

  const UniverseCounts& counts() const { return counts_; }

  const Relation& tuple_object() const { return y_; }
  const Relation& object_tuple() const { return y_t_; }
  const Relation& member_object() const { return x_; }
  const Relation& object_member() const { return x_t_; }
  const Relation& tuple_member() const { return z_; }
  const Relation& member_tuple() const { return z_t_; }

  const DegreeTable& degrees(Regime regime) const {
    return regime == Regime::Pretrain ? pretrain_degrees_ : finetune_degrees_;
  }

  // Copy of this graph with the tuple interactions replaced, e.g. by a train split.
  TripartiteGraph with_tuple_interactions(Relation tuple_object) const;

 private:
  TripartiteGraph() = default;
  void finish();

  UniverseCounts counts_;
  Relation y_, y_t_, x_, x_t_, z_, z_t_;
  DegreeTable pretrain_degrees_;
  DegreeTable finetune_degrees_;
};

// Recomputes degrees from the adjacency lists.
DegreeTable degrees(const TripartiteGraph& graph, Regime regime);

struct SplitSpec {
  double train_fraction = 0.05;
  double test_fraction = 0.20;
  double valid_fraction = 0.05;
  std::uint64_t seed = 2024;
};

struct InteractionSplit {
  Relation train;
  Relation valid;
  Relation test;
  Relation discarded;
};

// Global uniform partition of the edge set. Part sizes are rounded to the
// nearest integer in the order train, test, valid; the remainder is discarded.
InteractionSplit split_interactions(const Relation& interactions, const SplitSpec& spec);

// Writes train/valid/test/discarded edge lists and split.manifest into `dir`.
void write_split(const InteractionSplit& split, const SplitSpec& spec,
                 const UniverseCounts& counts, const std::filesystem::path& dir);

}  // namespace cdr
