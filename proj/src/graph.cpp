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

#include "cdr/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <string>

#include "cdr/error.hpp"
#include "cdr/util.hpp"

namespace cdr {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Tuple: return "tuple";
    case NodeKind::Member: return "member";
    case NodeKind::Object: return "object";
  }
  return "?";
}

std::string_view to_string(Regime regime) {
  return regime == Regime::Pretrain ? "pretrain" : "finetune";
}

std::size_t UniverseCounts::of(NodeKind kind) const {
  switch (kind) {
    case NodeKind::Tuple: return tuples;
    case NodeKind::Member: return members;
    case NodeKind::Object: return objects;
  }
  return 0;
}

std::size_t& UniverseCounts::of(NodeKind kind) {
  switch (kind) {
    case NodeKind::Tuple: return tuples;
    case NodeKind::Member: return members;
    default: return objects;
  }
}

// ---------------------------------------------------------------------------
// Relation

Relation::Relation(NodeKind src_kind, NodeKind dst_kind, std::size_t src_count,
                   std::size_t dst_count)
    : src_kind_(src_kind), dst_kind_(dst_kind), dst_count_(dst_count),
      offsets_(src_count + 1, 0) {}

Relation::Relation(NodeKind src_kind, NodeKind dst_kind, std::size_t src_count,
                   std::size_t dst_count, std::vector<Edge> edges)
    : Relation(src_kind, dst_kind, src_count, dst_count) {
  for (const auto& e : edges) {
    if (e.src >= src_count || e.dst >= dst_count) {
      throw ValidationError("edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                            ") out of range for " + std::string(to_string(src_kind)) + "->" +
                            std::string(to_string(dst_kind)) + " relation of size " +
                            std::to_string(src_count) + "x" + std::to_string(dst_count));
    }
  }
  std::sort(edges.begin(), edges.end());
  const auto unique_end = std::unique(edges.begin(), edges.end());
  duplicates_removed_ = static_cast<std::size_t>(edges.end() - unique_end);
  edges.erase(unique_end, edges.end());

  targets_.reserve(edges.size());
  for (const auto& e : edges) {
    ++offsets_[e.src + 1];
    targets_.push_back(e.dst);
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
}

std::span<const NodeIndex> Relation::neighbors(NodeIndex src) const {
  return {targets_.data() + offsets_[src], offsets_[src + 1] - offsets_[src]};
}

std::size_t Relation::degree(NodeIndex src) const { return offsets_[src + 1] - offsets_[src]; }

bool Relation::contains(NodeIndex src, NodeIndex dst) const {
  if (src >= src_count()) return false;
  auto row = neighbors(src);
  return std::binary_search(row.begin(), row.end(), dst);
}

Relation Relation::transpose() const {
  Relation t(dst_kind_, src_kind_, dst_count_, src_count());
  t.targets_.resize(targets_.size());
  for (auto dst : targets_) ++t.offsets_[dst + 1];
  std::partial_sum(t.offsets_.begin(), t.offsets_.end(), t.offsets_.begin());
  std::vector<std::size_t> cursor(t.offsets_.begin(), t.offsets_.end() - 1);
  // Rows are visited in ascending order, so each transposed row comes out sorted.
  for (NodeIndex src = 0; src < src_count(); ++src) {
    for (auto dst : neighbors(src)) t.targets_[cursor[dst]++] = src;
  }
  return t;
}

Relation Relation::resized(std::size_t src_count, std::size_t dst_count) const {
  if (src_count < this->src_count() || dst_count < dst_count_) {
    throw ValidationError("cannot shrink relation universe");
  }
  Relation r = *this;
  r.dst_count_ = dst_count;
  r.offsets_.resize(src_count + 1, offsets_.back());
  return r;
}

std::vector<Edge> Relation::edges() const {
  std::vector<Edge> out;
  out.reserve(targets_.size());
  for (NodeIndex src = 0; src < src_count(); ++src) {
    for (auto dst : neighbors(src)) out.push_back({src, dst});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edge-list files

namespace {

std::uint64_t parse_id(std::string_view field, const std::string& path, std::size_t line) {
  field = trim(field);
  if (field.empty()) throw ParseError(path, line, "missing node id");
  if (field.front() == '-') throw ParseError(path, line, "negative node id '" + std::string(field) + "'");
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || end != field.data() + field.size()) {
    throw ParseError(path, line, "node id is not a non-negative integer: '" + std::string(field) + "'");
  }
  if (value > std::numeric_limits<NodeIndex>::max() - 1) {
    throw ParseError(path, line, "node id too large");
  }
  return value;
}

std::optional<UniverseCounts> parse_counts_record(std::string_view line, const std::string& path,
                                                  std::size_t line_no) {
  constexpr std::string_view kTag = "#counts";
  if (line.substr(0, kTag.size()) != kTag) return std::nullopt;
  std::vector<std::uint64_t> values;
  for (const auto& part : split(trim(line.substr(kTag.size())), ' ')) {
    if (trim(part).empty()) continue;
    for (const auto& sub : split(part, '\t')) {
      if (!trim(sub).empty()) values.push_back(parse_id(sub, path, line_no));
    }
  }
  if (values.size() != 3) throw ParseError(path, line_no, "#counts needs <tuples> <members> <objects>");
  return UniverseCounts{values[0], values[1], values[2]};
}

}  // namespace

LoadedRelation load_relation(const std::filesystem::path& path, NodeKind src_kind,
                             NodeKind dst_kind, std::optional<UniverseCounts> counts) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open edge file " + path.string());
  const std::string name = path.string();

  LoadedRelation loaded;
  std::vector<Edge> edges;
  std::size_t max_src = 0, max_dst = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (auto c = parse_counts_record(view, name, line_no)) loaded.declared_counts = c;
      continue;
    }
    auto tab = view.find('\t');
    if (tab == std::string_view::npos) throw ParseError(name, line_no, "expected src<TAB>dst");
    auto rest = view.substr(tab + 1);
    if (rest.find('\t') != std::string_view::npos) throw ParseError(name, line_no, "too many fields");
    const auto src = parse_id(view.substr(0, tab), name, line_no);
    const auto dst = parse_id(rest, name, line_no);
    edges.push_back({static_cast<NodeIndex>(src), static_cast<NodeIndex>(dst)});
    max_src = std::max<std::size_t>(max_src, src + 1);
    max_dst = std::max<std::size_t>(max_dst, dst + 1);
  }

  std::size_t src_count = max_src, dst_count = max_dst;
  if (auto fixed = counts ? counts : loaded.declared_counts) {
    src_count = fixed->of(src_kind);
    dst_count = fixed->of(dst_kind);
  }
  loaded.empty_file = edges.empty();
  loaded.relation = Relation(src_kind, dst_kind, src_count, dst_count, std::move(edges));
  loaded.duplicates = loaded.relation.duplicates_removed();
  return loaded;
}

void save_relation(const Relation& relation, const std::filesystem::path& path,
                   std::optional<UniverseCounts> counts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (counts) out << "#counts " << counts->tuples << ' ' << counts->members << ' ' << counts->objects << '\n';
  for (NodeIndex src = 0; src < relation.src_count(); ++src) {
    for (auto dst : relation.neighbors(src)) out << src << '\t' << dst << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Degrees

std::span<const std::uint32_t> DegreeTable::of(NodeKind kind) const {
  switch (kind) {
    case NodeKind::Tuple: return tuples;
    case NodeKind::Member: return members;
    case NodeKind::Object: return objects;
  }
  return {};
}

std::uint64_t DegreeTable::total() const {
  std::uint64_t sum = 0;
  for (auto* v : {&tuples, &members, &objects}) {
    for (auto d : *v) sum += d;
  }
  return sum;
}

namespace {

std::vector<std::uint32_t> row_degrees(const Relation& r) {
  std::vector<std::uint32_t> out(r.src_count());
  for (NodeIndex i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint32_t>(r.degree(i));
  return out;
}

}  // namespace

DegreeTable degrees(const TripartiteGraph& graph, Regime regime) {
  const auto& c = graph.counts();
  DegreeTable table;
  table.regime = regime;
  if (regime == Regime::Pretrain) {
    table.tuples = row_degrees(graph.tuple_member());
    table.objects = row_degrees(graph.object_member());
    table.members = row_degrees(graph.member_object());
    const auto affiliations = row_degrees(graph.member_tuple());
    for (std::size_t m = 0; m < c.members; ++m) table.members[m] += affiliations[m];
  } else {
    table.tuples = row_degrees(graph.tuple_object());
    table.objects = row_degrees(graph.object_tuple());
    table.members.assign(c.members, 0);
  }
  return table;
}

// ---------------------------------------------------------------------------
// TripartiteGraph

namespace {

void expect_kinds(const Relation& r, NodeKind src, NodeKind dst, std::string_view name) {
  if (r.src_kind() != src || r.dst_kind() != dst) {
    throw ValidationError(std::string(name) + " must be a " + std::string(to_string(src)) + "->" +
                          std::string(to_string(dst)) + " relation");
  }
}

void expect_count(std::size_t a, std::size_t b, NodeKind kind, std::string_view ra,
                  std::string_view rb) {
  if (a != b) {
    throw ValidationError(std::string(to_string(kind)) + " count mismatch: " + std::string(ra) +
                          " has " + std::to_string(a) + ", " + std::string(rb) + " has " +
                          std::to_string(b));
  }
}

}  // namespace

TripartiteGraph TripartiteGraph::build(std::optional<Relation> tuple_object,
                                       Relation member_object, Relation tuple_member) {
  expect_kinds(member_object, NodeKind::Member, NodeKind::Object, "member interactions");
  expect_kinds(tuple_member, NodeKind::Tuple, NodeKind::Member, "affiliations");
  expect_count(member_object.src_count(), tuple_member.dst_count(), NodeKind::Member,
               "member interactions", "affiliations");

  TripartiteGraph g;
  g.counts_ = {tuple_member.src_count(), member_object.src_count(), member_object.dst_count()};
  if (tuple_object) {
    expect_kinds(*tuple_object, NodeKind::Tuple, NodeKind::Object, "tuple interactions");
    expect_count(tuple_object->src_count(), g.counts_.tuples, NodeKind::Tuple,
                 "tuple interactions", "affiliations");
    expect_count(tuple_object->dst_count(), g.counts_.objects, NodeKind::Object,
                 "tuple interactions", "member interactions");
    g.y_ = std::move(*tuple_object);
  } else {
    g.y_ = Relation(NodeKind::Tuple, NodeKind::Object, g.counts_.tuples, g.counts_.objects);
  }
  g.x_ = std::move(member_object);
  g.z_ = std::move(tuple_member);
  g.x_t_ = g.x_.transpose();
  g.z_t_ = g.z_.transpose();
  g.finish();
  return g;
}

TripartiteGraph TripartiteGraph::with_tuple_interactions(Relation tuple_object) const {
  expect_kinds(tuple_object, NodeKind::Tuple, NodeKind::Object, "tuple interactions");
  expect_count(tuple_object.src_count(), counts_.tuples, NodeKind::Tuple, "tuple interactions",
               "graph");
  expect_count(tuple_object.dst_count(), counts_.objects, NodeKind::Object, "tuple interactions",
               "graph");
  TripartiteGraph g = *this;
  g.y_ = std::move(tuple_object);
  g.finish();
  return g;
}

void TripartiteGraph::finish() {
  y_t_ = y_.transpose();
  pretrain_degrees_ = cdr::degrees(*this, Regime::Pretrain);
  finetune_degrees_ = cdr::degrees(*this, Regime::Finetune);
}

// ---------------------------------------------------------------------------
// Splits

InteractionSplit split_interactions(const Relation& interactions, const SplitSpec& spec) {
  for (double f : {spec.train_fraction, spec.test_fraction, spec.valid_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("split fractions must lie in [0, 1]");
  }
  if (spec.train_fraction + spec.test_fraction + spec.valid_fraction > 1.0 + 1e-12) {
    throw ValidationError("split fractions sum to more than 1");
  }
  if (interactions.empty()) throw ValidationError("cannot split an empty interaction set");

  auto edges = interactions.edges();
  Rng rng(spec.seed);
  rng.shuffle(edges);

  const std::size_t n = edges.size();
  auto take = [n](double fraction, std::size_t remaining) {
    return std::min<std::size_t>(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))),
                                 remaining);
  };
  const std::size_t n_train = take(spec.train_fraction, n);
  const std::size_t n_test = take(spec.test_fraction, n - n_train);
  const std::size_t n_valid = take(spec.valid_fraction, n - n_train - n_test);

  auto part = [&](std::size_t begin, std::size_t end) {
    return Relation(interactions.src_kind(), interactions.dst_kind(), interactions.src_count(),
                    interactions.dst_count(),
                    std::vector<Edge>(edges.begin() + static_cast<std::ptrdiff_t>(begin),
                                      edges.begin() + static_cast<std::ptrdiff_t>(end)));
  };
  InteractionSplit out;
  out.train = part(0, n_train);
  out.test = part(n_train, n_train + n_test);
  out.valid = part(n_train + n_test, n_train + n_test + n_valid);
  out.discarded = part(n_train + n_test + n_valid, n);
  return out;
}

void write_split(const InteractionSplit& split, const SplitSpec& spec,
                 const UniverseCounts& counts, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_relation(split.train, dir / "train.tsv", counts);
  save_relation(split.valid, dir / "valid.tsv", counts);
  save_relation(split.test, dir / "test.tsv", counts);
  save_relation(split.discarded, dir / "discarded.tsv", counts);
  write_manifest({{"seed", std::to_string(spec.seed)},
                  {"train_fraction", format_double(spec.train_fraction)},
                  {"test_fraction", format_double(spec.test_fraction)},
                  {"valid_fraction", format_double(spec.valid_fraction)},
                  {"train_edges", std::to_string(split.train.edge_count())},
                  {"valid_edges", std::to_string(split.valid.edge_count())},
                  {"test_edges", std::to_string(split.test.edge_count())},
                  {"discarded_edges", std::to_string(split.discarded.edge_count())}},
                 dir / "split.manifest");
}

}  // namespace cdr
