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

#include "cdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "cdr/error.hpp"
#include "cdr/util.hpp"

namespace cdr {

double delta(std::uint32_t deg_mid, std::uint32_t deg_end) {
  if (deg_mid == 0) return 0.0;
  const double mid = static_cast<double>(deg_mid);
  return (1.0 / mid) * std::sqrt((mid + 1.0) / (static_cast<double>(deg_end) + 1.0));
}

namespace {

constexpr std::array<std::string_view, 8> kSchemaNames = {"TMT", "TMO", "OMT", "OMO",
                                                          "TOT", "TO",  "OT",  "OTO"};

char role_letter(char generic, Scenario scenario) {
  const bool group = scenario == Scenario::Group;
  switch (generic) {
    case 'T': return group ? 'G' : 'B';
    case 'M': return group ? 'U' : 'I';
    case 'O': return group ? 'I' : 'U';
  }
  return '?';
}

}  // namespace

std::string_view to_string(Schema schema) { return kSchemaNames[static_cast<std::size_t>(schema)]; }

std::optional<Schema> parse_schema(std::string_view text) {
  for (std::size_t i = 0; i < kSchemaNames.size(); ++i) {
    if (kSchemaNames[i] == text) return static_cast<Schema>(i);
  }
  return std::nullopt;
}

std::string domain_label(Schema schema, Scenario scenario) {
  std::string out;
  for (char ch : to_string(schema)) out.push_back(role_letter(ch, scenario));
  return out;
}

// ---------------------------------------------------------------------------
// SparseMatrix / MetricBlock

std::optional<std::size_t> SparseMatrix::find(NodeIndex r, NodeIndex c) const {
  const auto begin = indices.begin() + static_cast<std::ptrdiff_t>(offsets[r]);
  const auto end = indices.begin() + static_cast<std::ptrdiff_t>(offsets[r + 1]);
  const auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return std::nullopt;
  return static_cast<std::size_t>(it - indices.begin());
}

double SparseMatrix::at(NodeIndex r, NodeIndex c) const {
  auto pos = find(r, c);
  return pos ? values[*pos] : 0.0;
}

double MetricBlock::d(NodeIndex r, NodeIndex col) const {
  if (one_hop) return row_factor[r] * col_factor[col];
  auto pos = consistency.find(r, col);
  return pos ? colsum[col] - subtrahend_at(*pos) : colsum[col];
}

// ---------------------------------------------------------------------------
// Builders

SparseMatrix build_consistency(const Relation& row_to_mid, const Relation& mid_to_col,
                               std::span<const std::uint32_t> mid_degree,
                               std::span<const std::uint32_t> col_degree) {
  if (row_to_mid.dst_kind() != mid_to_col.src_kind() ||
      row_to_mid.dst_count() != mid_to_col.src_count()) {
    throw ValidationError("consistency: relations do not share a midpoint universe");
  }
  if (mid_degree.size() != mid_to_col.src_count() || col_degree.size() != mid_to_col.dst_count()) {
    throw ValidationError("consistency: degree table does not match the relations (regime mismatch)");
  }

  SparseMatrix out;
  out.rows = row_to_mid.src_count();
  out.cols = mid_to_col.dst_count();
  out.offsets.assign(out.rows + 1, 0);

  // Dense accumulator reused across rows; `touched` lists the live columns.
  std::vector<double> acc(out.cols, 0.0);
  std::vector<std::uint32_t> count(out.cols, 0);
  std::vector<NodeIndex> touched;
  for (NodeIndex r = 0; r < out.rows; ++r) {
    touched.clear();
    for (NodeIndex m : row_to_mid.neighbors(r)) {
      for (NodeIndex c : mid_to_col.neighbors(m)) {
        if (count[c] == 0) touched.push_back(c);
        acc[c] += delta(mid_degree[m], col_degree[c]);
        ++count[c];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (NodeIndex c : touched) {
      out.indices.push_back(c);
      out.values.push_back(acc[c]);
      out.overlap.push_back(count[c]);
      acc[c] = 0.0;
      count[c] = 0;
    }
    out.offsets[r + 1] = out.indices.size();
  }
  return out;
}

std::vector<double> build_colsums(const Relation& col_to_mid,
                                  std::span<const std::uint32_t> mid_degree,
                                  std::span<const std::uint32_t> col_degree) {
  if (mid_degree.size() != col_to_mid.dst_count() || col_degree.size() != col_to_mid.src_count()) {
    throw ValidationError("colsums: degree table does not match the relation (regime mismatch)");
  }
  std::vector<double> sums(col_to_mid.src_count(), 0.0);
  for (NodeIndex c = 0; c < sums.size(); ++c) {
    double s = 0.0;
    for (NodeIndex m : col_to_mid.neighbors(c)) s += delta(mid_degree[m], col_degree[c]);
    sums[c] = s;
  }
  return sums;
}

namespace {

MetricBlock two_hop_block(Schema schema, NodeKind row_kind, NodeKind col_kind,
                          const Relation& row_to_mid, const Relation& mid_to_col,
                          const Relation& col_to_mid, std::span<const std::uint32_t> mid_degree,
                          std::span<const std::uint32_t> col_degree) {
  MetricBlock block;
  block.schema = schema;
  block.row_kind = row_kind;
  block.col_kind = col_kind;
  block.one_hop = false;
  block.consistency = build_consistency(row_to_mid, mid_to_col, mid_degree, col_degree);
  block.colsum = build_colsums(col_to_mid, mid_degree, col_degree);
  block.support.resize(col_to_mid.src_count());
  for (NodeIndex c = 0; c < block.support.size(); ++c) {
    block.support[c] = static_cast<std::uint32_t>(col_to_mid.degree(c));
  }
  return block;
}

// a_r = sqrt(deg_r + 1) / deg_r and b_c = 1 / sqrt(deg_c + 1), so that
// a_r * b_c == delta(deg_r, deg_c). Zero-degree nodes get zero factors.
MetricBlock one_hop_block(Schema schema, NodeKind row_kind, NodeKind col_kind,
                          const Relation& edges, std::span<const std::uint32_t> row_degree,
                          std::span<const std::uint32_t> col_degree) {
  MetricBlock block;
  block.schema = schema;
  block.row_kind = row_kind;
  block.col_kind = col_kind;
  block.one_hop = true;
  block.row_factor.resize(row_degree.size());
  for (std::size_t r = 0; r < row_degree.size(); ++r) {
    const double deg = row_degree[r];
    block.row_factor[r] = deg > 0 ? std::sqrt(deg + 1.0) / deg : 0.0;
  }
  block.col_factor.resize(col_degree.size());
  for (std::size_t c = 0; c < col_degree.size(); ++c) {
    const double deg = col_degree[c];
    block.col_factor[c] = deg > 0 ? 1.0 / std::sqrt(deg + 1.0) : 0.0;
  }
  auto& m = block.consistency;
  m.rows = edges.src_count();
  m.cols = edges.dst_count();
  m.offsets.assign(m.rows + 1, 0);
  for (NodeIndex r = 0; r < m.rows; ++r) {
    for (NodeIndex c : edges.neighbors(r)) {
      m.indices.push_back(c);
      m.values.push_back(delta(row_degree[r], col_degree[c]));
      m.overlap.push_back(1);
    }
    m.offsets[r + 1] = m.indices.size();
  }
  return block;
}

}  // namespace

MetricSet build_member_metrics(const TripartiteGraph& graph) {
  if (graph.member_object().empty() || graph.tuple_member().empty()) {
    throw ValidationError("member metrics need non-empty member interactions and affiliations");
  }
  const auto& deg = graph.degrees(Regime::Pretrain);
  const auto& z = graph.tuple_member();
  const auto& zt = graph.member_tuple();
  const auto& x = graph.member_object();
  const auto& xt = graph.object_member();
  const auto T = NodeKind::Tuple, O = NodeKind::Object;
  std::array<MetricBlock, 4> blocks = {
      two_hop_block(Schema::TMT, T, T, z, zt, z, deg.members, deg.tuples),
      two_hop_block(Schema::TMO, T, O, z, x, xt, deg.members, deg.objects),
      two_hop_block(Schema::OMT, O, T, xt, zt, z, deg.members, deg.tuples),
      two_hop_block(Schema::OMO, O, O, xt, x, xt, deg.members, deg.objects),
  };
  const auto& c = graph.counts();
  return MetricSet(Regime::Pretrain, c.tuples, c.objects, std::move(blocks));
}

MetricSet build_tuple_metrics(const Relation& interactions) {
  if (interactions.src_kind() != NodeKind::Tuple || interactions.dst_kind() != NodeKind::Object) {
    throw ValidationError("tuple metrics need a tuple->object relation");
  }
  if (interactions.empty()) {
    throw ValidationError("tuple metrics need at least one tuple interaction");
  }
  const auto yt = interactions.transpose();
  std::vector<std::uint32_t> tdeg(interactions.src_count()), odeg(interactions.dst_count());
  for (NodeIndex t = 0; t < tdeg.size(); ++t) tdeg[t] = static_cast<std::uint32_t>(interactions.degree(t));
  for (NodeIndex o = 0; o < odeg.size(); ++o) odeg[o] = static_cast<std::uint32_t>(yt.degree(o));

  const auto T = NodeKind::Tuple, O = NodeKind::Object;
  std::array<MetricBlock, 4> blocks = {
      two_hop_block(Schema::TOT, T, T, interactions, yt, interactions, odeg, tdeg),
      one_hop_block(Schema::TO, T, O, interactions, tdeg, odeg),
      one_hop_block(Schema::OT, O, T, yt, odeg, tdeg),
      two_hop_block(Schema::OTO, O, O, yt, interactions, yt, tdeg, odeg),
  };
  return MetricSet(Regime::Finetune, interactions.src_count(), interactions.dst_count(),
                   std::move(blocks));
}

// ---------------------------------------------------------------------------
// MetricSet

MetricSet::MetricSet(Regime stage, std::size_t tuples, std::size_t objects,
                     std::array<MetricBlock, 4> blocks)
    : stage_(stage), tuples_(tuples), objects_(objects), blocks_(std::move(blocks)) {}

const MetricBlock& MetricSet::block(NodeKind row, NodeKind col) const {
  const std::size_t i = (row == NodeKind::Tuple ? 0 : 2) + (col == NodeKind::Tuple ? 0 : 1);
  return blocks_[i];
}

double MetricSet::consistency(JointId a, JointId b) const {
  return block(kind_of(a), kind_of(b)).c(local(a), local(b));
}

double MetricSet::discrepancy(JointId a, JointId b) const {
  if (a == b) return 0.0;
  return block(kind_of(a), kind_of(b)).d(local(a), local(b));
}

std::vector<NodePair> MetricSet::positive_pairs() const {
  std::vector<NodePair> pairs;
  for (JointId a = 0; a < node_count(); ++a) {
    for (NodeKind col_kind : {NodeKind::Tuple, NodeKind::Object}) {
      const auto& blk = block(kind_of(a), col_kind);
      const auto cols = blk.consistency.row_indices(local(a));
      const auto vals = blk.consistency.row_values(local(a));
      for (std::size_t k = 0; k < cols.size(); ++k) {
        const JointId b = joint(col_kind, cols[k]);
        if (b != a && vals[k] > 0.0) pairs.push_back({a, b});
      }
    }
  }
  return pairs;
}

void MetricSet::discrepancy_row(JointId a, std::span<double> out) const {
  const NodeIndex r = local(a);
  for (NodeKind col_kind : {NodeKind::Tuple, NodeKind::Object}) {
    const auto& blk = block(kind_of(a), col_kind);
    double* dst = out.data() + (col_kind == NodeKind::Tuple ? 0 : tuples_);
    const std::size_t width = col_kind == NodeKind::Tuple ? tuples_ : objects_;
    if (blk.one_hop) {
      const double ra = blk.row_factor[r];
      for (std::size_t c = 0; c < width; ++c) dst[c] = ra * blk.col_factor[c];
    } else {
      std::copy(blk.colsum.begin(), blk.colsum.end(), dst);
      const auto& m = blk.consistency;
      for (std::size_t pos = m.offsets[r]; pos < m.offsets[r + 1]; ++pos) {
        dst[m.indices[pos]] = blk.colsum[m.indices[pos]] - blk.subtrahend_at(pos);
      }
    }
  }
  out[a] = 0.0;
}

void MetricSet::consistency_row(JointId a, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  const NodeIndex r = local(a);
  for (NodeKind col_kind : {NodeKind::Tuple, NodeKind::Object}) {
    const auto& m = block(kind_of(a), col_kind).consistency;
    double* dst = out.data() + (col_kind == NodeKind::Tuple ? 0 : tuples_);
    for (std::size_t pos = m.offsets[r]; pos < m.offsets[r + 1]; ++pos) dst[m.indices[pos]] = m.values[pos];
  }
  out[a] = 0.0;
}

MetricSet MetricSet::binarized(bool binarize_c, bool binarize_d) const {
  MetricSet out = *this;
  for (auto& blk : out.blocks_) {
    auto& m = blk.consistency;
    if (binarize_d) {
      if (blk.one_hop) {
        for (auto& f : blk.row_factor) f = f > 0.0 ? 1.0 : 0.0;
        for (auto& f : blk.col_factor) f = f > 0.0 ? 1.0 : 0.0;
      } else {
        // d > 0 exactly when the column node has a midpoint the row node lacks.
        blk.subtrahend.resize(m.nnz());
        for (NodeIndex r = 0; r < m.rows; ++r) {
          for (std::size_t pos = m.offsets[r]; pos < m.offsets[r + 1]; ++pos) {
            blk.subtrahend[pos] = m.overlap[pos] == blk.support[m.indices[pos]] ? 1.0 : 0.0;
          }
        }
        for (std::size_t c = 0; c < blk.colsum.size(); ++c) {
          blk.colsum[c] = blk.support[c] > 0 ? 1.0 : 0.0;
        }
      }
    } else if (binarize_c && !blk.one_hop && blk.subtrahend.empty()) {
      blk.subtrahend = m.values;
    }
    if (binarize_c) {
      for (auto& v : m.values) v = v > 0.0 ? 1.0 : 0.0;
    }
  }
  out.binarized_c_ = binarized_c_ || binarize_c;
  out.binarized_d_ = binarized_d_ || binarize_d;
  return out;
}

DenseMetrics to_dense(const MetricSet& set) {
  DenseMetrics dense;
  dense.stage = set.stage();
  dense.tuples = set.tuples();
  dense.objects = set.objects();
  const std::size_t n = set.node_count();
  dense.c.assign(n * n, 0.0);
  dense.d.assign(n * n, 0.0);
  for (JointId a = 0; a < n; ++a) {
    std::span<double> crow(dense.c.data() + a * n, n);
    std::span<double> drow(dense.d.data() + a * n, n);
    set.discrepancy_row(a, drow);
    set.consistency_row(a, crow);
    crow[a] = set.consistency(a, a);
  }
  return dense;
}

// ---------------------------------------------------------------------------
// Brute-force oracle

namespace {

// Dense 0/1 adjacency rebuilt from edge lists.
struct Adjacency {
  std::size_t rows = 0, cols = 0;
  std::vector<char> bits;
  Adjacency(const Relation& r) : rows(r.src_count()), cols(r.dst_count()), bits(rows * cols, 0) {
    for (const auto& e : r.edges()) bits[e.src * cols + e.dst] = 1;
  }
  bool has(std::size_t r, std::size_t c) const { return bits[r * cols + c] != 0; }
  std::uint32_t row_count(std::size_t r) const {
    std::uint32_t n = 0;
    for (std::size_t c = 0; c < cols; ++c) n += bits[r * cols + c];
    return n;
  }
  std::uint32_t col_count(std::size_t c) const {
    std::uint32_t n = 0;
    for (std::size_t r = 0; r < rows; ++r) n += bits[r * cols + c];
    return n;
  }
};

}  // namespace

DenseMetrics bruteforce_metrics(const TripartiteGraph& graph, Regime stage, std::size_t node_cap) {
  const auto& counts = graph.counts();
  const std::size_t T = counts.tuples, M = counts.members, O = counts.objects;
  if (T + M + O > node_cap) {
    throw ValidationError("bruteforce_metrics: " + std::to_string(T + M + O) +
                          " nodes exceeds the cap of " + std::to_string(node_cap));
  }
  DenseMetrics out;
  out.stage = stage;
  out.tuples = T;
  out.objects = O;
  const std::size_t n = T + O;
  out.c.assign(n * n, 0.0);
  out.d.assign(n * n, 0.0);
  auto is_tuple = [T](std::size_t v) { return v < T; };

  if (stage == Regime::Pretrain) {
    const Adjacency z(graph.tuple_member());   // T x M
    const Adjacency x(graph.member_object());  // M x O
    // Pre-training degrees: members over X and Z, tuples over Z, objects over X.
    std::vector<std::uint32_t> deg_m(M), deg_t(T), deg_o(O);
    for (std::size_t m = 0; m < M; ++m) deg_m[m] = x.row_count(m) + z.col_count(m);
    for (std::size_t t = 0; t < T; ++t) deg_t[t] = z.row_count(t);
    for (std::size_t o = 0; o < O; ++o) deg_o[o] = x.col_count(o);
    auto linked = [&](std::size_t v, std::size_t m) {
      return is_tuple(v) ? z.has(v, m) : x.has(m, v - T);
    };
    auto end_degree = [&](std::size_t v) { return is_tuple(v) ? deg_t[v] : deg_o[v - T]; };

    for (std::size_t v1 = 0; v1 < n; ++v1) {
      for (std::size_t v2 = 0; v2 < n; ++v2) {
        double c = 0.0, d = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
          if (!linked(v2, m)) continue;
          const double w = delta(deg_m[m], end_degree(v2));
          if (linked(v1, m)) {
            c += w;  // reachable v1 - m - v2
          } else {
            d += w;  // non-reachable v1 ~ m - v2
          }
        }
        out.c[v1 * n + v2] = c;
        out.d[v1 * n + v2] = d;
      }
    }
    return out;
  }

  const Adjacency y(graph.tuple_object());  // T x O
  std::vector<std::uint32_t> deg_t(T), deg_o(O);
  for (std::size_t t = 0; t < T; ++t) deg_t[t] = y.row_count(t);
  for (std::size_t o = 0; o < O; ++o) deg_o[o] = y.col_count(o);
  auto degree_of = [&](std::size_t v) { return is_tuple(v) ? deg_t[v] : deg_o[v - T]; };
  auto linked = [&](std::size_t a, std::size_t b) {  // a, b of different kinds
    return is_tuple(a) ? y.has(a, b - T) : y.has(b, a - T);
  };

  for (std::size_t v1 = 0; v1 < n; ++v1) {
    for (std::size_t v2 = 0; v2 < n; ++v2) {
      double c = 0.0, d = 0.0;
      if (is_tuple(v1) == is_tuple(v2)) {
        // Two hops through the other kind: T-O-T or O-T-O.
        const std::size_t mid_begin = is_tuple(v1) ? T : 0;
        const std::size_t mid_end = is_tuple(v1) ? n : T;
        for (std::size_t mid = mid_begin; mid < mid_end; ++mid) {
          if (!linked(mid, v2)) continue;
          const double w = delta(degree_of(mid), degree_of(v2));
          if (linked(v1, mid)) {
            c += w;
          } else {
            d += w;
          }
        }
      } else if (degree_of(v1) > 0 && degree_of(v2) > 0) {
        const double w = delta(degree_of(v1), degree_of(v2));
        d = w;
        c = linked(v1, v2) ? w : 0.0;
      }
      out.c[v1 * n + v2] = c;
      out.d[v1 * n + v2] = d;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export / import

void export_metrics(const MetricSet& set, const std::filesystem::path& dir, const std::string& name) {
  if (set.binarized()) throw ValidationError("binarized metric sets are derived; export the source set");
  std::filesystem::create_directories(dir);
  const auto coo_path = dir / (name + ".coo");
  const auto vec_path = dir / (name + ".vec");
  std::ofstream coo(coo_path), vec(vec_path);
  if (!coo || !vec) throw std::runtime_error("cannot write metrics into " + dir.string());

  Manifest manifest;
  manifest["format"] = "block row col c S_or_delta";
  manifest["stage"] = std::string(to_string(set.stage()));
  manifest["tuples"] = std::to_string(set.tuples());
  manifest["objects"] = std::to_string(set.objects());
  manifest["index_space"] = "row/col are local indices within the block's row/col kind";
  std::string block_list;
  for (const auto& blk : set.blocks()) {
    const std::string label(to_string(blk.schema));
    block_list += (block_list.empty() ? "" : ",") + label;
    manifest["block." + label + ".rows"] = std::string(to_string(blk.row_kind));
    manifest["block." + label + ".cols"] = std::string(to_string(blk.col_kind));
    manifest["block." + label + ".hops"] = blk.one_hop ? "1" : "2";
    manifest["block." + label + ".entries"] = std::to_string(blk.consistency.nnz());

    const auto& m = blk.consistency;
    for (NodeIndex r = 0; r < m.rows; ++r) {
      for (std::size_t pos = m.offsets[r]; pos < m.offsets[r + 1]; ++pos) {
        const NodeIndex c = m.indices[pos];
        const double second = blk.one_hop ? blk.row_factor[r] * blk.col_factor[c] : blk.colsum[c];
        coo << label << ' ' << r << ' ' << c << ' ' << format_double(m.values[pos]) << ' '
            << format_double(second) << '\n';
      }
    }
    auto dump = [&](std::string_view kind, const auto& values) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        vec << label << ' ' << kind << ' ' << i << ' ' << format_double(static_cast<double>(values[i]))
            << '\n';
      }
    };
    if (blk.one_hop) {
      dump("row_factor", blk.row_factor);
      dump("col_factor", blk.col_factor);
    } else {
      dump("colsum", blk.colsum);
      dump("support", blk.support);
    }
  }
  manifest["blocks"] = block_list;
  if (!coo || !vec) throw std::runtime_error("write failed in " + dir.string());
  write_manifest(manifest, dir / (name + ".manifest"));
}

MetricSet import_metrics(const std::filesystem::path& dir, const std::string& name) {
  const auto manifest = read_manifest(dir / (name + ".manifest"));
  auto get = [&](const std::string& key) {
    auto it = manifest.find(key);
    if (it == manifest.end()) throw ValidationError("metric manifest lacks '" + key + "'");
    return it->second;
  };
  const Regime stage = get("stage") == "pretrain" ? Regime::Pretrain : Regime::Finetune;
  const std::size_t tuples = std::stoull(get("tuples"));
  const std::size_t objects = std::stoull(get("objects"));
  auto width = [&](NodeKind k) { return k == NodeKind::Tuple ? tuples : objects; };

  std::array<MetricBlock, 4> blocks{};
  std::map<std::string, std::size_t> slot;
  const auto labels = split(get("blocks"), ',');
  if (labels.size() != 4) throw ValidationError("metric manifest must list four blocks");
  for (std::size_t i = 0; i < 4; ++i) {
    auto schema = parse_schema(labels[i]);
    if (!schema) throw ValidationError("unknown block '" + labels[i] + "'");
    auto& blk = blocks[i];
    blk.schema = *schema;
    blk.row_kind = get("block." + labels[i] + ".rows") == "tuple" ? NodeKind::Tuple : NodeKind::Object;
    blk.col_kind = get("block." + labels[i] + ".cols") == "tuple" ? NodeKind::Tuple : NodeKind::Object;
    blk.one_hop = get("block." + labels[i] + ".hops") == "1";
    blk.consistency.rows = width(blk.row_kind);
    blk.consistency.cols = width(blk.col_kind);
    blk.consistency.offsets.assign(blk.consistency.rows + 1, 0);
    if (blk.one_hop) {
      blk.row_factor.assign(blk.consistency.rows, 0.0);
      blk.col_factor.assign(blk.consistency.cols, 0.0);
    } else {
      blk.colsum.assign(blk.consistency.cols, 0.0);
      blk.support.assign(blk.consistency.cols, 0);
    }
    slot[labels[i]] = i;
  }

  const auto vec_path = (dir / (name + ".vec")).string();
  std::ifstream vec(vec_path);
  if (!vec) throw ValidationError("cannot read " + vec_path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(vec, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream in(line);
    std::string label, kind, value;
    std::size_t index = 0;
    if (!(in >> label >> kind >> index >> value) || !slot.count(label)) {
      throw ParseError(vec_path, line_no, "malformed vector record");
    }
    auto& blk = blocks[slot[label]];
    std::vector<double>* target = kind == "colsum"       ? &blk.colsum
                                  : kind == "row_factor" ? &blk.row_factor
                                  : kind == "col_factor" ? &blk.col_factor
                                                         : nullptr;
    if (kind == "support") {
      if (index >= blk.support.size()) throw ParseError(vec_path, line_no, "index out of range");
      blk.support[index] = static_cast<std::uint32_t>(std::stoul(value));
      continue;
    }
    if (!target || index >= target->size()) throw ParseError(vec_path, line_no, "bad vector record");
    (*target)[index] = parse_double(value);
  }

  const auto coo_path = (dir / (name + ".coo")).string();
  std::ifstream coo(coo_path);
  if (!coo) throw ValidationError("cannot read " + coo_path);
  line_no = 0;
  std::array<std::size_t, 4> last_row{};
  while (std::getline(coo, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream in(line);
    std::string label, cval, second;
    std::size_t r = 0, c = 0;
    if (!(in >> label >> r >> c >> cval >> second) || !slot.count(label)) {
      throw ParseError(coo_path, line_no, "malformed coordinate record");
    }
    auto& m = blocks[slot[label]].consistency;
    if (r >= m.rows || c >= m.cols) throw ParseError(coo_path, line_no, "index out of range");
    if (!m.indices.empty() && (r < last_row[slot[label]] ||
                               (r == last_row[slot[label]] && c <= m.indices.back()))) {
      throw ParseError(coo_path, line_no, "records must be sorted by (row, col)");
    }
    last_row[slot[label]] = r;
    ++m.offsets[r + 1];
    m.indices.push_back(static_cast<NodeIndex>(c));
    m.values.push_back(parse_double(cval));
  }
  for (auto& blk : blocks) {
    auto& m = blk.consistency;
    for (std::size_t r = 0; r < m.rows; ++r) m.offsets[r + 1] += m.offsets[r];
    // The file keeps c and S; full midpoint coverage shows up as c == S(col).
    m.overlap.resize(m.nnz());
    for (std::size_t pos = 0; pos < m.nnz(); ++pos) {
      m.overlap[pos] = blk.one_hop ? 1u
                       : m.values[pos] == blk.colsum[m.indices[pos]] ? blk.support[m.indices[pos]]
                                                                      : 0u;
    }
  }
  return MetricSet(stage, tuples, objects, std::move(blocks));
}

}  // namespace cdr
