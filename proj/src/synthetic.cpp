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

#include "cdr/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "cdr/util.hpp"

namespace cdr {

namespace {

Relation random_relation(Rng& rng, NodeKind src_kind, NodeKind dst_kind, std::size_t rows,
                         std::size_t cols, double average_degree) {
  std::vector<Edge> edges;
  const auto count = static_cast<std::size_t>(std::llround(average_degree * static_cast<double>(rows)));
  if (rows > 0 && cols > 0) {
    for (std::size_t i = 0; i < count; ++i) {
      edges.push_back({static_cast<NodeIndex>(rng.index(rows)), static_cast<NodeIndex>(rng.index(cols))});
    }
  }
  return Relation(src_kind, dst_kind, rows, cols, std::move(edges));
}

}  // namespace

TripartiteGraph random_tripartite(const RandomGraphSpec& spec) {
  Rng rng(spec.seed);
  auto x = random_relation(rng, NodeKind::Member, NodeKind::Object, spec.members, spec.objects,
                           spec.average_degree);
  auto z = random_relation(rng, NodeKind::Tuple, NodeKind::Member, spec.tuples, spec.members,
                           spec.average_degree);
  auto y = spec.tuple_interactions
               ? random_relation(rng, NodeKind::Tuple, NodeKind::Object, spec.tuples, spec.objects,
                                 spec.average_degree)
               : Relation(NodeKind::Tuple, NodeKind::Object, spec.tuples, spec.objects);
  return TripartiteGraph::build(std::move(y), std::move(x), std::move(z));
}

PlantedGraph planted_two_clusters(std::size_t tuples, std::size_t members, std::size_t objects,
                                  std::uint64_t seed, std::size_t members_per_tuple,
                                  std::size_t objects_per_member, double noise) {
  Rng rng(seed);
  auto cluster_of = [](std::size_t i, std::size_t n) { return i < n / 2 ? 0 : 1; };
  // Uniform pick inside a community, or the other one with probability `noise`.
  auto pick = [&](int cluster, std::size_t n) {
    if (rng.unit() < noise) cluster = 1 - cluster;
    const std::size_t half = n / 2;
    const std::size_t lo = cluster == 0 ? 0 : half;
    const std::size_t size = cluster == 0 ? half : n - half;
    return static_cast<NodeIndex>(lo + rng.index(size));
  };

  PlantedGraph out{TripartiteGraph::build(std::nullopt,
                                          Relation(NodeKind::Member, NodeKind::Object, members, objects),
                                          Relation(NodeKind::Tuple, NodeKind::Member, tuples, members)),
                   {}, {}};
  std::vector<Edge> z, x, y;
  for (std::size_t t = 0; t < tuples; ++t) {
    const int c = cluster_of(t, tuples);
    out.tuple_cluster.push_back(c);
    for (std::size_t i = 0; i < members_per_tuple; ++i) z.push_back({static_cast<NodeIndex>(t), pick(c, members)});
    y.push_back({static_cast<NodeIndex>(t), pick(c, objects)});
    y.push_back({static_cast<NodeIndex>(t), pick(c, objects)});
  }
  for (std::size_t m = 0; m < members; ++m) {
    const int c = cluster_of(m, members);
    for (std::size_t i = 0; i < objects_per_member; ++i) x.push_back({static_cast<NodeIndex>(m), pick(c, objects)});
  }
  for (std::size_t o = 0; o < objects; ++o) out.object_cluster.push_back(cluster_of(o, objects));
  out.graph = TripartiteGraph::build(
      Relation(NodeKind::Tuple, NodeKind::Object, tuples, objects, std::move(y)),
      Relation(NodeKind::Member, NodeKind::Object, members, objects, std::move(x)),
      Relation(NodeKind::Tuple, NodeKind::Member, tuples, members, std::move(z)));
  return out;
}

TripartiteGraph surrogate_group_graph(const SurrogateSpec& spec) {
  Rng rng(spec.seed);
  const std::size_t k = std::max<std::size_t>(1, spec.communities);
  // Node i of a kind belongs to community i % k; within a community objects
  // are drawn with Zipf weights by their rank.
  std::vector<std::vector<NodeIndex>> objects_of(k);
  for (std::size_t o = 0; o < spec.objects; ++o) objects_of[o % k].push_back(static_cast<NodeIndex>(o));
  std::vector<std::vector<double>> cumulative(k);
  for (std::size_t c = 0; c < k; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < objects_of[c].size(); ++r) {
      total += 1.0 / std::pow(static_cast<double>(r + 1), spec.popularity);
      cumulative[c].push_back(total);
    }
  }
  auto draw_object = [&](std::size_t community) -> NodeIndex {
    if (rng.unit() < spec.noise) return static_cast<NodeIndex>(rng.index(spec.objects));
    const auto& cum = cumulative[community];
    const double u = rng.unit() * cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return objects_of[community][std::min<std::size_t>(it - cum.begin(), cum.size() - 1)];
  };
  auto draw_member = [&](std::size_t community) -> NodeIndex {
    if (rng.unit() < spec.noise) return static_cast<NodeIndex>(rng.index(spec.members));
    const std::size_t per = (spec.members - community + k - 1) / k;
    return static_cast<NodeIndex>(community + k * rng.index(per));
  };

  std::vector<Edge> x, z, y;
  for (std::size_t i = 0; i < spec.member_object_edges; ++i) {
    const auto m = static_cast<NodeIndex>(rng.index(spec.members));
    x.push_back({m, draw_object(m % k)});
  }
  for (std::size_t t = 0; t < spec.tuples; ++t) {
    const std::size_t size = 2 + rng.index(static_cast<std::uint64_t>(std::max(1.0, 2.0 * spec.members_per_tuple - 3.0)));
    for (std::size_t i = 0; i < size; ++i) z.push_back({static_cast<NodeIndex>(t), draw_member(t % k)});
  }
  for (std::size_t i = 0; i < spec.tuple_object_edges; ++i) {
    const auto t = static_cast<NodeIndex>(rng.index(spec.tuples));
    y.push_back({t, draw_object(t % k)});
  }
  return TripartiteGraph::build(
      Relation(NodeKind::Tuple, NodeKind::Object, spec.tuples, spec.objects, std::move(y)),
      Relation(NodeKind::Member, NodeKind::Object, spec.members, spec.objects, std::move(x)),
      Relation(NodeKind::Tuple, NodeKind::Member, spec.tuples, spec.members, std::move(z)));
}

}  // namespace cdr
