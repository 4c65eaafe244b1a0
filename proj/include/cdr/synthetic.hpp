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
#include <cstdint>
#include <vector>

#include "cdr/graph.hpp"

namespace cdr {

struct RandomGraphSpec {
  std::size_t tuples = 30;
  std::size_t members = 30;
  std::size_t objects = 30;
  // Mean out-degree of every relation's source side.
  double average_degree = 3.0;
  bool tuple_interactions = true;
  std::uint64_t seed = 1;
};

// Uniform random edges; duplicates collapse, so realised degrees run slightly low.
TripartiteGraph random_tripartite(const RandomGraphSpec& spec);

struct PlantedGraph {
  TripartiteGraph graph;
  // Cluster id per tuple and per object.
  std::vector<int> tuple_cluster;
  std::vector<int> object_cluster;
};

// Two communities. Each tuple affiliates with `members_per_tuple` members of
// its own community, each member interacts with `objects_per_member` objects
// of its community, and every edge is rewired to the other community with
// probability `noise`.
PlantedGraph planted_two_clusters(std::size_t tuples, std::size_t members, std::size_t objects,
                                  std::uint64_t seed, std::size_t members_per_tuple = 4,
                                  std::size_t objects_per_member = 4, double noise = 0.05);

struct SurrogateSpec {
  std::size_t tuples = 995;
  std::size_t members = 5275;
  std::size_t objects = 1513;
  std::size_t tuple_object_edges = 3595;
  std::size_t member_object_edges = 39761;
  double members_per_tuple = 7.19;
  std::size_t communities = 20;
  // Probability that an edge ignores the community structure.
  double noise = 0.2;
  // Zipf exponent of object popularity inside a community.
  double popularity = 0.8;
  std::uint64_t seed = 1;
};

// Group-recommendation style graph with latent communities and skewed
// object popularity, sized by default like a small public group dataset.
TripartiteGraph surrogate_group_graph(const SurrogateSpec& spec);

}  // namespace cdr
