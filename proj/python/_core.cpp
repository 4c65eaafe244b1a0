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

// Python bindings for the graph, metric, training and evaluation layers.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cdr/cli.hpp"
#include "cdr/error.hpp"
#include "cdr/eval.hpp"
#include "cdr/graph.hpp"
#include "cdr/metrics.hpp"
#include "cdr/synthetic.hpp"
#include "cdr/train.hpp"

namespace py = pybind11;
using namespace cdr;

namespace {

using EdgeArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

std::vector<Edge> to_edges(const EdgeArray& array) {
  if (array.size() == 0) return {};
  if (array.ndim() != 2 || array.shape(1) != 2) throw ValidationError("edge array must have shape (n, 2)");
  auto view = array.unchecked<2>();
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(view.shape(0)));
  for (py::ssize_t i = 0; i < view.shape(0); ++i) {
    if (view(i, 0) < 0 || view(i, 1) < 0) throw ValidationError("negative node id");
    edges.push_back({static_cast<NodeIndex>(view(i, 0)), static_cast<NodeIndex>(view(i, 1))});
  }
  return edges;
}

py::array_t<std::int64_t> from_relation(const Relation& relation) {
  const auto edges = relation.edges();
  py::array_t<std::int64_t> out({static_cast<py::ssize_t>(edges.size()), py::ssize_t{2}});
  auto view = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    view(i, 0) = edges[i].src;
    view(i, 1) = edges[i].dst;
  }
  return out;
}

std::size_t max_id(const std::vector<Edge>& edges, bool dst) {
  std::size_t n = 0;
  for (const auto& e : edges) n = std::max<std::size_t>(n, (dst ? e.dst : e.src) + 1);
  return n;
}

TripartiteGraph graph_from_edges(const EdgeArray& tuple_object, const EdgeArray& member_object,
                                 const EdgeArray& tuple_member, std::optional<std::size_t> tuples,
                                 std::optional<std::size_t> members, std::optional<std::size_t> objects) {
  const auto y = to_edges(tuple_object), x = to_edges(member_object), z = to_edges(tuple_member);
  const std::size_t t = tuples.value_or(std::max(max_id(y, false), max_id(z, false)));
  const std::size_t m = members.value_or(std::max(max_id(x, false), max_id(z, true)));
  const std::size_t o = objects.value_or(std::max(max_id(y, true), max_id(x, true)));
  return TripartiteGraph::build(Relation(NodeKind::Tuple, NodeKind::Object, t, o, y),
                                Relation(NodeKind::Member, NodeKind::Object, m, o, x),
                                Relation(NodeKind::Tuple, NodeKind::Member, t, m, z));
}

Relation tuple_object_relation(const TripartiteGraph& g, const EdgeArray& edges) {
  return Relation(NodeKind::Tuple, NodeKind::Object, g.counts().tuples, g.counts().objects, to_edges(edges));
}

Variant variant_from(const std::string& name) {
  const auto v = parse_variant(name);
  if (!v) throw ValidationError("unknown variant: " + name);
  return *v;
}

py::dict report_dict(const EvalReport& report) {
  py::dict out;
  for (const auto& m : report.per_k) {
    py::dict row;
    row["recall"] = m.recall;
    row["precision"] = m.precision;
    row["ndcg"] = m.ndcg;
    row["f1"] = m.f1;
    out[py::int_(m.k)] = row;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Consistency/discrepancy contrastive graph embeddings";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<UniverseCounts>(m, "Counts")
      .def_readonly("tuples", &UniverseCounts::tuples)
      .def_readonly("members", &UniverseCounts::members)
      .def_readonly("objects", &UniverseCounts::objects);

  py::class_<TripartiteGraph>(m, "Graph")
      .def_static("from_edges", &graph_from_edges, py::arg("tuple_object"), py::arg("member_object"),
                  py::arg("tuple_member"), py::kw_only(), py::arg("tuples") = py::none(),
                  py::arg("members") = py::none(), py::arg("objects") = py::none(),
                  "Build from (n, 2) integer edge arrays; counts default to max id + 1.")
      .def_property_readonly("counts", &TripartiteGraph::counts)
      .def_property_readonly("tuple_object", [](const TripartiteGraph& g) { return from_relation(g.tuple_object()); })
      .def_property_readonly("member_object", [](const TripartiteGraph& g) { return from_relation(g.member_object()); })
      .def_property_readonly("tuple_member", [](const TripartiteGraph& g) { return from_relation(g.tuple_member()); })
      .def("with_tuple_interactions", [](const TripartiteGraph& g, const EdgeArray& edges) {
        return g.with_tuple_interactions(tuple_object_relation(g, edges));
      });

  m.def("load_graph", [](const std::filesystem::path& tuple_object, const std::filesystem::path& member_object,
                         const std::filesystem::path& tuple_member) {
    cli::RunConfig cfg;
    cfg.tuple_object = tuple_object;
    cfg.member_object = member_object;
    cfg.tuple_member = tuple_member;
    return cli::load_dataset(cfg).graph;
  }, py::arg("tuple_object"), py::arg("member_object"), py::arg("tuple_member"));

  m.def("random_graph", [](std::size_t tuples, std::size_t members, std::size_t objects, double degree,
                           std::uint64_t seed) {
    return random_tripartite({tuples, members, objects, degree, true, seed});
  }, py::arg("tuples"), py::arg("members"), py::arg("objects"), py::arg("average_degree") = 3.0,
        py::arg("seed") = 0);

  m.def("split", [](const TripartiteGraph& g, std::uint64_t seed, double train, double test, double valid) {
    const auto s = split_interactions(g.tuple_object(), {train, test, valid, seed});
    py::dict out;
    out["train"] = from_relation(s.train);
    out["valid"] = from_relation(s.valid);
    out["test"] = from_relation(s.test);
    out["discarded"] = from_relation(s.discarded);
    return out;
  }, py::arg("graph"), py::arg("seed") = 2024, py::arg("train") = 0.05, py::arg("test") = 0.20,
        py::arg("valid") = 0.05);

  py::class_<MetricSet>(m, "MetricSet")
      .def_property_readonly("tuples", &MetricSet::tuples)
      .def_property_readonly("objects", &MetricSet::objects)
      .def_property_readonly("node_count", &MetricSet::node_count)
      .def("consistency", &MetricSet::consistency)
      .def("discrepancy", &MetricSet::discrepancy)
      .def("positive_pairs", [](const MetricSet& s) {
        const auto pairs = s.positive_pairs();
        py::array_t<std::int64_t> out({static_cast<py::ssize_t>(pairs.size()), py::ssize_t{2}});
        auto view = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          view(i, 0) = pairs[i].first;
          view(i, 1) = pairs[i].second;
        }
        return out;
      })
      .def("dense", [](const MetricSet& s) {
        const auto d = to_dense(s);
        const auto n = static_cast<py::ssize_t>(d.node_count());
        py::array_t<double> c({n, n}), dd({n, n});
        std::copy(d.c.begin(), d.c.end(), c.mutable_data());
        std::copy(d.d.begin(), d.d.end(), dd.mutable_data());
        return py::make_tuple(c, dd);
      }, "Dense (c, d) matrices over the joint tuple+object space.");

  m.def("member_metrics", &build_member_metrics, py::arg("graph"));
  m.def("tuple_metrics", [](const TripartiteGraph& g) { return build_tuple_metrics(g.tuple_object()); },
        py::arg("graph"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("dim", &TrainConfig::dim)
      .def_readwrite("tau", &TrainConfig::tau)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("max_epochs", &TrainConfig::max_epochs)
      .def_readwrite("negative_samples", &TrainConfig::negative_samples);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("pretrain", &PipelineConfig::pretrain)
      .def_readwrite("finetune", &PipelineConfig::finetune);

  m.def("train", [](const TripartiteGraph& graph, const std::string& variant, const PipelineConfig& config,
                    std::optional<EdgeArray> valid, std::optional<EdgeArray> exclude) {
    Validator validate;
    Relation truth, excluded;
    if (valid) {
      truth = tuple_object_relation(graph, *valid);
      excluded = exclude ? tuple_object_relation(graph, *exclude) : graph.tuple_object();
      validate = make_validator(truth, excluded, 20);
    }
    VariantResult result;
    {
      py::gil_scoped_release release;
      result = run_variant(graph, variant_from(variant), config, validate);
    }
    py::dict out;
    out["embeddings"] = result.embeddings.values;
    out["trainable_cols"] = result.embeddings.trainable_cols;
    py::list stages;
    for (const auto& s : result.stages) {
      py::dict stage;
      stage["name"] = s.name;
      stage["best_epoch"] = s.result.best_epoch;
      std::vector<double> losses;
      for (const auto& r : s.result.log) losses.push_back(r.loss);
      stage["losses"] = losses;
      stages.append(stage);
    }
    out["stages"] = stages;
    return out;
  }, py::arg("graph"), py::arg("variant") = "CDR", py::arg("config") = PipelineConfig{},
        py::arg("valid") = py::none(), py::arg("exclude") = py::none(),
        "Train a variant. `graph` carries the training tuple interactions; `valid` enables "
        "NDCG@20 early stopping with `exclude` (default: the graph's interactions) masked.");

  m.def("evaluate", [](const Eigen::Ref<const Matrix>& embeddings, const TripartiteGraph& graph,
                       const EdgeArray& truth, const EdgeArray& exclude, std::vector<std::size_t> ks) {
    EmbeddingTable table;
    table.values = embeddings;
    table.trainable_cols = table.dim();
    if (table.rows() != graph.counts().tuples + graph.counts().objects)
      throw ValidationError("embedding rows do not match tuples + objects");
    return report_dict(evaluate(table, tuple_object_relation(graph, truth),
                                tuple_object_relation(graph, exclude), ks));
  }, py::arg("embeddings"), py::arg("graph"), py::arg("truth"), py::arg("exclude"),
        py::arg("ks") = std::vector<std::size_t>{10, 20, 30},
        "Top-K recall, precision, NDCG and F1 per K, ranking all non-excluded objects.");

  m.def("run_cli", [](std::vector<std::string> args) {
    std::vector<const char*> argv{"cdr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Run the command-line interface; returns (exit_code, stdout, stderr).");
}
