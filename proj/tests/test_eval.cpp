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

#include <cmath>

#include "cdr/error.hpp"
#include "cdr/eval.hpp"
#include "cdr/util.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cdr;
using doctest::Approx;

namespace {

// One tuple followed by `objects` object rows.
EmbeddingTable table_of(std::vector<std::vector<double>> rows) {
  EmbeddingTable t;
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.values(r, c) = rows[r][c];
  }
  t.trainable_cols = t.dim();
  return t;
}

}  // namespace

TEST_CASE("ranking by cosine with id tie-break and exclusions") {
  const auto same = table_of({{1, 0}, {1, 1}, {1, 1}, {1, 1}, {1, 1}});
  CHECK(rank_objects(0, same, 1, 4, {}) == std::vector<NodeIndex>{0, 1, 2, 3});

  const auto aligned = table_of({{1, 0}, {0, 1}, {0, 2}, {3, 0}, {0, -1}});
  const auto ranked = rank_objects(0, aligned, 1, 4, {});
  CHECK(ranked.front() == 2);
  auto scaled = aligned;
  scaled.values *= 3.0;
  CHECK(rank_objects(0, scaled, 1, 4, {}) == ranked);

  const NodeIndex excluded[] = {2};
  const auto filtered = rank_objects(0, aligned, 1, 4, excluded);
  CHECK(std::find(filtered.begin(), filtered.end(), 2) == filtered.end());
  CHECK(filtered.size() == 3);

  std::size_t zero = 0;
  const auto with_zero = table_of({{1, 0}, {0, 0}, {-1, 0}});
  CHECK(rank_objects(0, with_zero, 1, 2, {}, {}, &zero) == std::vector<NodeIndex>{1, 0});
  CHECK(zero == 1);

  // Dot product scoring prefers the long vector.
  const auto dots = table_of({{1, 0}, {1, 0}, {5, 1}});
  CHECK(rank_objects(0, dots, 1, 2, {}, {ScoreMode::Dot}).front() == 1);
  CHECK(rank_objects(0, dots, 1, 2, {}, {ScoreMode::Cosine}).front() == 0);
}

TEST_CASE("top-k metrics closed forms") {
  CHECK(topk_metrics({{3, 1, 2}}, {{3}}, 10).ndcg == Approx(1.0));
  CHECK(topk_metrics({{1, 3, 2}}, {{3}}, 10).ndcg == Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
  CHECK(topk_metrics({{1, 3, 2}}, {{3}}, 10).ndcg == Approx(0.63093).epsilon(1e-5));
  const auto m = topk_metrics({{1, 2, 3, 4}}, {{1, 9}}, 2);
  CHECK(m.recall == Approx(0.5));
  CHECK(m.precision == Approx(0.5));
  CHECK(m.f1 == Approx(0.5));
  CHECK(topk_metrics({{1}}, {{2}}, 1).f1 == 0.0);
  // Recommendees without truth are skipped.
  CHECK(topk_metrics({{1}, {5}}, {{1}, {}}, 1).recall == 1.0);
  CHECK_THROWS_AS(topk_metrics({{1}}, {{}}, 1), ValidationError);
  CHECK_THROWS_AS(topk_metrics({{1}}, {{1}}, 0), ValidationError);
}

TEST_CASE("metric bounds and monotone recall on random rankings") {
  Rng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::vector<NodeIndex>> rankings(5), truth(5);
    for (int u = 0; u < 5; ++u) {
      std::vector<NodeIndex> ids(30);
      for (NodeIndex i = 0; i < 30; ++i) ids[i] = i;
      rng.shuffle(ids);
      rankings[u] = ids;
      for (NodeIndex i = 0; i < 30; ++i) {
        if (rng.unit() < 0.1) truth[u].push_back(i);
      }
    }
    truth[0].push_back(31);  // never ranked, keeps truth non-empty
    double last_recall = 0.0;
    for (std::size_t k : {1, 5, 10, 20, 30}) {
      const auto m = topk_metrics(rankings, truth, k);
      for (double v : {m.recall, m.precision, m.ndcg, m.f1}) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0 + 1e-12);
      }
      REQUIRE(m.recall >= last_recall);
      last_recall = m.recall;
    }
  }
}

TEST_CASE("ndcg is one exactly for ideal rankings") {
  CHECK(topk_metrics({{4, 2, 7, 1}}, {{2, 4}}, 3).ndcg == Approx(1.0));
  CHECK(topk_metrics({{4, 7, 2, 1}}, {{2, 4}}, 3).ndcg < 1.0);
  CHECK(topk_metrics({{4, 2, 7}}, {{2, 4, 7, 8}}, 3).ndcg == Approx(1.0));
}

TEST_CASE("pearson correlation") {
  const std::vector<double> c{0.1, 0.5, 0.7, 1.2};
  std::vector<double> loss;
  for (double v : c) loss.push_back(-v);
  CHECK(*pearson(c, loss) == Approx(-1.0));
  CHECK_FALSE(pearson(c, std::vector<double>(4, 2.0)));
  CHECK_FALSE(pearson(std::vector<double>{1, 2}, std::vector<double>{2, 1}));

  std::vector<PairLoss> pairs;
  for (int i = 0; i < 5; ++i) pairs.push_back({{0, 1}, 1.0 + i, 0.2 * i, 3.0 - i, 2.0 - i});
  const auto r = correlation_analysis(pairs);
  CHECK(*r.consistency_vs_loss == Approx(-1.0));
  CHECK(*r.discrepancy_vs_loss == Approx(1.0));
  CHECK(*r.pair_discrepancy_vs_loss == Approx(-1.0));
}

TEST_CASE("evaluate excludes train positives and emits records") {
  // t0 likes o1; o0 is a train positive and must not be ranked.
  Relation truth(NodeKind::Tuple, NodeKind::Object, 2, 3, {{0, 1}});
  Relation exclude(NodeKind::Tuple, NodeKind::Object, 2, 3, {{0, 0}});
  const auto table = table_of({{1, 0}, {0, 1}, {1, 0.01}, {1, 0.2}, {0, 1}});
  const std::size_t ks[] = {1, 2};
  const auto report = evaluate(table, truth, exclude, ks);
  CHECK(report.recommendees == 1);
  CHECK(report.at(1)->recall == 1.0);
  CHECK(report.at(2)->precision == 0.5);

  const auto lines = report_jsonl(report, "CDR", {{"config_hash", "x"}});
  const auto first = nlohmann::json::parse(lines.substr(0, lines.find('\n')));
  CHECK(first["k"] == 1);
  CHECK(first["config_hash"] == "x");
  const auto text = report_table({{"CDR", report}});
  CHECK(text.find("R@1") != std::string::npos);
  CHECK(text.find("N@2") != std::string::npos);
  CHECK(evaluate(table, truth, exclude, ks).at(2)->ndcg == report.at(2)->ndcg);
}

TEST_CASE("validator scores ndcg@k") {
  Relation valid(NodeKind::Tuple, NodeKind::Object, 1, 2, {{0, 1}});
  Relation train(NodeKind::Tuple, NodeKind::Object, 1, 2);
  const auto v = make_validator(valid, train, 20);
  CHECK(v(table_of({{1, 0}, {0, 1}, {1, 0}})) == Approx(1.0));
  CHECK(v(table_of({{1, 0}, {1, 0}, {0, 1}})) == Approx(1.0 / std::log2(3.0)));
}
