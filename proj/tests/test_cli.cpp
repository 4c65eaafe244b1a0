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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdr/cli.hpp"
#include "cdr/error.hpp"
#include "cdr/synthetic.hpp"
#include "doctest.h"

using namespace cdr;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path root;
  fs::path config;

  explicit Workspace(const std::string& name, const std::string& extra = "") {
    root = fs::temp_directory_path() / ("cdr_cli_" + name);
    fs::remove_all(root);
    fs::create_directories(root);
    const auto g = random_tripartite({30, 30, 30, 4.0, true, 21});
    save_relation(g.tuple_object(), root / "y.tsv");
    save_relation(g.member_object(), root / "x.tsv");
    save_relation(g.tuple_member(), root / "z.tsv");
    config = root / "run.ini";
    std::ofstream(config) << "[data]\ntuple_object=y.tsv\nmember_object=x.tsv\ntuple_member=z.tsv\n"
                             "[split]\ntrain=0.4\ntest=0.3\nvalid=0.1\n"
                             "[train]\ndim=6\nmax_epochs=4\nbatch_size=64\n"
                             "[eval]\nk=5,10\n"
                             "[run]\nout=out\n"
                          << extra;
  }

  int run(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    args.insert(args.begin(), "cdr");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
  }

  std::string read(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }
};

}  // namespace

TEST_CASE("config parsing, overrides and validation") {
  Workspace w("config", "[pretrain]\ntau=2.5\n");
  auto cfg = cli::load_run_config(w.config);
  CHECK(cfg.pipeline.pretrain.tau == 2.5);
  CHECK(cfg.pipeline.finetune.tau == 1.0);
  CHECK(cfg.pipeline.pretrain.dim == 6);
  CHECK(cfg.ks == std::vector<std::size_t>{5, 10});
  CHECK(cfg.member_object == w.root / "x.tsv");
  const auto h = cfg.hash();
  cfg.ks = {1};
  CHECK(cfg.hash() == h);
  cfg.pipeline.finetune.tau = 0.3;
  CHECK(cfg.hash() != h);

  std::ofstream(w.root / "bad.ini") << "[train]\nbogus=1\n";
  CHECK_THROWS_AS(cli::load_run_config(w.root / "bad.ini"), ValidationError);
  CHECK(w.run({"train", "--config", w.config.string(), "--tau-finetune", "0"}) == 1);
  CHECK(w.run({"train", "--config", w.config.string(), "--variant", "CDR-X"}) == 1);
  CHECK(w.run({"frobnicate"}) == 1);
  CHECK(w.run({"train", "--config", (w.root / "none.ini").string()}) == 1);
}

TEST_CASE("preprocess reports counts and is reproducible") {
  Workspace w("pre");
  std::string out;
  REQUIRE(w.run({"preprocess", "--config", w.config.string()}, &out) == 0);
  CHECK(out.find("tuples 30") != std::string::npos);
  CHECK(fs::exists(w.root / "out" / "splits" / "train.tsv"));
  CHECK(fs::exists(w.root / "out" / "metrics" / "member.coo"));
  CHECK(fs::exists(w.root / "out" / "metrics" / "tuple.coo"));
  const auto first = w.read(w.root / "out" / "manifest");
  const auto split = w.read(w.root / "out" / "splits" / "split.manifest");
  REQUIRE(w.run({"preprocess", "--config", w.config.string()}) == 0);
  CHECK(w.read(w.root / "out" / "manifest") == first);
  CHECK(w.read(w.root / "out" / "splits" / "split.manifest") == split);
  CHECK(first.find("config_hash=") != std::string::npos);
}

TEST_CASE("missing member file is named in the error") {
  Workspace w("missing");
  fs::remove(w.root / "x.tsv");
  std::string err;
  CHECK(w.run({"preprocess", "--config", w.config.string()}, nullptr, &err) == 1);
  CHECK(err.find("x.tsv") != std::string::npos);
}

TEST_CASE("train, evaluate and resume") {
  Workspace w("train");
  std::string out;
  REQUIRE(w.run({"train", "--config", w.config.string()}, &out) == 0);
  const auto run = w.root / "out";
  CHECK(fs::exists(run / "checkpoint" / "final.emb"));
  CHECK(fs::exists(run / "checkpoint" / "pretrain.emb"));
  CHECK(fs::exists(run / "provenance.json"));
  CHECK(w.read(run / "logs" / "train.jsonl").find("\"stage\":\"finetune\"") != std::string::npos);

  REQUIRE(w.run({"evaluate", "--config", w.config.string()}, &out) == 0);
  CHECK(out.find("R@10") != std::string::npos);
  CHECK(out.find("correlation over") != std::string::npos);
  const auto report = w.read(run / "reports" / "eval.jsonl");
  REQUIRE(w.run({"evaluate", "--out", run.string()}) == 0);
  CHECK(w.read(run / "reports" / "eval.jsonl") == report);

  // Wrong dimension or a different config is refused.
  CHECK(w.run({"evaluate", "--config", w.config.string(), "--dim", "12"}) == 1);
  CHECK(w.run({"evaluate", "--config", w.config.string(), "--tau-finetune", "0.5"}) == 1);
  CHECK(w.run({"evaluate", "--config", w.config.string(), "--tau-finetune", "0.5",
               "--allow-config-mismatch"}) == 0);

  const auto final_before = w.read(run / "checkpoint" / "final.emb");
  fs::remove(run / "checkpoint" / "final.emb");
  REQUIRE(w.run({"train", "--config", w.config.string(), "--resume"}, &out) == 0);
  CHECK(out.find("resumed") != std::string::npos);
  CHECK(w.read(run / "checkpoint" / "final.emb") == final_before);
}

TEST_CASE("cold start trains CDR-P and rejects CDR") {
  Workspace w("cold");
  std::ofstream(w.root / "y.tsv", std::ios::trunc) << "";
  CHECK(w.run({"train", "--config", w.config.string(), "--variant", "CDR-P"}) == 0);
  std::string err;
  CHECK(w.run({"train", "--config", w.config.string(), "--variant", "CDR"}, nullptr, &err) == 1);
  CHECK(err.find("CDR-P") != std::string::npos);
  CHECK(w.run({"evaluate", "--config", w.config.string(), "--variant", "CDR-P"}) == 1);
}

TEST_CASE("cold-start flag keeps the test split") {
  Workspace w("coldflag");
  REQUIRE(w.run({"train", "--config", w.config.string(), "--variant", "CDR-P", "--cold-start"}) == 0);
  CHECK(w.run({"evaluate", "--config", w.config.string(), "--variant", "CDR-P", "--cold-start"}) == 0);
}

TEST_CASE("ablation table and temperature sweep") {
  Workspace w("ablate");
  std::string out;
  REQUIRE(w.run({"ablate", "--config", w.config.string(), "--variants", "CDR,CDR-F,CDR-P"}, &out) == 0);
  CHECK(out.find("CDR-F") != std::string::npos);
  CHECK(out.find("CDR-P") != std::string::npos);
  CHECK(w.run({"ablate", "--config", w.config.string()}) == 1);

  REQUIRE(w.run({"ablate", "--config", w.config.string(), "--tau-sweep", "0.3,1,2,3.8",
                 "--sweep-stage", "finetune"}) == 0);
  const auto sweep = w.read(w.root / "out" / "sweep.jsonl");
  std::size_t lines = std::count(sweep.begin(), sweep.end(), '\n');
  CHECK(lines == 4 * 2);
}

TEST_CASE("export writes metric files") {
  Workspace w("export");
  REQUIRE(w.run({"export", "--config", w.config.string()}) == 0);
  CHECK(fs::exists(w.root / "out" / "metrics" / "member.manifest"));
  CHECK(import_metrics(w.root / "out" / "metrics", "tuple").node_count() == 60);
}

TEST_CASE("identical runs give identical reports") {
  Workspace a("det_a"), b("det_b");
  for (auto* w : {&a, &b}) {
    REQUIRE(w->run({"train", "--config", w->config.string()}) == 0);
    REQUIRE(w->run({"evaluate", "--config", w->config.string()}) == 0);
  }
  CHECK(a.read(a.root / "out" / "reports" / "eval.jsonl") == b.read(b.root / "out" / "reports" / "eval.jsonl"));
}
