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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdr/graph.hpp"
#include "cdr/metrics.hpp"
#include "cdr/train.hpp"
#include "cdr/util.hpp"

namespace cdr::cli {

struct RunConfig {
  // Empty tuple_object means no tuple interactions at all.
  std::filesystem::path tuple_object;
  std::filesystem::path member_object;
  std::filesystem::path tuple_member;
  Scenario scenario = Scenario::Group;

  SplitSpec split;
  PipelineConfig pipeline;
  Variant variant = Variant::CDR;
  // Train without any tuple interactions; the split still provides the test set.
  bool cold_start = false;

  std::vector<std::size_t> ks{10, 20, 30};
  std::filesystem::path out = "run";

  void validate() const;
  // Training-relevant settings plus input file digests; excludes K and the output path.
  std::string fingerprint() const;
  std::string hash() const;
  std::string to_ini() const;
};

// INI with sections [data] [split] [train] [pretrain] [finetune] [eval] [run].
// Relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

struct Dataset {
  TripartiteGraph graph;  // full tuple interactions
  InteractionSplit split;
  std::size_t duplicates = 0;
  std::vector<std::string> notes;

  // Graph seen by training: train split only, or no tuple interactions in cold start.
  TripartiteGraph training_graph(bool cold_start) const;
  // Train and validation positives, removed from test rankings.
  Relation evaluation_exclusions() const;
};

Dataset load_dataset(const RunConfig& config);

// Final embedding width of a variant: two-stage variants concatenate.
std::size_t expected_dim(Variant variant, std::size_t dim);

int cmd_preprocess(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, bool resume, bool verbose, std::ostream& out,
              std::ostream& log);
int cmd_evaluate(const RunConfig& config, bool allow_mismatch, std::ostream& out);
int cmd_ablate(const RunConfig& config, const std::vector<Variant>& variants,
               const std::vector<double>& tau_sweep, const std::string& sweep_stage,
               bool verbose, std::ostream& out, std::ostream& log);
int cmd_export(const RunConfig& config, std::ostream& out);

// Parses argv and dispatches. Returns 0 on success, 1 on validation errors
// and 2 on any other failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdr::cli
