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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdr/embedding.hpp"
#include "cdr/graph.hpp"
#include "cdr/loss.hpp"
#include "cdr/metrics.hpp"

namespace cdr {

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::uint64_t step = 0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam over the trainable columns; frozen columns are never
// written. The state is shaped lazily on the first call.
void adam_step(EmbeddingTable& table, const Matrix& grad, AdamState& state, double learning_rate,
               const AdamConfig& config = {});

enum class NegativeMode : std::uint8_t { Auto, Full, Sampled };

struct TrainConfig {
  std::size_t dim = 64;
  double tau = 1.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t patience = 10;
  std::uint64_t seed = 2024;
  NegativeMode negatives = NegativeMode::Auto;
  std::size_t negative_samples = 1024;
  // Auto mode uses the full candidate set up to this many joint nodes.
  std::size_t full_candidate_limit = 10000;
  LossKind loss = LossKind::CD;
  bool binarize_c = false;
  bool binarize_d = false;
  std::size_t max_epochs = 200;
  // Loss-plateau stopping: an epoch improves when its mean loss drops by
  // more than this relative amount.
  double plateau_tolerance = 1e-4;
};

// Higher is better (e.g. validation NDCG@20).
using Validator = std::function<double(const EmbeddingTable&)>;

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // mean per positive pair
  std::optional<double> validation;
  std::size_t patience_counter = 0;
  std::size_t skipped_pairs = 0;
  bool improved = false;
};

struct StageResult {
  EmbeddingTable embeddings;  // best checkpoint
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  std::size_t positive_pairs = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// One epoch is a seeded shuffle of all positive pairs cut into contiguous
// batches. Training stops after `patience` epochs without improvement of the
// validator (or of the mean training loss when no validator is given) and
// returns the best embeddings seen.
StageResult train_stage(const MetricSet& metrics, EmbeddingTable init, const TrainConfig& config,
                        const Validator& validate = {}, const EpochCallback& on_epoch = {});

// Member-metric stage from a random start.
StageResult pretrain(const TripartiteGraph& graph, const TrainConfig& config,
                     const Validator& validate = {}, const EpochCallback& on_epoch = {});

// Tuple-metric stage on E = E^f || E^p with E^f initialised from E^p, or on a
// random E^f alone when `pretrained` is null.
StageResult finetune(const EmbeddingTable* pretrained, const Relation& train_interactions,
                     const TrainConfig& config, const Validator& validate = {},
                     const EpochCallback& on_epoch = {});

enum class Variant : std::uint8_t {
  CDR,
  CDR_P,
  CDR_F,
  CDR_R,
  WithoutC,
  WithoutD,
  WithoutCD,
  Origin,
  MSE,
  CE,
};

std::string_view to_string(Variant variant);
std::optional<Variant> parse_variant(std::string_view text);
std::vector<Variant> all_variants();

struct PipelineConfig {
  TrainConfig pretrain;
  TrainConfig finetune;

  PipelineConfig() {
    pretrain.tau = 3.8;
    finetune.tau = 1.0;
  }
};

struct StageProvenance {
  std::string name;      // "pretrain" or "finetune"
  std::string metrics;   // "member" or "tuple"
  bool resumed = false;  // loaded from a checkpoint instead of trained
  TrainConfig config;
  StageResult result;
};

struct VariantResult {
  Variant variant = Variant::CDR;
  EmbeddingTable embeddings;
  std::vector<StageProvenance> stages;
  // Metric set and temperature of the last stage, for per-pair analysis.
  MetricSet final_metrics;
  double final_tau = 1.0;
  LossKind final_loss = LossKind::CD;
};

// `graph` carries the training tuple interactions (possibly none).
// `completed_pretrain`, when given, stands in for the first stage of a
// two-stage variant (or the only stage of CDR-P) so a run can resume.
VariantResult run_variant(const TripartiteGraph& graph, Variant variant,
                          const PipelineConfig& config, const Validator& validate = {},
                          const std::function<void(std::string_view, const EpochRecord&)>& on_epoch = {},
                          const StageResult* completed_pretrain = nullptr,
                          const std::function<void(const StageProvenance&)>& on_stage = {});

struct PairLoss {
  NodePair pair;
  double c = 0.0;
  double d = 0.0;       // d(v1, v2) of the pair itself
  double d_mass = 0.0;  // sum of d(v1, v) over every v != v1
  double loss = 0.0;
};

// CD loss of every positive pair of `metrics` under `table`.
// CD loss of every positive pair under the full denominator. With max_pairs
// set, a seeded uniform subset of that many pairs is scored instead.
std::vector<PairLoss> pair_losses(const MetricSet& metrics, const EmbeddingTable& table, double tau,
                                  std::size_t batch_size = 1024, std::size_t max_pairs = 0,
                                  std::uint64_t seed = 0);

}  // namespace cdr
