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

#include "cdr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdr/error.hpp"
#include "cdr/util.hpp"

namespace cdr {

void adam_step(EmbeddingTable& table, const Matrix& grad, AdamState& state, double learning_rate,
               const AdamConfig& config) {
  const auto rows = table.values.rows();
  const auto cols = static_cast<Eigen::Index>(table.trainable_cols);
  if (grad.rows() != rows || grad.cols() < cols) throw ValidationError("gradient shape mismatch");
  if (state.step == 0 && state.first_moment.size() == 0) {
    state.first_moment = Matrix::Zero(rows, cols);
    state.second_moment = Matrix::Zero(rows, cols);
  }
  if (state.first_moment.rows() != rows || state.first_moment.cols() != cols) {
    throw ValidationError("optimizer state shape mismatch");
  }
  ++state.step;
  const auto g = grad.leftCols(cols);
  state.first_moment = config.beta1 * state.first_moment + (1.0 - config.beta1) * g;
  state.second_moment =
      config.beta2 * state.second_moment + (1.0 - config.beta2) * g.cwiseProduct(g);
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  const double step = learning_rate / correction1;
  table.values.leftCols(cols).array() -=
      step * state.first_moment.array() /
      ((state.second_moment.array() / correction2).sqrt() + config.epsilon);
}

namespace {

bool use_full_candidates(const TrainConfig& config, std::size_t nodes) {
  switch (config.negatives) {
    case NegativeMode::Full: return true;
    case NegativeMode::Sampled: return false;
    case NegativeMode::Auto: return nodes <= config.full_candidate_limit;
  }
  return true;
}

std::vector<JointId> sample_candidates(Rng& rng, std::size_t nodes, std::size_t count) {
  std::vector<JointId> ids(nodes);
  std::iota(ids.begin(), ids.end(), 0u);
  count = std::min(count, nodes);
  for (std::size_t i = 0; i < count; ++i) std::swap(ids[i], ids[i + rng.index(nodes - i)]);
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void validate_config(const TrainConfig& config) {
  if (!(config.tau > 0.0)) throw ValidationError("temperature must be positive");
  if (config.dim == 0) throw ValidationError("embedding dimension must be at least 1");
  if (config.batch_size == 0) throw ValidationError("batch size must be positive");
  if (config.patience == 0) throw ValidationError("patience must be positive");
  if (!(config.learning_rate >= 0.0)) throw ValidationError("learning rate must be non-negative");
}

}  // namespace

StageResult train_stage(const MetricSet& source, EmbeddingTable init, const TrainConfig& config,
                        const Validator& validate, const EpochCallback& on_epoch) {
  validate_config(config);
  const MetricSet binarized = (config.binarize_c || config.binarize_d)
                                  ? source.binarized(config.binarize_c, config.binarize_d)
                                  : MetricSet{};
  const MetricSet& metrics = (config.binarize_c || config.binarize_d) ? binarized : source;
  if (init.rows() != metrics.node_count()) {
    throw ValidationError("embedding table does not cover the metric node space");
  }

  auto pairs = metrics.positive_pairs();
  if (pairs.empty()) {
    throw ValidationError("no node pair has positive consistency; nothing to train on");
  }
  const std::size_t nodes = metrics.node_count();
  const bool full = use_full_candidates(config, nodes);

  StageResult result;
  result.positive_pairs = pairs.size();
  result.embeddings = init;
  EmbeddingTable table = std::move(init);
  AdamState adam;
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  Matrix grad;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(pairs);
    double total = 0.0;
    std::size_t skipped = 0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += config.batch_size) {
      const std::size_t end = std::min(pairs.size(), begin + config.batch_size);
      Batch batch;
      batch.pairs.assign(pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                         pairs.begin() + static_cast<std::ptrdiff_t>(end));
      if (!full) batch.candidates = sample_candidates(rng, nodes, config.negative_samples);
      const auto out = compute_loss(config.loss, batch, metrics, table, config.tau, &grad);
      total += out.loss;
      skipped += out.skipped;
      adam_step(table, grad, adam, config.learning_rate);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = total / static_cast<double>(pairs.size());
    record.skipped_pairs = skipped;
    double score;
    if (validate) {
      record.validation = validate(table);
      score = *record.validation;
      record.improved = score > best;
    } else {
      score = -record.loss;
      record.improved = !std::isfinite(best) ||
                        record.loss < -best - config.plateau_tolerance * std::abs(best);
    }
    if (record.improved) {
      best = score;
      since_best = 0;
      result.embeddings = table;
      result.best_epoch = epoch;
    } else {
      ++since_best;
    }
    record.patience_counter = since_best;
    result.log.push_back(record);
    if (on_epoch) on_epoch(record);
    if (since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

StageResult pretrain(const TripartiteGraph& graph, const TrainConfig& config,
                     const Validator& validate, const EpochCallback& on_epoch) {
  const auto metrics = build_member_metrics(graph);
  auto init = init_embeddings(metrics.node_count(), config.dim, config.seed, EmbeddingRole::Pretrain);
  return train_stage(metrics, std::move(init), config, validate, on_epoch);
}

namespace {

EmbeddingTable finetune_start(const EmbeddingTable* pretrained, std::size_t rows,
                              const TrainConfig& config) {
  if (!pretrained) {
    return init_embeddings(rows, config.dim, config.seed + 1, EmbeddingRole::Finetune);
  }
  if (pretrained->rows() != rows) throw ValidationError("pre-trained table does not match the graph");
  // E^f starts as a copy of E^p; E^p itself is the frozen slice.
  EmbeddingTable fine = *pretrained;
  fine.role = EmbeddingRole::Finetune;
  fine.trainable_cols = fine.dim();
  EmbeddingTable pre = *pretrained;
  pre.trainable_cols = 0;
  return concatenate(fine, pre);
}

}  // namespace

StageResult finetune(const EmbeddingTable* pretrained, const Relation& train_interactions,
                     const TrainConfig& config, const Validator& validate,
                     const EpochCallback& on_epoch) {
  const auto metrics = build_tuple_metrics(train_interactions);
  return train_stage(metrics, finetune_start(pretrained, metrics.node_count(), config), config,
                     validate, on_epoch);
}

// ---------------------------------------------------------------------------
// Variants

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 10> kVariantNames = {{
    {Variant::CDR, "CDR"},
    {Variant::CDR_P, "CDR-P"},
    {Variant::CDR_F, "CDR-F"},
    {Variant::CDR_R, "CDR-R"},
    {Variant::WithoutC, "w/o-c"},
    {Variant::WithoutD, "w/o-d"},
    {Variant::WithoutCD, "w/o-cd"},
    {Variant::Origin, "Origin"},
    {Variant::MSE, "MSE"},
    {Variant::CE, "CE"},
}};

}  // namespace

std::string_view to_string(Variant variant) {
  for (const auto& [v, name] : kVariantNames) {
    if (v == variant) return name;
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view text) {
  for (const auto& [v, name] : kVariantNames) {
    if (name == text) return v;
  }
  return std::nullopt;
}

std::vector<Variant> all_variants() {
  std::vector<Variant> out;
  for (const auto& [v, name] : kVariantNames) out.push_back(v);
  return out;
}

VariantResult run_variant(const TripartiteGraph& graph, Variant variant,
                          const PipelineConfig& config, const Validator& validate,
                          const std::function<void(std::string_view, const EpochRecord&)>& on_epoch,
                          const StageResult* completed_pretrain,
                          const std::function<void(const StageProvenance&)>& on_stage) {
  TrainConfig first = config.pretrain;
  TrainConfig second = config.finetune;
  auto both = [&](auto&& apply) {
    apply(first);
    apply(second);
  };
  switch (variant) {
    case Variant::WithoutC: both([](TrainConfig& c) { c.binarize_c = true; }); break;
    case Variant::WithoutD: both([](TrainConfig& c) { c.binarize_d = true; }); break;
    case Variant::WithoutCD:
      both([](TrainConfig& c) { c.binarize_c = c.binarize_d = true; });
      break;
    case Variant::Origin: both([](TrainConfig& c) { c.loss = LossKind::Origin; }); break;
    case Variant::MSE: both([](TrainConfig& c) { c.loss = LossKind::MSE; }); break;
    case Variant::CE: both([](TrainConfig& c) { c.loss = LossKind::CE; }); break;
    default: break;
  }

  const bool has_tuple_data = !graph.tuple_object().empty();
  const bool has_member_data = !graph.member_object().empty() && !graph.tuple_member().empty();
  const bool needs_tuple = variant != Variant::CDR_P;
  const bool needs_member = variant != Variant::CDR_F;
  if (needs_tuple && !has_tuple_data) {
    throw ValidationError(std::string(to_string(variant)) +
                          " needs training tuple interactions; use CDR-P for extreme cold start");
  }
  if (needs_member && !has_member_data) {
    throw ValidationError(std::string(to_string(variant)) +
                          " needs member interactions and affiliations");
  }

  auto callback = [&](std::string_view stage) -> EpochCallback {
    if (!on_epoch) return {};
    return [&on_epoch, stage](const EpochRecord& r) { on_epoch(stage, r); };
  };

  VariantResult out;
  out.variant = variant;
  auto record = [&](std::string name, std::string metrics_name, const TrainConfig& cfg,
                    StageResult result) {
    out.stages.push_back({std::move(name), std::move(metrics_name), false, cfg, std::move(result)});
    return &out.stages.back();
  };

  const std::size_t rows = graph.counts().tuples + graph.counts().objects;
  if (completed_pretrain && completed_pretrain->embeddings.rows() != rows) {
    throw ValidationError("resumed checkpoint does not match the graph");
  }
  auto first_stage = [&](const MetricSet& metrics) {
    if (completed_pretrain) return *completed_pretrain;
    return train_stage(metrics, init_embeddings(rows, first.dim, first.seed), first, validate,
                       callback("pretrain"));
  };
  if (variant == Variant::CDR_P) {
    auto metrics = build_member_metrics(graph);
    auto* stage = record("pretrain", "member", first, first_stage(metrics));
    stage->resumed = completed_pretrain != nullptr;
    if (on_stage) on_stage(*stage);
    out.embeddings = stage->result.embeddings;
    out.final_metrics = std::move(metrics);
    out.final_tau = first.tau;
    out.final_loss = first.loss;
    return out;
  }
  if (variant == Variant::CDR_F) {
    auto metrics = build_tuple_metrics(graph.tuple_object());
    auto result = train_stage(metrics, finetune_start(nullptr, rows, second), second, validate,
                              callback("finetune"));
    auto* stage = record("finetune", "tuple", second, std::move(result));
    if (on_stage) on_stage(*stage);
    out.embeddings = stage->result.embeddings;
    out.final_metrics = std::move(metrics);
    out.final_tau = second.tau;
    out.final_loss = second.loss;
    return out;
  }

  // Two-stage variants; CDR-R swaps which metric set feeds which stage.
  const bool swapped = variant == Variant::CDR_R;
  auto member = build_member_metrics(graph);
  auto tuple = build_tuple_metrics(graph.tuple_object());
  MetricSet& stage1 = swapped ? tuple : member;
  MetricSet& stage2 = swapped ? member : tuple;

  out.stages.reserve(2);
  auto* first_done = record("pretrain", swapped ? "tuple" : "member", first, first_stage(stage1));
  first_done->resumed = completed_pretrain != nullptr;
  if (on_stage) on_stage(*first_done);
  const EmbeddingTable* pre_table = &first_done->result.embeddings;
  auto start = finetune_start(pre_table, rows, second);
  auto fine = train_stage(stage2, std::move(start), second, validate, callback("finetune"));
  auto* second_done = record("finetune", swapped ? "member" : "tuple", second, std::move(fine));
  if (on_stage) on_stage(*second_done);
  out.embeddings = second_done->result.embeddings;
  out.final_metrics = std::move(stage2);
  out.final_tau = second.tau;
  out.final_loss = second.loss;
  return out;
}

std::vector<PairLoss> pair_losses(const MetricSet& metrics, const EmbeddingTable& table, double tau,
                                  std::size_t batch_size, std::size_t max_pairs,
                                  std::uint64_t seed) {
  auto pairs = metrics.positive_pairs();
  if (max_pairs > 0 && pairs.size() > max_pairs) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_pairs; ++i) {
      std::swap(pairs[i], pairs[i + rng.index(pairs.size() - i)]);
    }
    pairs.resize(max_pairs);
    std::sort(pairs.begin(), pairs.end(), [](const NodePair& a, const NodePair& b) {
      return a.first != b.first ? a.first < b.first : a.second < b.second;
    });
  }
  std::vector<PairLoss> out;
  out.reserve(pairs.size());
  std::vector<double> row(metrics.node_count());
  JointId mass_anchor = static_cast<JointId>(metrics.node_count());
  double mass = 0.0;
  for (std::size_t begin = 0; begin < pairs.size(); begin += batch_size) {
    Batch batch;
    batch.pairs.assign(pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                       pairs.begin() + static_cast<std::ptrdiff_t>(std::min(pairs.size(), begin + batch_size)));
    const auto loss = cd_loss(batch, metrics, table, tau);
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
      const auto& p = batch.pairs[i];
      if (std::isnan(loss.per_pair[i])) continue;
      if (p.first != mass_anchor) {
        metrics.discrepancy_row(p.first, row);
        mass = std::accumulate(row.begin(), row.end(), 0.0);
        mass_anchor = p.first;
      }
      out.push_back({p, metrics.consistency(p.first, p.second),
                     metrics.discrepancy(p.first, p.second), mass, loss.per_pair[i]});
    }
  }
  return out;
}

}  // namespace cdr
