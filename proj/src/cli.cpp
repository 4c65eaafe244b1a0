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

#include "cdr/cli.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cdr/error.hpp"
#include "cdr/eval.hpp"
#include "json.hpp"

namespace cdr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>> kKnownKeys = {
    {"data", {"tuple_object", "member_object", "tuple_member", "scenario"}},
    {"split", {"train", "test", "valid", "seed"}},
    {"train",
     {"variant", "seed", "dim", "lr", "batch_size", "patience", "max_epochs", "negatives",
      "negative_samples", "loss", "cold_start"}},
    {"pretrain", {"tau", "lr", "batch_size", "patience", "max_epochs"}},
    {"finetune", {"tau", "lr", "batch_size", "patience", "max_epochs"}},
    {"eval", {"k"}},
    {"run", {"out"}},
};

std::size_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_double(text);
  if (v < 0 || v != std::floor(v)) throw ValidationError(key + " must be a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), ::tolower);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ValidationError(key + " must be true or false");
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  for (const auto& part : split(text, ',')) {
    if (trim(part).empty()) continue;
    ks.push_back(parse_count("k", std::string(trim(part))));
  }
  return ks;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    if (!trim(part).empty()) out.push_back(parse_double(part));
  }
  return out;
}

void set_negatives(TrainConfig& cfg, const std::string& text) {
  if (text == "auto") {
    cfg.negatives = NegativeMode::Auto;
  } else if (text == "full") {
    cfg.negatives = NegativeMode::Full;
  } else {
    cfg.negatives = NegativeMode::Sampled;
    cfg.negative_samples = parse_count("negatives", text);
    if (cfg.negative_samples == 0) throw ValidationError("negatives must be positive");
  }
}

std::string negatives_text(const TrainConfig& cfg) {
  switch (cfg.negatives) {
    case NegativeMode::Auto: return "auto";
    case NegativeMode::Full: return "full";
    case NegativeMode::Sampled: return std::to_string(cfg.negative_samples);
  }
  return "auto";
}

Variant require_variant(const std::string& text) {
  auto v = parse_variant(text);
  if (!v) throw ValidationError("unknown variant '" + text + "'");
  return *v;
}

LossKind require_loss(const std::string& text) {
  auto l = parse_loss(text);
  if (!l) throw ValidationError("unknown loss '" + text + "'");
  return *l;
}

void apply_stage_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "tau") cfg.tau = parse_double(value);
  else if (key == "lr") cfg.learning_rate = parse_double(value);
  else if (key == "batch_size") cfg.batch_size = parse_count(key, value);
  else if (key == "patience") cfg.patience = parse_count(key, value);
  else if (key == "max_epochs") cfg.max_epochs = parse_count(key, value);
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return to_hex(fnv1a64(buffer.str()));
}

std::string join_ks(const std::vector<std::size_t>& ks) {
  std::string out;
  for (auto k : ks) out += (out.empty() ? "" : ",") + std::to_string(k);
  return out;
}

std::string variant_slug(Variant v) {
  std::string s(to_string(v));
  s.erase(std::remove(s.begin(), s.end(), '/'), s.end());
  return s;
}

bool two_stage(Variant v) { return v != Variant::CDR_P && v != Variant::CDR_F; }

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  auto require_file = [](const fs::path& path, const char* what) {
    if (path.empty()) throw ValidationError(std::string("no ") + what + " file configured");
    if (!fs::is_regular_file(path)) {
      throw ValidationError(std::string("missing ") + what + " file: " + path.string());
    }
  };
  require_file(member_object, "member interaction");
  require_file(tuple_member, "affiliation");
  if (!tuple_object.empty()) require_file(tuple_object, "tuple interaction");
  if (!(pipeline.pretrain.tau > 0.0) || !(pipeline.finetune.tau > 0.0)) {
    throw ValidationError("per-stage temperatures must be positive");
  }
  if (ks.empty()) throw ValidationError("K list is empty");
  for (auto k : ks) {
    if (k == 0) throw ValidationError("K values must be at least 1");
  }
  if (split.train_fraction < 0 || split.test_fraction < 0 || split.valid_fraction < 0) {
    throw ValidationError("split fractions must be non-negative");
  }
}

std::string RunConfig::fingerprint() const {
  std::ostringstream s;
  s << "data.tuple_object=" << (tuple_object.empty() ? std::string("none") : file_digest(tuple_object)) << '\n';
  s << "data.member_object=" << file_digest(member_object) << '\n';
  s << "data.tuple_member=" << file_digest(tuple_member) << '\n';
  s << "data.scenario=" << (scenario == Scenario::Group ? "group" : "bundle") << '\n';
  s << "split.train=" << format_double(split.train_fraction) << '\n';
  s << "split.test=" << format_double(split.test_fraction) << '\n';
  s << "split.valid=" << format_double(split.valid_fraction) << '\n';
  s << "split.seed=" << split.seed << '\n';
  s << "train.variant=" << to_string(variant) << '\n';
  s << "train.cold_start=" << (cold_start ? "true" : "false") << '\n';
  for (const auto* stage : {&pipeline.pretrain, &pipeline.finetune}) {
    const char* name = stage == &pipeline.pretrain ? "pretrain" : "finetune";
    s << name << ".tau=" << format_double(stage->tau) << '\n';
    s << name << ".lr=" << format_double(stage->learning_rate) << '\n';
    s << name << ".dim=" << stage->dim << '\n';
    s << name << ".batch_size=" << stage->batch_size << '\n';
    s << name << ".patience=" << stage->patience << '\n';
    s << name << ".max_epochs=" << stage->max_epochs << '\n';
    s << name << ".seed=" << stage->seed << '\n';
    s << name << ".negatives=" << negatives_text(*stage) << '\n';
    s << name << ".loss=" << to_string(stage->loss) << '\n';
  }
  return s.str();
}

std::string RunConfig::hash() const { return to_hex(fnv1a64(fingerprint())); }

std::string RunConfig::to_ini() const {
  const auto& pre = pipeline.pretrain;
  const auto& fine = pipeline.finetune;
  std::ostringstream s;
  s << "[data]\n";
  if (!tuple_object.empty()) s << "tuple_object=" << fs::absolute(tuple_object).string() << '\n';
  s << "member_object=" << fs::absolute(member_object).string() << '\n';
  s << "tuple_member=" << fs::absolute(tuple_member).string() << '\n';
  s << "scenario=" << (scenario == Scenario::Group ? "group" : "bundle") << "\n\n";
  s << "[split]\ntrain=" << format_double(split.train_fraction)
    << "\ntest=" << format_double(split.test_fraction)
    << "\nvalid=" << format_double(split.valid_fraction) << "\nseed=" << split.seed << "\n\n";
  s << "[train]\nvariant=" << to_string(variant) << "\nseed=" << pre.seed << "\ndim=" << pre.dim
    << "\nnegatives=" << negatives_text(pre)
    << "\nnegative_samples=" << pre.negative_samples << "\nloss=" << to_string(pre.loss)
    << "\ncold_start=" << (cold_start ? "true" : "false") << "\n\n";
  for (const auto* stage : {&pre, &fine}) {
    s << '[' << (stage == &pre ? "pretrain" : "finetune") << "]\n";
    s << "tau=" << format_double(stage->tau) << "\nlr=" << format_double(stage->learning_rate)
      << "\nbatch_size=" << stage->batch_size << "\npatience=" << stage->patience
      << "\nmax_epochs=" << stage->max_epochs << "\n\n";
  }
  s << "[eval]\nk=" << join_ks(ks) << "\n\n[run]\nout=" << fs::absolute(out).string() << '\n';
  return s.str();
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw ValidationError("missing config file: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(path.string(), e.line(), e.message());
  }
  for (const auto& [section, body] : tree) {
    auto known = kKnownKeys.find(section);
    if (known == kKnownKeys.end()) {
      throw ValidationError(path.string() + ": unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!known->second.count(key)) {
        throw ValidationError(path.string() + ": unknown key '" + key + "' in [" + section + "]");
      }
    }
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) -> fs::path {
    if (p.empty()) return {};
    fs::path candidate(p);
    return candidate.is_absolute() ? candidate : base / candidate;
  };
  auto get = [&](const std::string& key) { return tree.get_optional<std::string>(key); };

  RunConfig cfg;
  if (auto v = get("data.tuple_object")) cfg.tuple_object = resolve(*v);
  if (auto v = get("data.member_object")) cfg.member_object = resolve(*v);
  if (auto v = get("data.tuple_member")) cfg.tuple_member = resolve(*v);
  if (auto v = get("data.scenario")) {
    if (*v == "group") cfg.scenario = Scenario::Group;
    else if (*v == "bundle") cfg.scenario = Scenario::Bundle;
    else throw ValidationError("scenario must be group or bundle");
  }
  if (auto v = get("split.train")) cfg.split.train_fraction = parse_double(*v);
  if (auto v = get("split.test")) cfg.split.test_fraction = parse_double(*v);
  if (auto v = get("split.valid")) cfg.split.valid_fraction = parse_double(*v);
  if (auto v = get("split.seed")) cfg.split.seed = parse_count("split.seed", *v);

  auto& stages = cfg.pipeline;
  for (auto* stage : {&stages.pretrain, &stages.finetune}) {
    if (auto v = get("train.seed")) stage->seed = parse_count("train.seed", *v);
    if (auto v = get("train.dim")) stage->dim = parse_count("train.dim", *v);
    if (auto v = get("train.negatives")) set_negatives(*stage, *v);
    if (auto v = get("train.negative_samples")) stage->negative_samples = parse_count("negative_samples", *v);
    if (auto v = get("train.loss")) stage->loss = require_loss(*v);
    for (const char* key : {"lr", "batch_size", "patience", "max_epochs"}) {
      if (auto v = get(std::string("train.") + key)) apply_stage_key(*stage, key, *v);
    }
  }
  for (const auto& [name, stage] : {std::pair{"pretrain", &stages.pretrain},
                                    std::pair{"finetune", &stages.finetune}}) {
    if (auto section = tree.get_child_optional(name)) {
      for (const auto& [key, value] : *section) apply_stage_key(*stage, key, value.data());
    }
  }
  if (auto v = get("train.variant")) cfg.variant = require_variant(*v);
  if (auto v = get("train.cold_start")) cfg.cold_start = parse_bool("cold_start", *v);
  if (auto v = get("eval.k")) cfg.ks = parse_k_list(*v);
  if (auto v = get("run.out")) cfg.out = resolve(*v);
  return cfg;
}

// ---------------------------------------------------------------------------
// Dataset

TripartiteGraph Dataset::training_graph(bool cold_start) const {
  if (cold_start) {
    const auto& c = graph.counts();
    return graph.with_tuple_interactions(Relation(NodeKind::Tuple, NodeKind::Object, c.tuples, c.objects));
  }
  return graph.with_tuple_interactions(split.train);
}

Relation Dataset::evaluation_exclusions() const {
  auto edges = split.train.edges();
  const auto valid = split.valid.edges();
  edges.insert(edges.end(), valid.begin(), valid.end());
  return Relation(NodeKind::Tuple, NodeKind::Object, split.train.src_count(),
                  split.train.dst_count(), std::move(edges));
}

Dataset load_dataset(const RunConfig& config) {
  config.validate();
  auto x = load_relation(config.member_object, NodeKind::Member, NodeKind::Object);
  auto z = load_relation(config.tuple_member, NodeKind::Tuple, NodeKind::Member);
  std::optional<LoadedRelation> y;
  if (!config.tuple_object.empty()) {
    y = load_relation(config.tuple_object, NodeKind::Tuple, NodeKind::Object);
  }

  // Declared universes win and must agree; otherwise take the largest id seen.
  std::optional<UniverseCounts> declared;
  auto check_declared = [&](const LoadedRelation& r, const fs::path& path) {
    if (!r.declared_counts) return;
    if (declared && !(*declared == *r.declared_counts)) {
      throw ValidationError("#counts in " + path.string() + " disagrees with another input file");
    }
    declared = r.declared_counts;
  };
  check_declared(x, config.member_object);
  check_declared(z, config.tuple_member);
  if (y) check_declared(*y, config.tuple_object);

  UniverseCounts counts;
  if (declared) {
    counts = *declared;
  } else {
    counts.tuples = z.relation.src_count();
    counts.members = std::max(x.relation.src_count(), z.relation.dst_count());
    counts.objects = x.relation.dst_count();
    if (y) {
      counts.tuples = std::max(counts.tuples, y->relation.src_count());
      counts.objects = std::max(counts.objects, y->relation.dst_count());
    }
  }
  auto fit = [](const Relation& r, std::size_t rows, std::size_t cols, const fs::path& path) {
    if (r.src_count() > rows || r.dst_count() > cols) {
      throw ValidationError(path.string() + " references ids beyond the declared #counts");
    }
    return r.resized(rows, cols);
  };
  Relation xr = fit(x.relation, counts.members, counts.objects, config.member_object);
  Relation zr = fit(z.relation, counts.tuples, counts.members, config.tuple_member);
  Relation yr = y ? fit(y->relation, counts.tuples, counts.objects, config.tuple_object)
                  : Relation(NodeKind::Tuple, NodeKind::Object, counts.tuples, counts.objects);

  InteractionSplit parts;
  if (yr.empty()) {
    const Relation none(NodeKind::Tuple, NodeKind::Object, counts.tuples, counts.objects);
    parts = {none, none, none, none};
  } else {
    parts = split_interactions(yr, config.split);
  }
  Dataset ds{TripartiteGraph::build(std::move(yr), std::move(xr), std::move(zr)), std::move(parts),
             x.duplicates + z.duplicates + (y ? y->duplicates : 0), {}};
  if (ds.duplicates) ds.notes.push_back(std::to_string(ds.duplicates) + " duplicate edges dropped");
  if (!y || y->empty_file) ds.notes.push_back("no tuple interactions (extreme cold start)");
  return ds;
}

std::size_t expected_dim(Variant variant, std::size_t dim) {
  return two_stage(variant) ? 2 * dim : dim;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

Manifest base_manifest(const RunConfig& config, const Dataset& ds) {
  const auto& c = ds.graph.counts();
  Manifest m;
  m["config_hash"] = config.hash();
  m["variant"] = std::string(to_string(config.variant));
  m["split_seed"] = std::to_string(config.split.seed);
  m["train_seed"] = std::to_string(config.pipeline.pretrain.seed);
  m["tuples"] = std::to_string(c.tuples);
  m["members"] = std::to_string(c.members);
  m["objects"] = std::to_string(c.objects);
  m["tuple_object_edges"] = std::to_string(ds.graph.tuple_object().edge_count());
  m["member_object_edges"] = std::to_string(ds.graph.member_object().edge_count());
  m["tuple_member_edges"] = std::to_string(ds.graph.tuple_member().edge_count());
  m["duplicates_removed"] = std::to_string(ds.duplicates);
  m["train_edges"] = std::to_string(ds.split.train.edge_count());
  m["valid_edges"] = std::to_string(ds.split.valid.edge_count());
  m["test_edges"] = std::to_string(ds.split.test.edge_count());
  m["cold_start"] = config.cold_start ? "true" : "false";
  return m;
}

void prepare_run_dir(const RunConfig& config, const Dataset& ds) {
  fs::create_directories(config.out / "splits");
  write_text(config.out / "config.ini", config.to_ini());
  write_manifest(base_manifest(config, ds), config.out / "manifest");
  if (!ds.graph.tuple_object().empty()) {
    write_split(ds.split, config.split, ds.graph.counts(), config.out / "splits");
    auto path = config.out / "splits" / "split.manifest";
    auto m = read_manifest(path);
    m["config_hash"] = config.hash();
    write_manifest(m, path);
  }
}

void export_run_metrics(const RunConfig& config, const Dataset& ds, std::ostream& out) {
  const auto dir = config.out / "metrics";
  fs::create_directories(dir);
  auto stamp = [&](const std::string& name) {
    auto path = dir / (name + ".manifest");
    auto m = read_manifest(path);
    m["config_hash"] = config.hash();
    write_manifest(m, path);
  };
  const auto member = build_member_metrics(ds.graph);
  export_metrics(member, dir, "member");
  stamp("member");
  out << "member metrics: " << member.positive_pairs().size() << " positive pairs -> "
      << (dir / "member.coo").string() << '\n';
  if (!config.cold_start && !ds.split.train.empty()) {
    const auto tuple = build_tuple_metrics(ds.split.train);
    export_metrics(tuple, dir, "tuple");
    stamp("tuple");
    out << "tuple metrics: " << tuple.positive_pairs().size() << " positive pairs -> "
        << (dir / "tuple.coo").string() << '\n';
  }
}

void print_counts(const Dataset& ds, std::ostream& out) {
  const auto& c = ds.graph.counts();
  out << "tuples " << c.tuples << "\nmembers " << c.members << "\nobjects " << c.objects
      << "\ntuple_object_edges " << ds.graph.tuple_object().edge_count()
      << "\nmember_object_edges " << ds.graph.member_object().edge_count()
      << "\ntuple_member_edges " << ds.graph.tuple_member().edge_count() << '\n';
  out << "split train " << ds.split.train.edge_count() << " valid " << ds.split.valid.edge_count()
      << " test " << ds.split.test.edge_count() << " discarded "
      << ds.split.discarded.edge_count() << '\n';
  for (const auto& note : ds.notes) out << "note: " << note << '\n';
}

json epoch_json(std::string_view stage, const EpochRecord& r, const std::string& hash) {
  json j = {{"record", "epoch"},        {"stage", stage},
            {"epoch", r.epoch},         {"loss", r.loss},
            {"patience", r.patience_counter}, {"skipped", r.skipped_pairs},
            {"improved", r.improved},   {"config_hash", hash}};
  j["validation"] = r.validation ? json(*r.validation) : json();
  return j;
}

json stage_json(const StageProvenance& s, double seconds) {
  return {{"name", s.name},
          {"metrics", s.metrics},
          {"resumed", s.resumed},
          {"tau", s.config.tau},
          {"lr", s.config.learning_rate},
          {"dim", s.result.embeddings.dim()},
          {"loss", to_string(s.config.loss)},
          {"binarize_c", s.config.binarize_c},
          {"binarize_d", s.config.binarize_d},
          {"epochs", s.result.log.size()},
          {"best_epoch", s.result.best_epoch},
          {"early_stopped", s.result.early_stopped},
          {"positive_pairs", s.result.positive_pairs},
          {"wall_clock_seconds", seconds}};
}

// Correlation analysis runs on at most this many positive pairs.
constexpr std::size_t kMaxLoggedPairs = 20000;

std::optional<StageResult> load_resumable(const RunConfig& config, std::ostream& log) {
  const auto path = config.out / "checkpoint" / "pretrain.emb";
  if (!fs::exists(path)) return std::nullopt;
  Manifest m;
  auto table = load_embeddings(path, &m);
  if (m["config_hash"] != config.hash()) {
    log << "resume: checkpoint config hash differs, training from scratch\n";
    return std::nullopt;
  }
  StageResult r;
  r.embeddings = std::move(table);
  r.best_epoch = m.count("best_epoch") ? parse_count("best_epoch", m["best_epoch"]) : 0;
  r.positive_pairs = m.count("positive_pairs") ? parse_count("positive_pairs", m["positive_pairs"]) : 0;
  r.early_stopped = m["early_stopped"] == "true";
  log << "resume: reusing " << path.string() << '\n';
  return r;
}

}  // namespace

int cmd_preprocess(const RunConfig& config, std::ostream& out) {
  const auto ds = load_dataset(config);
  prepare_run_dir(config, ds);
  print_counts(ds, out);
  export_run_metrics(config, ds, out);
  out << "config_hash " << config.hash() << '\n';
  return 0;
}

int cmd_export(const RunConfig& config, std::ostream& out) {
  const auto ds = load_dataset(config);
  fs::create_directories(config.out);
  export_run_metrics(config, ds, out);
  return 0;
}

int cmd_train(const RunConfig& config, bool resume, bool verbose, std::ostream& out,
              std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  const auto ds = load_dataset(config);
  const auto hash = config.hash();
  prepare_run_dir(config, ds);
  fs::create_directories(config.out / "checkpoint");
  fs::create_directories(config.out / "logs");

  std::optional<StageResult> resumed;
  const bool resumable = two_stage(config.variant) || config.variant == Variant::CDR_P;
  if (resume && resumable) resumed = load_resumable(config, log);

  // Keep the logged epochs of a reused first stage.
  const auto log_path = config.out / "logs" / "train.jsonl";
  std::string kept;
  if (resumed && fs::exists(log_path)) {
    std::istringstream lines(read_text(log_path));
    for (std::string line; std::getline(lines, line);) {
      if (line.find("\"stage\":\"pretrain\"") != std::string::npos) kept += line + '\n';
    }
  }
  std::ofstream epochs(log_path, std::ios::binary | std::ios::trunc);
  if (!epochs) throw std::runtime_error("cannot write " + log_path.string());
  epochs << kept;

  Validator validate;
  if (!config.cold_start && !ds.split.valid.empty()) {
    validate = make_validator(ds.split.valid, ds.split.train, 20);
  }
  const auto graph = ds.training_graph(config.cold_start);

  auto stage_clock = std::chrono::steady_clock::now();
  std::vector<double> stage_seconds;
  auto on_epoch = [&](std::string_view stage, const EpochRecord& r) {
    epochs << epoch_json(stage, r, hash).dump() << '\n';
    epochs.flush();
    if (verbose) {
      log << stage << " epoch " << r.epoch << " loss " << format_double(r.loss);
      if (r.validation) log << " ndcg@20 " << format_double(*r.validation);
      log << (r.improved ? " *" : "") << '\n';
    }
  };
  auto on_stage = [&](const StageProvenance& s) {
    const auto now = std::chrono::steady_clock::now();
    stage_seconds.push_back(std::chrono::duration<double>(now - stage_clock).count());
    stage_clock = now;
    if (s.name != "pretrain" || s.resumed) return;
    save_embeddings(s.result.embeddings, config.out / "checkpoint" / "pretrain.emb",
                    {{"config_hash", hash},
                     {"variant", std::string(to_string(config.variant))},
                     {"stage", s.name},
                     {"best_epoch", std::to_string(s.result.best_epoch)},
                     {"positive_pairs", std::to_string(s.result.positive_pairs)},
                     {"early_stopped", s.result.early_stopped ? "true" : "false"}});
  };

  const auto result = run_variant(graph, config.variant, config.pipeline, validate, on_epoch,
                                  resumed ? &*resumed : nullptr, on_stage);
  save_embeddings(result.embeddings, config.out / "checkpoint" / "final.emb",
                  {{"config_hash", hash}, {"variant", std::string(to_string(config.variant))}});

  const auto losses = pair_losses(result.final_metrics, result.embeddings, result.final_tau,
                                  1024, kMaxLoggedPairs, config.pipeline.pretrain.seed);
  {
    std::ostringstream tsv;
    tsv << "# config_hash=" << hash << "\nfirst\tsecond\tc\td\td_mass\tloss\n";
    for (const auto& p : losses) {
      tsv << p.pair.first << '\t' << p.pair.second << '\t' << format_double(p.c) << '\t'
          << format_double(p.d) << '\t' << format_double(p.d_mass) << '\t'
          << format_double(p.loss) << '\n';
    }
    write_text(config.out / "pair_losses.tsv", tsv.str());
  }

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json prov = {{"config_hash", hash},
               {"variant", to_string(config.variant)},
               {"seed", config.pipeline.pretrain.seed},
               {"split_seed", config.split.seed},
               {"started_at", started_at},
               {"finished_at", utc_now()},
               {"wall_clock_seconds", total},
               {"config", config.fingerprint()},
               {"validation", validate ? "ndcg@20 on the validation split" : "loss plateau"},
               {"logged_pairs", losses.size()}};
  prov["stages"] = json::array();
  for (std::size_t i = 0; i < result.stages.size(); ++i) {
    prov["stages"].push_back(stage_json(result.stages[i], i < stage_seconds.size() ? stage_seconds[i] : 0.0));
  }
  write_text(config.out / "provenance.json", prov.dump(2) + '\n');

  out << "variant " << to_string(config.variant) << '\n';
  for (const auto& s : result.stages) {
    out << "stage " << s.name << " (" << s.metrics << " metrics)"
        << (s.resumed ? " resumed" : "") << ": epochs " << s.result.log.size() << ", best "
        << s.result.best_epoch << ", pairs " << s.result.positive_pairs << '\n';
  }
  out << "checkpoint " << (config.out / "checkpoint" / "final.emb").string() << '\n';
  out << "wall_clock_seconds " << format_double(std::round(total * 100) / 100) << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& config, bool allow_mismatch, std::ostream& out) {
  const auto hash = config.hash();
  const auto manifest = read_manifest(config.out / "manifest");
  const auto recorded = manifest.find("config_hash");
  if (recorded == manifest.end() || recorded->second != hash) {
    if (!allow_mismatch) {
      throw ValidationError("run directory " + config.out.string() +
                            " was produced with a different config (hash " +
                            (recorded == manifest.end() ? std::string("missing") : recorded->second) +
                            ", current " + hash + "); pass --allow-config-mismatch to override");
    }
  }
  Manifest ckpt;
  const auto table = load_embeddings(config.out / "checkpoint" / "final.emb", &ckpt);
  const std::size_t want = expected_dim(config.variant, config.pipeline.pretrain.dim);
  if (table.dim() != want) {
    throw ValidationError("checkpoint dim " + std::to_string(table.dim()) + " vs config dim " +
                          std::to_string(want) + " for " + std::string(to_string(config.variant)));
  }
  const auto ds = load_dataset(config);
  if (ds.split.test.empty()) throw ValidationError("no test interactions to evaluate against");
  if (table.rows() != ds.graph.counts().tuples + ds.graph.counts().objects) {
    throw ValidationError("checkpoint rows do not match the dataset");
  }
  auto report = evaluate(table, ds.split.test, ds.evaluation_exclusions(), config.ks);

  const auto pairs_path = config.out / "pair_losses.tsv";
  if (fs::exists(pairs_path)) {
    std::vector<PairLoss> losses;
    std::istringstream lines(read_text(pairs_path));
    std::size_t line_no = 0;
    for (std::string line; std::getline(lines, line);) {
      ++line_no;
      if (line.empty() || line[0] == '#' || line.rfind("first", 0) == 0) continue;
      const auto f = split(line, '\t');
      if (f.size() != 6) throw ParseError(pairs_path.string(), line_no, "expected 6 columns");
      losses.push_back({{static_cast<JointId>(parse_count("first", f[0])),
                         static_cast<JointId>(parse_count("second", f[1]))},
                        parse_double(f[2]), parse_double(f[3]), parse_double(f[4]),
                        parse_double(f[5])});
    }
    report.correlation = correlation_analysis(losses);
  }

  fs::create_directories(config.out / "reports");
  const std::string label(to_string(config.variant));
  write_text(config.out / "reports" / "eval.jsonl", report_jsonl(report, label, {{"config_hash", hash}}));
  const auto table_text = report_table({{label, report}});
  write_text(config.out / "reports" / "eval.txt", "# config_hash=" + hash + '\n' + table_text);
  out << table_text;
  if (report.correlation) {
    const auto& c = *report.correlation;
    auto show = [](const std::optional<double>& r) { return r ? format_double(*r) : std::string("undefined"); };
    out << "correlation over " << c.pairs << " pairs: r(c, loss) " << show(c.consistency_vs_loss)
        << ", r(d, loss) " << show(c.discrepancy_vs_loss) << ", r(pair d, loss) "
        << show(c.pair_discrepancy_vs_loss) << '\n';
  }
  return 0;
}

int cmd_ablate(const RunConfig& config, const std::vector<Variant>& variants,
               const std::vector<double>& tau_sweep, const std::string& sweep_stage, bool verbose,
               std::ostream& out, std::ostream& log) {
  if (variants.empty() && tau_sweep.empty()) throw ValidationError("variant list is empty");
  if (sweep_stage != "pretrain" && sweep_stage != "finetune" && sweep_stage != "both") {
    throw ValidationError("sweep stage must be pretrain, finetune or both");
  }
  fs::create_directories(config.out);
  const auto hash = config.hash();
  std::vector<ReportRow> rows;
  std::string jsonl;
  std::vector<std::string> failures;

  auto run_one = [&](RunConfig sub) -> std::optional<EvalReport> {
    std::ostringstream sink;
    cmd_train(sub, false, verbose, sink, log);
    cmd_evaluate(sub, false, sink);
    std::istringstream lines(read_text(sub.out / "reports" / "eval.jsonl"));
    EvalReport report;
    for (std::string line; std::getline(lines, line);) {
      const auto j = json::parse(line);
      if (j["record"] != "topk") continue;
      report.per_k.push_back({j["k"].get<std::size_t>(), j["recall"].get<double>(),
                              j["precision"].get<double>(), j["ndcg"].get<double>(),
                              j["f1"].get<double>()});
      report.recommendees = j["recommendees"].get<std::size_t>();
    }
    return report;
  };

  for (auto v : variants) {
    RunConfig sub = config;
    sub.variant = v;
    sub.out = config.out / "variants" / variant_slug(v);
    try {
      auto report = run_one(sub);
      rows.push_back({std::string(to_string(v)), *report});
      jsonl += report_jsonl(*report, std::string(to_string(v)), {{"ablation_hash", hash}});
    } catch (const std::exception& e) {
      failures.push_back(std::string(to_string(v)) + ": " + e.what());
    }
  }

  std::string sweep_jsonl;
  for (const char* stage : {"pretrain", "finetune"}) {
    if (sweep_stage != "both" && sweep_stage != stage) continue;
    for (double tau : tau_sweep) {
      RunConfig sub = config;
      auto& target = std::string(stage) == "pretrain" ? sub.pipeline.pretrain : sub.pipeline.finetune;
      target.tau = tau;
      sub.out = config.out / "sweep" / (std::string(stage) + "-tau" + format_double(tau));
      try {
        auto report = run_one(sub);
        for (const auto& m : report->per_k) {
          sweep_jsonl += json({{"record", "sweep"}, {"stage", stage}, {"tau", tau},
                               {"variant", to_string(sub.variant)}, {"k", m.k},
                               {"recall", m.recall}, {"ndcg", m.ndcg}, {"ablation_hash", hash}})
                             .dump() + '\n';
        }
      } catch (const std::exception& e) {
        failures.push_back(std::string(stage) + " tau " + format_double(tau) + ": " + e.what());
      }
    }
  }

  const std::string header = "# ablation_hash=" + hash + '\n';
  if (!rows.empty()) {
    const auto table = report_table(rows);
    write_text(config.out / "ablation.txt", header + table);
    write_text(config.out / "ablation.jsonl", jsonl);
    out << table;
  }
  if (!tau_sweep.empty()) {
    write_text(config.out / "sweep.jsonl", sweep_jsonl);
    out << "tau sweep -> " << (config.out / "sweep.jsonl").string() << '\n';
  }
  for (const auto& f : failures) out << "failed: " << f << '\n';
  return failures.empty() ? 0 : 2;
}

// ---------------------------------------------------------------------------
// Argument parsing

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tripartite graph recommendation with consistency and discrepancy supervision", "cdr"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, variant, k, out_dir, negatives, loss, tuple_object, member_object, tuple_member;
    std::optional<std::uint64_t> seed;
    std::optional<double> tau_pretrain, tau_finetune, lr;
    std::optional<std::size_t> dim, max_epochs;
    bool cold_start = false, verbose = false, resume = false, allow_mismatch = false;
    std::string variants, tau_sweep, sweep_stage = "both";
  } f;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", f.config, "INI run configuration");
    cmd->add_option("--variant", f.variant, "CDR, CDR-P, CDR-F, CDR-R, w/o-c, w/o-d, w/o-cd, Origin, MSE, CE");
    cmd->add_option("--seed", f.seed, "seed for the split and for training");
    cmd->add_option("--tau-pretrain", f.tau_pretrain, "temperature of the first stage");
    cmd->add_option("--tau-finetune", f.tau_finetune, "temperature of the second stage");
    cmd->add_option("--dim", f.dim, "embedding dimension per stage");
    cmd->add_option("--lr", f.lr, "Adam learning rate for both stages");
    cmd->add_option("--max-epochs", f.max_epochs, "epoch cap per stage");
    cmd->add_option("--k", f.k, "comma-separated cutoffs, e.g. 10,20,30");
    cmd->add_option("--out", f.out_dir, "run directory");
    cmd->add_option("--negatives", f.negatives, "auto, full, or a sample size");
    cmd->add_option("--loss", f.loss, "cd, origin, mse or ce");
    cmd->add_option("--tuple-object", f.tuple_object, "tuple interaction edges");
    cmd->add_option("--member-object", f.member_object, "member interaction edges");
    cmd->add_option("--tuple-member", f.tuple_member, "affiliation edges");
    cmd->add_flag("--cold-start", f.cold_start, "train without tuple interactions");
    cmd->add_flag("-v,--verbose", f.verbose, "log every epoch to stderr");
  };
  auto* preprocess = app.add_subcommand("preprocess", "split interactions and build metric files");
  auto* train = app.add_subcommand("train", "train a variant and write a checkpoint");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "rank test objects from a checkpoint");
  auto* ablate = app.add_subcommand("ablate", "compare variants or sweep temperatures");
  auto* export_cmd = app.add_subcommand("export", "write metric coordinate files");
  for (auto* cmd : {preprocess, train, evaluate_cmd, ablate, export_cmd}) common(cmd);
  train->add_flag("--resume", f.resume, "reuse a finished first-stage checkpoint");
  evaluate_cmd->add_flag("--allow-config-mismatch", f.allow_mismatch, "evaluate despite a config hash mismatch");
  ablate->add_option("--variants", f.variants, "comma-separated variants");
  ablate->add_option("--tau-sweep", f.tau_sweep, "comma-separated temperatures");
  ablate->add_option("--sweep-stage", f.sweep_stage, "pretrain, finetune or both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig config;
    if (!f.config.empty()) {
      config = load_run_config(f.config);
    } else if (evaluate_cmd->parsed() && !f.out_dir.empty() && fs::exists(fs::path(f.out_dir) / "config.ini")) {
      config = load_run_config(fs::path(f.out_dir) / "config.ini");
    } else if (f.member_object.empty()) {
      throw ValidationError("no --config given and no input files on the command line");
    }
    if (!f.tuple_object.empty()) config.tuple_object = f.tuple_object;
    if (!f.member_object.empty()) config.member_object = f.member_object;
    if (!f.tuple_member.empty()) config.tuple_member = f.tuple_member;
    if (!f.variant.empty()) config.variant = require_variant(f.variant);
    if (!f.out_dir.empty()) config.out = f.out_dir;
    if (!f.k.empty()) config.ks = parse_k_list(f.k);
    if (f.cold_start) config.cold_start = true;
    if (f.seed) config.split.seed = *f.seed;
    if (f.tau_pretrain) config.pipeline.pretrain.tau = *f.tau_pretrain;
    if (f.tau_finetune) config.pipeline.finetune.tau = *f.tau_finetune;
    for (auto* stage : {&config.pipeline.pretrain, &config.pipeline.finetune}) {
      if (f.seed) stage->seed = *f.seed;
      if (f.dim) stage->dim = *f.dim;
      if (f.lr) stage->learning_rate = *f.lr;
      if (f.max_epochs) stage->max_epochs = *f.max_epochs;
      if (!f.negatives.empty()) set_negatives(*stage, f.negatives);
      if (!f.loss.empty()) stage->loss = require_loss(f.loss);
    }
    config.validate();

    if (preprocess->parsed()) return cmd_preprocess(config, out);
    if (train->parsed()) return cmd_train(config, f.resume, f.verbose, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(config, f.allow_mismatch, out);
    if (export_cmd->parsed()) return cmd_export(config, out);
    std::vector<Variant> variants;
    for (const auto& name : split(f.variants, ',')) {
      if (!trim(name).empty()) variants.push_back(require_variant(std::string(trim(name))));
    }
    return cmd_ablate(config, variants, parse_double_list(f.tau_sweep), f.sweep_stage, f.verbose,
                      out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace cdr::cli
