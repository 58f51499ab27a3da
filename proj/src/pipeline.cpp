// Copyright 2026 The twigsim Authors.
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

#include "twigsim/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "twigsim/checkpoint.hpp"
#include "twigsim/errors.hpp"
#include "twigsim/hash.hpp"
#include "twigsim/hyperparams.hpp"
#include "twigsim/kge.hpp"
#include "twigsim/run_record.hpp"
#include "twigsim/synth_oracle.hpp"

namespace twigsim::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Bump when a change to training or evaluation invalidates cached runs.
constexpr std::string_view kRunFormat = "twigsim-runs-1";

std::size_t parse_count(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw UsageError("bad " + std::string(what) + ": '" + std::string(text) + "'");
  }
  return v;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
  }
  fs::rename(tmp, path);
}

json graph_hashes(const PipelineConfig& c) {
  return {{"train", hash_file(c.train_path)},
          {"valid", hash_file(c.valid_path)},
          {"test", hash_file(c.test_path)}};
}

// Ranks and identity only; wall time and other run metadata are excluded.
std::string runs_digest(std::span<const kge::RunRecord> runs) {
  Fnv1a h;
  for (const auto& r : runs) {
    h.update(kge::run_file_name(r.config_index, r.seed));
    h.update(r.ok() ? "ok" : "failed");
    for (int rank : r.ranks) {
      h.update(std::to_string(rank));
      h.update(",");
    }
    h.update("\n");
  }
  return h.hex();
}

std::vector<kge::RunRecord> load_selected_runs(const PipelineConfig& c,
                                               std::ostream& log) {
  const fs::path dir = run_dir(c);
  if (!fs::is_directory(dir)) {
    throw DataError("run directory " + dir.string() +
                    " does not exist; run run-grid first");
  }
  const auto indices = selected_configs(c);
  const std::set<std::size_t> wanted(indices.begin(), indices.end());
  const std::set<int> seeds(c.seeds.begin(), c.seeds.end());
  std::vector<kge::RunRecord> runs;
  for (auto& r : kge::read_run_dir(dir)) {
    if (wanted.count(r.config_index) && seeds.count(r.seed)) {
      runs.push_back(std::move(r));
    }
  }
  const std::size_t expected = wanted.size() * seeds.size();
  if (runs.size() != expected) {
    throw DataError("run directory " + dir.string() + " holds " +
                    std::to_string(runs.size()) + " of " +
                    std::to_string(expected) + " expected runs");
  }
  log << "loaded " << runs.size() << " runs from " << dir.string() << '\n';
  return runs;
}

json describe_config_json(const features::HyperparamConfig& cfg) {
  json j;
  features::to_json(j, cfg);
  return j;
}

}  // namespace

GridMode GridMode::parse(std::string_view text) {
  GridMode m;
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view() : text.substr(colon + 1);
  if (head == "full") {
    if (!arg.empty()) throw UsageError("grid mode 'full' takes no size");
    m.kind = Kind::kFull;
    m.n = 0;
  } else if (head == "subsample") {
    m.kind = Kind::kSubsample;
    m.n = parse_count(arg, "subsample size");
  } else if (head == "synthetic") {
    m.kind = Kind::kSynthetic;
    m.n = arg.empty() ? 0 : parse_count(arg, "synthetic size");
  } else {
    throw UsageError("unknown grid mode '" + std::string(text) +
                     "' (full | subsample:<n> | synthetic[:<n>])");
  }
  if (m.n > features::kFullGridSize) {
    throw UsageError("grid size exceeds the " +
                     std::to_string(features::kFullGridSize) + "-config grid");
  }
  if (m.kind == Kind::kSubsample && m.n == 0) {
    throw UsageError("subsample size must be positive");
  }
  return m;
}

std::string GridMode::to_string() const {
  switch (kind) {
    case Kind::kFull:
      return "full";
    case Kind::kSubsample:
      return "subsample:" + std::to_string(n);
    case Kind::kSynthetic:
      return n ? "synthetic:" + std::to_string(n) : "synthetic";
  }
  return "full";
}

std::optional<int> PipelineConfig::effective_holdout() const {
  if (holdout_explicit) return holdout_seed;
  if (seeds.size() >= 2) return seeds.back();
  return std::nullopt;
}

json to_json(const PipelineConfig& c) {
  const auto holdout = c.effective_holdout();
  return {
      {"graph",
       {{"train", c.train_path.string()},
        {"valid", c.valid_path.string()},
        {"test", c.test_path.string()}}},
      {"paths",
       {{"runs", c.run_root.string()},
        {"dataset", c.dataset_dir.string()},
        {"checkpoints", c.checkpoint_dir.string()},
        {"reports", c.report_dir.string()}}},
      {"grid", c.grid.to_string()},
      {"seeds", c.seeds},
      {"holdout_seed", holdout ? json(*holdout) : json(nullptr)},
      {"ranking", kge::to_string(c.ranking)},
      {"workers", c.workers},
      {"seed", c.seed},
      {"kge", c.kge.to_json()},
      {"twig", {{"layout", c.layout}, {"protocol", c.protocol.to_json()}}},
      {"analysis", {{"kl_symmetrise", c.kl_symmetrise}}},
  };
}

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      c.train_path = resolve(base_dir, g.value("train", c.train_path.string()));
      c.valid_path = resolve(base_dir, g.value("valid", c.valid_path.string()));
      c.test_path = resolve(base_dir, g.value("test", c.test_path.string()));
    } else {
      c.train_path = resolve(base_dir, c.train_path.string());
      c.valid_path = resolve(base_dir, c.valid_path.string());
      c.test_path = resolve(base_dir, c.test_path.string());
    }
    const json paths = j.value("paths", json::object());
    c.run_root = resolve(base_dir, paths.value("runs", c.run_root.string()));
    c.dataset_dir = resolve(base_dir, paths.value("dataset", c.dataset_dir.string()));
    c.checkpoint_dir =
        resolve(base_dir, paths.value("checkpoints", c.checkpoint_dir.string()));
    c.report_dir = resolve(base_dir, paths.value("reports", c.report_dir.string()));

    if (j.contains("grid")) c.grid = GridMode::parse(j.at("grid").get<std::string>());
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      c.seeds = s.is_number_integer() ? parse_seed_list(std::to_string(s.get<int>()))
                                      : s.get<std::vector<int>>();
    }
    if (j.contains("holdout_seed")) {
      c.holdout_explicit = true;
      const auto& h = j.at("holdout_seed");
      if (!h.is_null()) c.holdout_seed = h.get<int>();
    }
    if (j.contains("ranking")) {
      c.ranking = kge::parse_ranking(j.at("ranking").get<std::string>());
    }
    c.workers = j.value("workers", c.workers);
    c.seed = j.value("seed", c.seed);
    const json k = j.value("kge", json::object());
    c.kge.epochs = k.value("epochs", c.kge.epochs);
    c.kge.batch_size = k.value("batch_size", c.kge.batch_size);
    c.kge.adam_beta1 = k.value("adam_beta1", c.kge.adam_beta1);
    c.kge.adam_beta2 = k.value("adam_beta2", c.kge.adam_beta2);
    c.kge.adam_epsilon = k.value("adam_epsilon", c.kge.adam_epsilon);
    const json t = j.value("twig", json::object());
    if (t.contains("layout")) c.layout = t.at("layout").get<net::TwigLayout>();
    if (t.contains("protocol")) c.protocol = train::TrainProtocol::from_json(t.at("protocol"));
    const json a = j.value("analysis", json::object());
    c.kl_symmetrise = a.value("kl_symmetrise", c.kl_symmetrise);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config: ") + e.what());
  }
  if (c.seeds.empty()) throw UsageError("at least one seed is required");
  if (std::set<int>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw UsageError("seeds must be distinct");
  }
  if (c.workers == 0) throw UsageError("workers must be at least 1");
  if (c.kge.epochs < 0 || c.kge.batch_size == 0) {
    throw UsageError("KGE epochs must be >= 0 and batch size positive");
  }
  c.layout.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + " is not JSON: " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

void apply_seed_env(PipelineConfig& c) {
  const char* env = std::getenv("TWIGSIM_SEED");
  if (env == nullptr || *env == '\0') return;
  std::uint64_t v = 0;
  const std::string_view s(env);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw UsageError("TWIGSIM_SEED must be a non-negative integer");
  }
  c.seed = v;
}

std::vector<int> parse_seed_list(std::string_view text) {
  std::vector<int> out;
  if (text.find(',') == std::string_view::npos) {
    const std::size_t n = parse_count(text, "seed count");
    if (n == 0) throw UsageError("seed count must be positive");
    for (std::size_t i = 1; i <= n; ++i) out.push_back(static_cast<int>(i));
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    out.push_back(static_cast<int>(parse_count(text.substr(start, end - start), "seed")));
    start = end + 1;
  }
  return out;
}

std::vector<std::size_t> selected_configs(const PipelineConfig& c) {
  if (c.grid.n == 0) {
    std::vector<std::size_t> all(features::kFullGridSize);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  return features::stratified_subsample(c.grid.n, c.seed);
}

std::string run_key(const PipelineConfig& c) {
  json k = {{"format", kRunFormat},
            {"graph", graph_hashes(c)},
            {"synthetic", c.grid.synthetic()},
            {"configs", selected_configs(c)}};
  if (c.grid.synthetic()) {
    const auto w = kge::SynthOracleWeights::standard();
    k["oracle"] = {{"weights", w.weights}, {"intercept", w.intercept}};
  } else {
    k["kge"] = c.kge.to_json();
    k["ranking"] = kge::to_string(c.ranking);
  }
  return hash_hex(k.dump());
}

fs::path run_dir(const PipelineConfig& c) { return c.run_root / run_key(c); }

kg::KnowledgeGraph load_graph(const PipelineConfig& c) {
  return kg::load_graph(c.train_path, c.valid_path, c.test_path);
}

kge::GridSummary cmd_run_grid(const PipelineConfig& c, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const kg::KnowledgeGraph graph = load_graph(c);
  const auto indices = selected_configs(c);
  const fs::path dir = run_dir(c);
  fs::create_directories(dir);
  write_text(dir / "grid.json",
             json{{"config", to_json(c)},
                  {"inputs", graph_hashes(c)},
                  {"run_key", run_key(c)},
                  {"config_indices", indices}}
                     .dump(1) + "\n");
  log << "run-grid: " << indices.size() << " configs x " << c.seeds.size()
      << " seeds (" << c.grid.to_string() << ") -> " << dir.string() << '\n';

  kge::GridSummary summary;
  if (c.grid.synthetic()) {
    const kg::StructIndex index(graph);
    const auto runs = kge::synth_runs(graph, index, indices, c.seeds,
                                      kge::SynthOracleWeights::standard());
    for (const auto& r : runs) kge::write_run(r, dir);
    summary.completed = runs.size();
  } else {
    const auto grid = features::expand_grid();
    std::vector<kge::GridTask> tasks;
    for (int seed : c.seeds) {
      for (std::size_t i : indices) tasks.push_back({i, grid[i], seed});
    }
    kge::GridOptions opts;
    opts.settings = c.kge;
    opts.ranking = c.ranking;
    opts.workers = c.workers;
    std::size_t done = 0;
    opts.on_finished = [&](const kge::RunRecord& r) {
      ++done;
      log << "  [" << done << "/" << tasks.size() << "] "
          << kge::run_file_name(r.config_index, r.seed) << ' '
          << (r.ok() ? "mrr=" + std::to_string(r.mrr) : "FAILED: " + r.failure)
          << '\n';
      log.flush();
    };
    summary = kge::run_grid(graph, tasks, dir, opts);
  }
  summary.wall_time_s = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  log << "completed " << summary.completed << ", failed " << summary.failed
      << ", reused " << summary.reused << ", wall time " << summary.wall_time_s
      << " s\n";
  return summary;
}

features::FeatureDataset cmd_mine_features(const PipelineConfig& c,
                                           std::ostream& log) {
  const kg::KnowledgeGraph graph = load_graph(c);
  const kg::StructIndex index(graph);
  const auto runs = load_selected_runs(c, log);
  const auto holdout = c.effective_holdout();
  if (holdout && std::find(c.seeds.begin(), c.seeds.end(), *holdout) == c.seeds.end()) {
    throw UsageError("hold-out seed " + std::to_string(*holdout) +
                     " is not among the configured seeds");
  }
  features::FeatureDataset ds = features::assemble_dataset(graph, index, runs, holdout);
  ds.provenance = {{"config", to_json(c)},
                   {"inputs", {{"graph", graph_hashes(c)},
                               {"runs", runs_digest(runs)},
                               {"run_key", run_key(c)}}}};
  features::write_dataset(ds, c.dataset_dir);
  log << "mine-features: " << ds.batches.size() << " batches of "
      << ds.num_queries() << " rows (" << ds.num_training_batches()
      << " training, " << ds.failed_runs_excluded << " failed runs excluded) -> "
      << c.dataset_dir.string() << '\n';
  return ds;
}

train::TrainOutcome cmd_train(const PipelineConfig& c, std::ostream& log) {
  const features::FeatureDataset ds = features::read_dataset(c.dataset_dir);
  const std::string dataset_hash = hash_file(c.dataset_dir / "meta.json");
  log << "train: " << ds.num_training_batches() << " training batches, "
      << c.protocol.phase1_epochs << "+" << c.protocol.phase2_epochs
      << " epochs\n";
  auto outcome = train::train_twig(
      ds, c.layout, c.protocol, c.seed, [&](const train::EpochLog& e) {
        log << "  epoch " << e.epoch << " phase " << e.phase
            << " kl=" << e.mean_kl << " mse=" << e.mean_mse << '\n';
        log.flush();
      });
  const json meta_base = {{"config", to_json(c)},
                          {"inputs", {{"dataset", dataset_hash}}},
                          {"seed", c.seed}};
  json m1 = meta_base;
  m1["phase"] = 1;
  m1["epochs"] = c.protocol.phase1_epochs;
  json m2 = meta_base;
  m2["phase"] = 2;
  m2["epochs"] = c.protocol.phase1_epochs + c.protocol.phase2_epochs;
  fs::create_directories(c.checkpoint_dir);
  net::write_checkpoint(c.checkpoint_dir / kPhase1Checkpoint, outcome.phase1_model, m1);
  net::write_checkpoint(c.checkpoint_dir / kFinalCheckpoint, outcome.model, m2);
  train::write_training_log(outcome.log, (c.checkpoint_dir / "training_log.csv").string());
  log << "wrote checkpoints to " << c.checkpoint_dir.string() << '\n';
  return outcome;
}

json cmd_evaluate(const PipelineConfig& c, std::ostream& log) {
  const features::FeatureDataset ds = features::read_dataset(c.dataset_dir);
  if (!ds.holdout_seed) throw DataError("dataset has no hold-out seed");
  const fs::path ckpt_path = c.checkpoint_dir / kFinalCheckpoint;
  const net::Checkpoint ckpt = net::read_checkpoint(ckpt_path);

  std::vector<std::size_t> held;
  for (std::size_t b = 0; b < ds.batches.size(); ++b) {
    if (ds.batches[b].holdout) held.push_back(b);
  }
  if (held.size() < 2) {
    throw DataError("hold-out seed " + std::to_string(*ds.holdout_seed) +
                    " has fewer than 2 runs in the dataset");
  }
  const auto predicted = train::predicted_batch_mrr(ckpt.model, ds, held);
  std::vector<double> truth;
  std::vector<features::HyperparamConfig> configs;
  json per_config = json::array();
  for (std::size_t k = 0; k < held.size(); ++k) {
    const auto& b = ds.batches[held[k]];
    truth.push_back(b.true_mrr);
    configs.push_back(b.config);
    per_config.push_back({{"config_index", b.config_index},
                          {"config", describe_config_json(b.config)},
                          {"predicted_mrr", predicted[k]},
                          {"true_mrr", b.true_mrr}});
  }
  const auto r2 = analysis::r2_of_mrr(predicted, truth);
  const kg::KnowledgeGraph graph = load_graph(c);
  const std::uint64_t kge_params =
      kge::parameter_accounting(configs, graph.num_entities(), graph.num_relations());
  const double ratio = static_cast<double>(ckpt.model.param_count()) /
                       static_cast<double>(kge_params);
  json report = {
      {"format", "twigsim-report"},
      {"version", 1},
      {"config", to_json(c)},
      {"inputs",
       {{"dataset", hash_file(c.dataset_dir / "meta.json")},
        {"checkpoint", hash_file(ckpt_path)}}},
      {"holdout_seed", *ds.holdout_seed},
      {"num_configs", held.size()},
      {"r2", r2.r2},
      {"correlation", r2.correlation ? json(*r2.correlation) : json(nullptr)},
      {"parameters",
       {{"twig", ckpt.model.param_count()},
        {"kge_evaluated_grid", kge_params},
        {"ratio", ratio},
        {"percent", 100.0 * ratio}}},
      {"per_config", per_config},
  };
  validate_report(report);
  write_text(c.report_dir / "report.json", report.dump(1) + "\n");
  log << "evaluate: " << held.size() << " hold-out configs, R2=" << r2.r2
      << ", correlation="
      << (r2.correlation ? std::to_string(*r2.correlation) : "undefined")
      << ", parameters " << ckpt.model.param_count() << " / " << kge_params
      << " (" << 100.0 * ratio << "%)\n";
  return report;
}

void validate_report(const json& r) {
  auto need = [&](const json& obj, const char* key, auto pred, const char* type) {
    if (!obj.is_object() || !obj.contains(key) || !pred(obj.at(key))) {
      throw DataError(std::string("report field '") + key + "' missing or not " + type);
    }
  };
  const auto is_number = [](const json& v) { return v.is_number(); };
  const auto is_uint = [](const json& v) { return v.is_number_unsigned(); };
  const auto is_object = [](const json& v) { return v.is_object(); };
  need(r, "format", [](const json& v) { return v == "twigsim-report"; }, "'twigsim-report'");
  need(r, "version", [](const json& v) { return v == 1; }, "1");
  need(r, "config", is_object, "an object");
  need(r, "inputs", is_object, "an object");
  need(r, "holdout_seed", [](const json& v) { return v.is_number_integer(); }, "an integer");
  need(r, "num_configs", is_uint, "an unsigned integer");
  need(r, "r2", [](const json& v) { return v.is_number() && v.get<double>() <= 1.0; },
       "a number <= 1");
  need(r, "correlation",
       [](const json& v) {
         return v.is_null() || (v.is_number() && std::abs(v.get<double>()) <= 1.0);
       },
       "null or a number in [-1, 1]");
  need(r, "parameters", is_object, "an object");
  const json& p = r.at("parameters");
  need(p, "twig", is_uint, "an unsigned integer");
  need(p, "kge_evaluated_grid", is_uint, "an unsigned integer");
  need(p, "ratio", is_number, "a number");
  need(p, "percent", is_number, "a number");
  need(r, "per_config", [](const json& v) { return v.is_array(); }, "an array");
  const json& rows = r.at("per_config");
  if (rows.size() != r.at("num_configs").get<std::size_t>()) {
    throw DataError("report per_config length differs from num_configs");
  }
  for (const auto& row : rows) {
    need(row, "config_index", is_uint, "an unsigned integer");
    need(row, "config", is_object, "an object");
    need(row, "predicted_mrr", is_number, "a number");
    need(row, "true_mrr", is_number, "a number");
  }
}

analysis::SignalReport cmd_analyze_signal(const PipelineConfig& c,
                                          std::ostream& log) {
  if (c.seeds.size() < 2) throw UsageError("analyze-signal needs at least 2 seeds");
  const kg::KnowledgeGraph graph = load_graph(c);
  const auto runs = load_selected_runs(c, log);
  auto report = analysis::signal_report(runs, graph.num_entities(), c.kl_symmetrise);

  json j = analysis::to_json(report);
  j["config"] = to_json(c);
  j["inputs"] = {{"graph", graph_hashes(c)}, {"runs", runs_digest(runs)}};
  write_text(c.report_dir / "signal_report.json", j.dump(1) + "\n");
  write_text(c.report_dir / "mrr_corr.csv", report.mrr_corr.to_csv(report.seeds));
  write_text(c.report_dir / "same_config_kl.csv",
             report.kl.same_config.to_csv(report.seeds));
  std::ostringstream dat;
  dat << "# per-config rank-list Pearson across seed pairs; n=" << report.ranklist_corr.values.size()
      << " skipped=" << report.ranklist_corr.skipped << "\n# bin_lo bin_hi centre count\n";
  const auto& h = report.ranklist_corr;
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    dat << h.bin_edges[b] << ' ' << h.bin_edges[b + 1] << ' '
        << 0.5 * (h.bin_edges[b] + h.bin_edges[b + 1]) << ' ' << h.counts[b] << '\n';
  }
  write_text(c.report_dir / "ranklist_corr_hist.dat", dat.str());

  double min_off = 1.0;
  for (std::size_t a = 0; a < report.mrr_corr.n; ++a) {
    for (std::size_t b = 0; b < a; ++b) min_off = std::min(min_off, report.mrr_corr.at(a, b));
  }
  log << "analyze-signal: " << report.num_configs << " configs x " << report.seeds.size()
      << " seeds; min cross-seed MRR corr " << min_off << "; same-config KL "
      << report.kl.same_config_mean << " vs cross-config KL " << report.kl.cross_config_mean
      << "; rank-list corr mean " << h.mean << " -> " << c.report_dir.string() << '\n';
  return report;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 2;
}

}  // namespace twigsim::pipeline
