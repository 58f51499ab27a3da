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

// twigsim: run-grid | mine-features | train | evaluate | analyze-signal

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "twigsim/errors.hpp"
#include "twigsim/pipeline.hpp"

namespace {

using twigsim::pipeline::PipelineConfig;

struct Overrides {
  std::string config;
  std::optional<std::string> grid;
  std::optional<std::string> seeds;
  std::optional<int> holdout_seed;
  std::optional<std::string> ranking;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  std::optional<int> kge_epochs;
  std::optional<int> phase1_epochs;
  std::optional<int> phase2_epochs;
  std::optional<double> twig_lr;
  std::optional<double> kl_weight;
  std::optional<double> mse_weight;
  std::optional<std::string> kl_direction;
  std::optional<std::string> run_dir;
  std::optional<std::string> dataset_dir;
  std::optional<std::string> checkpoint_dir;
  std::optional<std::string> report_dir;
  bool kl_one_way = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)");
  cmd->add_option("--grid", o.grid, "full | subsample:<n> | synthetic[:<n>]");
  cmd->add_option("--seeds", o.seeds, "seed count N (seeds 1..N) or a list 1,2,3");
  cmd->add_option("--holdout-seed", o.holdout_seed, "seed held out from TWIG training");
  cmd->add_option("--ranking", o.ranking, "filtered | raw");
  cmd->add_option("--workers", o.workers, "parallel KGE runs")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "global seed (TWIGSIM_SEED overrides the config)");
  cmd->add_option("--kge-epochs", o.kge_epochs, "KGE training epochs");
  cmd->add_option("--phase1-epochs", o.phase1_epochs);
  cmd->add_option("--phase2-epochs", o.phase2_epochs);
  cmd->add_option("--twig-lr", o.twig_lr, "TWIG Adam learning rate");
  cmd->add_option("--kl-weight", o.kl_weight, "phase-2 KL weight");
  cmd->add_option("--mse-weight", o.mse_weight, "phase-2 MRR-MSE weight");
  cmd->add_option("--kl-direction", o.kl_direction, "true_to_predicted | predicted_to_true");
  cmd->add_option("--run-dir", o.run_dir, "root of run directories");
  cmd->add_option("--dataset-dir", o.dataset_dir);
  cmd->add_option("--checkpoint-dir", o.checkpoint_dir);
  cmd->add_option("--report-dir", o.report_dir);
  cmd->add_flag("--kl-one-way", o.kl_one_way, "signal KL in one direction only");
}

PipelineConfig resolve(const Overrides& o) {
  namespace tp = twigsim::pipeline;
  PipelineConfig c = o.config.empty()
                         ? tp::config_from_json(nlohmann::json::object(),
                                                std::filesystem::current_path())
                         : tp::load_config(o.config);
  const auto here = std::filesystem::current_path();
  auto path = [&](const std::string& p) {
    return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p)
                                                  : (here / p).lexically_normal();
  };
  if (o.grid) c.grid = tp::GridMode::parse(*o.grid);
  if (o.seeds) c.seeds = tp::parse_seed_list(*o.seeds);
  if (o.holdout_seed) {
    c.holdout_explicit = true;
    c.holdout_seed = *o.holdout_seed;
  }
  if (o.ranking) c.ranking = twigsim::kge::parse_ranking(*o.ranking);
  if (o.workers) c.workers = *o.workers;
  if (o.seed) c.seed = *o.seed;
  if (o.kge_epochs) c.kge.epochs = *o.kge_epochs;
  if (o.phase1_epochs) c.protocol.phase1_epochs = *o.phase1_epochs;
  if (o.phase2_epochs) c.protocol.phase2_epochs = *o.phase2_epochs;
  if (o.twig_lr) c.protocol.adam.learning_rate = *o.twig_lr;
  if (o.kl_weight) c.protocol.weights.kl = *o.kl_weight;
  if (o.mse_weight) c.protocol.weights.mse = *o.mse_weight;
  if (o.kl_direction) {
    c.protocol.weights.direction = twigsim::train::parse_kl_direction(*o.kl_direction);
  }
  if (o.run_dir) c.run_root = path(*o.run_dir);
  if (o.dataset_dir) c.dataset_dir = path(*o.dataset_dir);
  if (o.checkpoint_dir) c.checkpoint_dir = path(*o.checkpoint_dir);
  if (o.report_dir) c.report_dir = path(*o.report_dir);
  if (o.kl_one_way) c.kl_symmetrise = false;
  // Environment wins over file and flags for the global seed.
  tp::apply_seed_env(c);
  // Re-check invariants after overrides.
  return tp::config_from_json(tp::to_json(c), std::filesystem::path("/"));
}

}  // namespace

int main(int argc, char** argv) {
  namespace tp = twigsim::pipeline;
  CLI::App app{"twigsim: simulate KGE hyperparameter sweeps with TWIG"};
  app.require_subcommand(1);
  Overrides o;
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the resolved config and exit");

  auto* run_grid = app.add_subcommand("run-grid", "train KGE runs over the grid");
  auto* mine = app.add_subcommand("mine-features", "build the TWIG feature dataset");
  auto* train = app.add_subcommand("train", "train TWIG on the dataset");
  auto* evaluate = app.add_subcommand("evaluate", "score TWIG on the hold-out seed");
  auto* signal =
      app.add_subcommand("analyze-signal", "cross-seed signal study of the runs");
  for (auto* cmd : {run_grid, mine, train, evaluate, signal}) add_common(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const PipelineConfig c = resolve(o);
    if (print_config) {
      std::cout << tp::to_json(c).dump(2) << '\n';
      return 0;
    }
    // Failed KGE runs are recorded, not fatal; the summary reports them.
    if (run_grid->parsed()) tp::cmd_run_grid(c, std::cout);
    if (mine->parsed()) tp::cmd_mine_features(c, std::cout);
    if (train->parsed()) tp::cmd_train(c, std::cout);
    if (evaluate->parsed()) tp::cmd_evaluate(c, std::cout);
    if (signal->parsed()) tp::cmd_analyze_signal(c, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "twigsim: " << e.what() << '\n';
    return tp::exit_code(e);
  }
  return 0;
}
