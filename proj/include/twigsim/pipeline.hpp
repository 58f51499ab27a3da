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

#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "twigsim/analysis.hpp"
#include "twigsim/features.hpp"
#include "twigsim/grid_runner.hpp"
#include "twigsim/kg_store.hpp"
#include "twigsim/twig_net.hpp"
#include "twigsim/twig_train.hpp"

namespace twigsim::pipeline {

// "full", "subsample:<n>", "synthetic" or "synthetic:<n>".
struct GridMode {
  enum class Kind { kFull, kSubsample, kSynthetic };
  Kind kind = Kind::kSubsample;
  std::size_t n = 81;  // 0 means the whole grid

  static GridMode parse(std::string_view text);
  std::string to_string() const;
  bool synthetic() const { return kind == Kind::kSynthetic; }
};

struct PipelineConfig {
  std::filesystem::path train_path = "data/umls/train.tsv";
  std::filesystem::path valid_path = "data/umls/valid.tsv";
  std::filesystem::path test_path = "data/umls/test.tsv";
  std::filesystem::path run_root = "out/runs";
  std::filesystem::path dataset_dir = "out/dataset";
  std::filesystem::path checkpoint_dir = "out/checkpoints";
  std::filesystem::path report_dir = "out/reports";

  GridMode grid;
  std::vector<int> seeds{1, 2};
  // Defaults to the last seed when at least two seeds are configured.
  std::optional<int> holdout_seed;
  bool holdout_explicit = false;
  kge::RankingMode ranking = kge::RankingMode::kFiltered;
  std::size_t workers = 1;
  std::uint64_t seed = 42;  // subsample selection and TWIG initialisation

  kge::KgeSettings kge;
  net::TwigLayout layout;
  train::TrainProtocol protocol;
  bool kl_symmetrise = true;

  std::optional<int> effective_holdout() const;
};

nlohmann::json to_json(const PipelineConfig& c);
// Relative paths are resolved against base_dir.
PipelineConfig config_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

// TWIGSIM_SEED, when set, replaces the global seed.
void apply_seed_env(PipelineConfig& c);

std::vector<int> parse_seed_list(std::string_view text);

std::vector<std::size_t> selected_configs(const PipelineConfig& c);

// Content key of a run set: graph contents, grid selection, training and
// ranking settings. Seeds are not part of it, so adding seeds extends a set.
std::string run_key(const PipelineConfig& c);
std::filesystem::path run_dir(const PipelineConfig& c);

kg::KnowledgeGraph load_graph(const PipelineConfig& c);

// Stage commands. Progress goes to log.
kge::GridSummary cmd_run_grid(const PipelineConfig& c, std::ostream& log);
features::FeatureDataset cmd_mine_features(const PipelineConfig& c,
                                           std::ostream& log);
train::TrainOutcome cmd_train(const PipelineConfig& c, std::ostream& log);
nlohmann::json cmd_evaluate(const PipelineConfig& c, std::ostream& log);
analysis::SignalReport cmd_analyze_signal(const PipelineConfig& c,
                                          std::ostream& log);

// Throws DataError when an evaluation report is missing a field or has the
// wrong type.
void validate_report(const nlohmann::json& report);

inline constexpr std::string_view kFinalCheckpoint = "twig_final.json";
inline constexpr std::string_view kPhase1Checkpoint = "twig_phase1.json";

// 1 usage, 2 data, 3 numerical; anything else is reported as a data error.
int exit_code(const std::exception& e);

}  // namespace twigsim::pipeline
