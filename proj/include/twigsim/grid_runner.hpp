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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "twigsim/kge.hpp"

namespace twigsim::kge {

struct GridTask {
  std::size_t config_index = 0;
  features::HyperparamConfig config;
  int seed = 0;
};

struct GridSummary {
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::size_t reused = 0;  // already present in the run directory
  double wall_time_s = 0.0;
};

struct GridOptions {
  KgeSettings settings;
  RankingMode ranking = RankingMode::kFiltered;
  std::size_t workers = 1;
  // Keep existing successful run files instead of retraining them.
  bool resume = true;
  std::function<void(const RunRecord&)> on_finished;
};

// Seed mixed into each task's RNG so that configs sharing a seed do not share
// random streams.
std::uint64_t task_seed(int seed, std::size_t config_index);

// Trains and evaluates one (config, seed). Divergence yields a failed record
// rather than an exception.
RunRecord run_task(const kg::KnowledgeGraph& graph, const GridTask& task,
                   const KgeSettings& settings, RankingMode ranking);

// Runs every task on a worker pool, one run file per task in out_dir.
GridSummary run_grid(const kg::KnowledgeGraph& graph,
                     std::span<const GridTask> tasks,
                     const std::filesystem::path& out_dir,
                     const GridOptions& options);

}  // namespace twigsim::kge
