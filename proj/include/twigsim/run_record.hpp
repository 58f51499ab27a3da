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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "twigsim/hyperparams.hpp"

namespace twigsim::kge {

enum class RunStatus { kOk, kFailed };

// Output of one KGE training run. ranks follow the canonical query order:
// for each validation triple in file order, the head query then the tail
// query.
struct RunRecord {
  features::HyperparamConfig config;
  std::size_t config_index = 0;  // position in expand_grid()
  int seed = 0;
  std::vector<int> ranks;
  double mrr = 0.0;
  RunStatus status = RunStatus::kOk;
  double wall_time_s = 0.0;
  std::string failure;  // set when status is kFailed
  nlohmann::json metadata = nlohmann::json::object();

  bool ok() const { return status == RunStatus::kOk; }
};

double mean_reciprocal_rank(std::span<const int> ranks);

// Throws DataError when a successful record has out-of-range ranks or an mrr
// that does not match its ranks to 1e-12.
void validate(const RunRecord& r, std::size_t num_entities);

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

std::string run_file_name(std::size_t config_index, int seed);

void write_run(const RunRecord& r, const std::filesystem::path& dir);
RunRecord read_run(const std::filesystem::path& file);

// Every cfg*_seed*.json under dir, sorted by (seed, config_index).
std::vector<RunRecord> read_run_dir(const std::filesystem::path& dir);

}  // namespace twigsim::kge
