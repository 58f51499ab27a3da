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

#include "twigsim/run_record.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "twigsim/errors.hpp"

namespace twigsim::kge {

double mean_reciprocal_rank(std::span<const int> ranks) {
  if (ranks.empty()) return 0.0;
  double sum = 0.0;
  for (int r : ranks) sum += 1.0 / static_cast<double>(r);
  return sum / static_cast<double>(ranks.size());
}

void validate(const RunRecord& r, std::size_t num_entities) {
  if (!r.ok()) return;
  for (int rank : r.ranks) {
    if (rank < 1 || static_cast<std::size_t>(rank) > num_entities) {
      throw DataError("rank " + std::to_string(rank) + " outside [1, " +
                      std::to_string(num_entities) + "] in " +
                      run_file_name(r.config_index, r.seed));
    }
  }
  if (std::abs(mean_reciprocal_rank(r.ranks) - r.mrr) > 1e-12) {
    throw DataError("stored mrr does not match ranks in " +
                    run_file_name(r.config_index, r.seed));
  }
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"config", r.config},
                     {"config_index", r.config_index},
                     {"seed", r.seed},
                     {"ranks", r.ranks},
                     {"mrr", r.mrr},
                     {"status", r.ok() ? "ok" : "failed"},
                     {"wall_time_s", r.wall_time_s},
                     {"metadata", r.metadata}};
  if (!r.ok()) j["failure"] = r.failure;
}

void from_json(const nlohmann::json& j, RunRecord& r) {
  r.config = j.at("config").get<features::HyperparamConfig>();
  r.config_index = j.at("config_index").get<std::size_t>();
  r.seed = j.at("seed").get<int>();
  r.ranks = j.at("ranks").get<std::vector<int>>();
  r.mrr = j.at("mrr").get<double>();
  const auto status = j.at("status").get<std::string>();
  if (status != "ok" && status != "failed") {
    throw DataError("unknown run status: " + status);
  }
  r.status = status == "ok" ? RunStatus::kOk : RunStatus::kFailed;
  r.wall_time_s = j.value("wall_time_s", 0.0);
  r.failure = j.value("failure", std::string());
  r.metadata = j.value("metadata", nlohmann::json::object());
}

std::string run_file_name(std::size_t config_index, int seed) {
  return "cfg" + std::to_string(config_index) + "_seed" +
         std::to_string(seed) + ".json";
}

void write_run(const RunRecord& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto final_path = dir / run_file_name(r.config_index, r.seed);
  const auto tmp_path = final_path.string() + ".tmp";
  {
    std::ofstream out(tmp_path);
    if (!out) throw DataError("cannot write " + tmp_path);
    out << nlohmann::json(r).dump() << '\n';
  }
  std::filesystem::rename(tmp_path, final_path);
}

RunRecord read_run(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read run file " + file.string());
  try {
    return nlohmann::json::parse(in).get<RunRecord>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad run file " + file.string() + ": " + e.what());
  }
}

std::vector<RunRecord> read_run_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("run directory not found: " + dir.string());
  }
  std::vector<RunRecord> runs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("cfg", 0) == 0 && entry.path().extension() == ".json") {
      runs.push_back(read_run(entry.path()));
    }
  }
  std::sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    return a.seed != b.seed ? a.seed < b.seed : a.config_index < b.config_index;
  });
  return runs;
}

}  // namespace twigsim::kge
