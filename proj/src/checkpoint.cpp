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

#include "twigsim/checkpoint.hpp"

#include <fstream>

#include "twigsim/errors.hpp"

namespace twigsim::net {

namespace {
constexpr const char* kFormat = "twigsim-checkpoint";
constexpr int kVersion = 1;
}  // namespace

nlohmann::json checkpoint_json(const TwigModel& model,
                               const nlohmann::json& metadata) {
  return {{"format", kFormat},
          {"version", kVersion},
          {"layout", model.layout()},
          {"param_count", model.param_count()},
          {"parameters", model.flatten()},
          {"standardizer", model.standardizer},
          {"metadata", metadata}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat ||
        j.at("version").get<int>() != kVersion) {
      throw DataError("not a twigsim checkpoint (or unsupported version)");
    }
    Checkpoint c;
    c.model = TwigModel(j.at("layout").get<TwigLayout>());
    if (j.at("param_count").get<std::size_t>() != c.model.param_count()) {
      throw DataError("checkpoint param_count disagrees with its layout");
    }
    c.model.unflatten(j.at("parameters").get<std::vector<double>>());
    c.model.standardizer = j.at("standardizer").get<features::Standardizer>();
    c.metadata = j.value("metadata", nlohmann::json::object());
    if (!c.model.all_finite()) throw DataError("checkpoint has non-finite parameters");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const TwigModel& model,
                      const nlohmann::json& metadata) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_json(model, metadata).dump(1) << '\n';
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("checkpoint not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace twigsim::net
