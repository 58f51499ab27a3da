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

#include <filesystem>

#include <json.hpp>

#include "twigsim/twig_net.hpp"

namespace twigsim::net {

struct Checkpoint {
  TwigModel model;
  nlohmann::json metadata = nlohmann::json::object();
};

// JSON with the layout, the flattened parameters (per layer, column-major
// weights then bias), the standardisation vectors and free-form metadata.
nlohmann::json checkpoint_json(const TwigModel& model,
                               const nlohmann::json& metadata);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void write_checkpoint(const std::filesystem::path& path, const TwigModel& model,
                      const nlohmann::json& metadata);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace twigsim::net
