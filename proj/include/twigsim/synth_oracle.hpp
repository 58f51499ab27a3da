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

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "twigsim/features.hpp"
#include "twigsim/kg_store.hpp"
#include "twigsim/run_record.hpp"

namespace twigsim::kge {

// Synthetic ground truth that is, by construction, a function of structure and
// hyperparameters only:
//   rank = clamp(round(|E| * sigmoid(w . z + intercept)), 1, |E|)
// where z is a standardised feature row.
struct SynthOracleWeights {
  std::array<double, features::kRowWidth> weights{};
  double intercept = 0.0;

  // The fixed weight vector shipped with the project.
  static SynthOracleWeights standard();
};

int synth_rank(std::span<const double> standardised_row,
               std::size_t num_entities, const SynthOracleWeights& w);

// One rank per row of a flat standardised row matrix.
std::vector<int> synth_oracle(std::span<const double> standardised_rows,
                              std::size_t num_entities,
                              const SynthOracleWeights& w);

// Synthetic run records for the given full-grid indices and seeds. Rows are
// standardised with statistics fitted over the validation queries crossed
// with the selected configs, the same statistics a dataset assembled from
// these runs uses. Every seed receives the same ranks.
std::vector<RunRecord> synth_runs(const kg::KnowledgeGraph& graph,
                                  const kg::StructIndex& index,
                                  std::span<const std::size_t> config_indices,
                                  std::span<const int> seeds,
                                  const SynthOracleWeights& w);

}  // namespace twigsim::kge
