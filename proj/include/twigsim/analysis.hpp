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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "twigsim/run_record.hpp"

namespace twigsim::analysis {

// Sample Pearson correlation. nullopt when either input has zero variance.
// Throws UsageError when lengths differ or are below 2.
std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y);

struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  explicit SquareMatrix(std::size_t size = 0) : n(size), values(size * size) {}
  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  bool symmetric() const;
  std::string to_csv(std::span<const int> labels) const;
};

// Runs arranged as [seed][config], restricted to configs that succeeded under
// every seed.
struct RunSets {
  std::vector<int> seeds;
  std::vector<std::size_t> config_indices;
  std::vector<std::vector<const kge::RunRecord*>> table;
  std::size_t configs_dropped = 0;  // failed under at least one seed

  std::size_t num_seeds() const { return seeds.size(); }
  std::size_t num_configs() const { return config_indices.size(); }
};

// Throws DataError when seeds cover different config sets, when a config
// appears twice for one seed, or when rank lists disagree in length or query
// order.
RunSets group_runs(std::span<const kge::RunRecord> runs);

// Pairwise Pearson of per-seed MRR vectors over the grid.
SquareMatrix mrr_correlation_matrix(const RunSets& sets);

struct KlStats {
  SquareMatrix same_config;  // seeds x seeds mean KL over matched configs
  double same_config_mean = 0.0;  // mean of the off-diagonal entries
  double cross_config_mean = 0.0;
  std::size_t cross_config_pairs = 0;
  bool symmetrised = true;
};

// Hard 30-bin rank histograms over [1, |E|]. With symmetrise, each pair's KL
// is the mean of both directions.
KlStats kl_matrix(const RunSets& sets, std::size_t num_entities,
                  bool symmetrise = true);

struct CorrelationDistribution {
  std::vector<double> values;  // one per (config, seed pair) with variance
  std::vector<double> bin_edges;  // bins + 1 edges over [-1, 1]
  std::vector<std::size_t> counts;
  std::size_t skipped = 0;  // zero-variance rank lists
  double mean = 0.0;
  double median = 0.0;
};

CorrelationDistribution ranklist_correlation_distribution(const RunSets& sets,
                                                          std::size_t bins = 20);

struct R2Result {
  double r2 = 0.0;
  std::optional<double> correlation;
};

// 1 - SS_res / SS_tot plus the Pearson correlation. Throws UsageError with
// fewer than 2 configs or constant truth.
R2Result r2_of_mrr(std::span<const double> predicted,
                   std::span<const double> truth);

struct SignalReport {
  std::vector<int> seeds;
  std::size_t num_configs = 0;
  std::size_t configs_dropped = 0;
  SquareMatrix mrr_corr;
  KlStats kl;
  CorrelationDistribution ranklist_corr;
};

SignalReport signal_report(std::span<const kge::RunRecord> runs,
                           std::size_t num_entities, bool symmetrise = true);
nlohmann::json to_json(const SignalReport& r);

}  // namespace twigsim::analysis
