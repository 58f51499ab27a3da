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
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "twigsim/hyperparams.hpp"
#include "twigsim/kg_store.hpp"
#include "twigsim/run_record.hpp"

namespace twigsim::features {

inline constexpr std::size_t kStructFeatureCount = 23;
inline constexpr std::size_t kRowWidth = kStructFeatureCount + kHypFeatureCount;

using StructFeatureVector = std::array<double, kStructFeatureCount>;
using FeatureRow = std::array<double, kRowWidth>;

enum StructSlot : std::size_t {
  kIsHead = 0,
  kSDeg,
  kODeg,
  kPFreq,
  kSPCofreq,
  kOPCofreq,
  kSOCofreq,
  kSMinDegNeighbour,
  kSMaxDegNeighbour,
  kSMeanDegNeighbour,
  kOMinDegNeighbour,
  kOMaxDegNeighbour,
  kOMeanDegNeighbour,
  kSNumNeighbours,
  kONumNeighbours,
  kSMinFreqRel,
  kSMaxFreqRel,
  kSMeanFreqRel,
  kOMinFreqRel,
  kOMaxFreqRel,
  kOMeanFreqRel,
  kSNumRels,
  kONumRels,
};

enum class Side { kHead, kTail };

const std::array<std::string_view, kStructFeatureCount>& struct_feature_names();
// Structural names followed by hyperparameter names.
std::vector<std::string> row_feature_names();

// Features of the query that corrupts `side` of `triple`. Entities with no
// train-split edges get zero neighbourhood statistics.
StructFeatureVector structural_features(const kg::StructIndex& index,
                                        const kg::Triple& triple, Side side);

// Canonical validation queries: per validation triple in file order, the head
// query then the tail query.
std::vector<StructFeatureVector> validation_query_features(
    const kg::KnowledgeGraph& graph, const kg::StructIndex& index);

FeatureRow make_row(const StructFeatureVector& s, const HypFeatureVector& h);

// Row columns that get z-scored: every structural feature plus npp and dim.
bool is_standardised_column(std::size_t column);

// Per-column z-score. Columns that are not standardised, or that were
// constant in the fitting data, have mean 0 and scale 1.
struct Standardizer {
  std::array<double, kRowWidth> mean{};
  std::array<double, kRowWidth> scale{};

  Standardizer() { scale.fill(1.0); }

  // rows is a flat row-major matrix with kRowWidth columns.
  static Standardizer fit(std::span<const double> rows);
  // Same result as fit() on every query row paired with every hyp vector,
  // without materialising the product.
  static Standardizer fit_product(std::span<const double> struct_rows,
                                  std::span<const HypFeatureVector> hyps);

  void apply(std::span<double> rows) const;
  std::vector<double> transform(std::span<const double> rows) const;
};

void to_json(nlohmann::json& j, const Standardizer& s);
void from_json(const nlohmann::json& j, Standardizer& s);

// All rows of one (config, seed) run. The structural block is shared by
// every batch of a dataset; a batch stores only its hyperparameter encoding
// and targets.
struct Batch {
  std::size_t config_index = 0;
  int seed = 0;
  HyperparamConfig config;
  bool holdout = false;
  double true_mrr = 0.0;
  HypFeatureVector hyp{};
  std::vector<double> target_ranks;

  std::size_t rows() const { return target_ranks.size(); }
  std::string name() const;  // cfg<i>_seed<j>
};

struct FeatureDataset {
  std::size_t num_entities = 0;
  std::optional<int> holdout_seed;
  Standardizer standardizer;
  // queries x kStructFeatureCount, canonical query order, raw values.
  std::vector<double> query_features;
  std::vector<Batch> batches;
  std::size_t failed_runs_excluded = 0;
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t num_queries() const {
    return query_features.size() / kStructFeatureCount;
  }
  std::size_t num_training_batches() const;

  // Full raw rows (rows x kRowWidth) of one batch.
  std::vector<double> raw_rows(const Batch& b) const;
  // raw_rows passed through the stored standardizer.
  std::vector<double> standardised_rows(const Batch& b) const;
};

// One batch per successful run, rows in canonical query order. Standardisation
// is fitted on non-holdout batches only. Throws DataError when a run's rank
// count differs from the number of validation queries.
FeatureDataset assemble_dataset(const kg::KnowledgeGraph& graph,
                                const kg::StructIndex& index,
                                std::span<const kge::RunRecord> runs,
                                std::optional<int> holdout_seed);

// Directory layout: meta.json plus one little-endian float64 block per batch
// (cfg<i>_seed<j>.bin, rows x (kRowWidth + 1), target rank last).
void write_dataset(const FeatureDataset& dataset,
                   const std::filesystem::path& dir);
FeatureDataset read_dataset(const std::filesystem::path& dir);

}  // namespace twigsim::features
