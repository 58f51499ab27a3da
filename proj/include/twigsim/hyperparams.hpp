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
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace twigsim::features {

enum class Sampler { kBasic, kBernoulli, kPseudoTyped };
enum class LossKind { kMarginRanking, kBCEWithLogits, kCrossEntropy };

std::string_view to_string(Sampler s);
std::string_view to_string(LossKind l);
// Throw UsageError on an unknown name.
Sampler parse_sampler(std::string_view name);
LossKind parse_loss(std::string_view name);

// One cell of the hyperparameter grid. margin is 0 for losses without one.
struct HyperparamConfig {
  Sampler sampler = Sampler::kBasic;
  int negatives_per_positive = 5;
  LossKind loss = LossKind::kMarginRanking;
  double margin = 0.5;
  double learning_rate = 1e-2;
  int dim = 50;
  double reg_coefficient = 1e-2;

  friend bool operator==(const HyperparamConfig&,
                         const HyperparamConfig&) = default;
};

void to_json(nlohmann::json& j, const HyperparamConfig& c);
void from_json(const nlohmann::json& j, HyperparamConfig& c);

std::string describe(const HyperparamConfig& c);

inline constexpr std::array<Sampler, 3> kSamplers = {
    Sampler::kBasic, Sampler::kBernoulli, Sampler::kPseudoTyped};
inline constexpr std::array<int, 3> kNegativesPerPositive = {5, 25, 125};
inline constexpr std::array<double, 3> kMargins = {0.5, 1.0, 2.0};
inline constexpr std::array<double, 3> kLearningRates = {1e-2, 1e-4, 1e-6};
inline constexpr std::array<int, 3> kDims = {50, 100, 250};
inline constexpr std::array<double, 3> kRegCoefficients = {1e-2, 1e-4, 1e-6};
inline constexpr std::size_t kFullGridSize = 1215;

// Full Cartesian grid, margin expanded only under margin ranking. Order:
// sampler, negatives, loss variant (MR 0.5, MR 1, MR 2, BCE, CE), learning
// rate, dim, regularisation; the last varies fastest.
std::vector<HyperparamConfig> expand_grid();

// Indices into expand_grid() chosen so every (dim, loss family) cell gets an
// equal share (remainder spread in cell order). Sorted ascending.
std::vector<std::size_t> stratified_subsample(std::size_t n,
                                              std::uint64_t seed);

inline constexpr std::size_t kHypFeatureCount = 11;
using HypFeatureVector = std::array<double, kHypFeatureCount>;

// Slot layout of HypFeatureVector.
enum HypSlot : std::size_t {
  kSamplerBasic = 0,
  kSamplerBernoulli = 1,
  kSamplerPseudoTyped = 2,
  kLossMarginRanking = 3,
  kLossBCE = 4,
  kLossCrossEntropy = 5,
  kNpp = 6,
  kMargin = 7,
  kLogLearningRate = 8,
  kDim = 9,
  kLogReg = 10,
};

// One-hot sampler and loss, raw npp and dim, log10 learning rate and
// regularisation. Throws UsageError for a config outside the encoding
// (margin on a margin-free loss, non-positive rates).
HypFeatureVector hyperparam_features(const HyperparamConfig& c);

const std::array<std::string_view, kHypFeatureCount>& hyp_feature_names();

}  // namespace twigsim::features
