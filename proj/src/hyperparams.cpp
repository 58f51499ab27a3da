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

#include "twigsim/hyperparams.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "twigsim/errors.hpp"
#include "twigsim/rng.hpp"

namespace twigsim::features {

std::string_view to_string(Sampler s) {
  switch (s) {
    case Sampler::kBasic: return "basic";
    case Sampler::kBernoulli: return "bernoulli";
    case Sampler::kPseudoTyped: return "pseudo_typed";
  }
  return "?";
}

std::string_view to_string(LossKind l) {
  switch (l) {
    case LossKind::kMarginRanking: return "margin_ranking";
    case LossKind::kBCEWithLogits: return "bce_with_logits";
    case LossKind::kCrossEntropy: return "cross_entropy";
  }
  return "?";
}

Sampler parse_sampler(std::string_view name) {
  for (Sampler s : kSamplers) {
    if (to_string(s) == name) return s;
  }
  throw UsageError("unknown negative sampler: " + std::string(name));
}

LossKind parse_loss(std::string_view name) {
  for (LossKind l : {LossKind::kMarginRanking, LossKind::kBCEWithLogits,
                     LossKind::kCrossEntropy}) {
    if (to_string(l) == name) return l;
  }
  throw UsageError("unknown loss function: " + std::string(name));
}

void to_json(nlohmann::json& j, const HyperparamConfig& c) {
  j = nlohmann::json{{"sampler", to_string(c.sampler)},
                     {"negatives_per_positive", c.negatives_per_positive},
                     {"loss", to_string(c.loss)},
                     {"margin", c.margin},
                     {"learning_rate", c.learning_rate},
                     {"dim", c.dim},
                     {"reg_coefficient", c.reg_coefficient}};
}

void from_json(const nlohmann::json& j, HyperparamConfig& c) {
  c.sampler = parse_sampler(j.at("sampler").get<std::string>());
  c.negatives_per_positive = j.at("negatives_per_positive").get<int>();
  c.loss = parse_loss(j.at("loss").get<std::string>());
  c.margin = j.at("margin").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.dim = j.at("dim").get<int>();
  c.reg_coefficient = j.at("reg_coefficient").get<double>();
}

std::string describe(const HyperparamConfig& c) {
  std::ostringstream out;
  out << to_string(c.sampler) << " npp=" << c.negatives_per_positive << ' '
      << to_string(c.loss);
  if (c.loss == LossKind::kMarginRanking) out << " margin=" << c.margin;
  out << " lr=" << c.learning_rate << " dim=" << c.dim
      << " reg=" << c.reg_coefficient;
  return out.str();
}

namespace {

struct LossVariant {
  LossKind loss;
  double margin;
};

constexpr std::array<LossVariant, 5> kLossVariants = {{
    {LossKind::kMarginRanking, 0.5},
    {LossKind::kMarginRanking, 1.0},
    {LossKind::kMarginRanking, 2.0},
    {LossKind::kBCEWithLogits, 0.0},
    {LossKind::kCrossEntropy, 0.0},
}};

std::size_t loss_family(LossKind l) {
  switch (l) {
    case LossKind::kMarginRanking: return 0;
    case LossKind::kBCEWithLogits: return 1;
    case LossKind::kCrossEntropy: return 2;
  }
  return 0;
}

std::size_t dim_slot(int dim) {
  for (std::size_t i = 0; i < kDims.size(); ++i) {
    if (kDims[i] == dim) return i;
  }
  return 0;
}

}  // namespace

std::vector<HyperparamConfig> expand_grid() {
  std::vector<HyperparamConfig> grid;
  grid.reserve(kFullGridSize);
  for (Sampler sampler : kSamplers) {
    for (int npp : kNegativesPerPositive) {
      for (const LossVariant& lv : kLossVariants) {
        for (double lr : kLearningRates) {
          for (int dim : kDims) {
            for (double reg : kRegCoefficients) {
              grid.push_back({sampler, npp, lv.loss, lv.margin, lr, dim, reg});
            }
          }
        }
      }
    }
  }
  return grid;
}

std::vector<std::size_t> stratified_subsample(std::size_t n,
                                              std::uint64_t seed) {
  const auto grid = expand_grid();
  if (n >= grid.size()) {
    std::vector<std::size_t> all(grid.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  constexpr std::size_t kCells = 9;  // 3 dims x 3 loss families
  std::array<std::vector<std::size_t>, kCells> cells;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cells[dim_slot(grid[i].dim) * 3 + loss_family(grid[i].loss)].push_back(i);
  }
  Rng rng(mix_seed(seed, 0x5eedULL));
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < kCells; ++c) {
    const std::size_t share = n / kCells + (c < n % kCells ? 1 : 0);
    auto& members = cells[c];
    shuffle(std::span<std::size_t>(members), rng);
    for (std::size_t k = 0; k < share && k < members.size(); ++k) {
      picked.push_back(members[k]);
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

HypFeatureVector hyperparam_features(const HyperparamConfig& c) {
  if (c.learning_rate <= 0.0 || c.reg_coefficient <= 0.0) {
    throw UsageError("learning rate and regularisation must be positive: " +
                     describe(c));
  }
  if (c.loss != LossKind::kMarginRanking && c.margin != 0.0) {
    throw UsageError("margin set on a margin-free loss: " + describe(c));
  }
  HypFeatureVector f{};
  switch (c.sampler) {
    case Sampler::kBasic: f[kSamplerBasic] = 1.0; break;
    case Sampler::kBernoulli: f[kSamplerBernoulli] = 1.0; break;
    case Sampler::kPseudoTyped: f[kSamplerPseudoTyped] = 1.0; break;
  }
  switch (c.loss) {
    case LossKind::kMarginRanking: f[kLossMarginRanking] = 1.0; break;
    case LossKind::kBCEWithLogits: f[kLossBCE] = 1.0; break;
    case LossKind::kCrossEntropy: f[kLossCrossEntropy] = 1.0; break;
  }
  f[kNpp] = static_cast<double>(c.negatives_per_positive);
  f[kMargin] = c.loss == LossKind::kMarginRanking ? c.margin : 0.0;
  f[kLogLearningRate] = std::log10(c.learning_rate);
  f[kDim] = static_cast<double>(c.dim);
  f[kLogReg] = std::log10(c.reg_coefficient);
  return f;
}

const std::array<std::string_view, kHypFeatureCount>& hyp_feature_names() {
  static const std::array<std::string_view, kHypFeatureCount> names = {
      "sampler_basic", "sampler_bernoulli", "sampler_pseudo_typed",
      "loss_margin_ranking", "loss_bce_with_logits", "loss_cross_entropy",
      "npp", "margin", "log10_lr", "dim", "log10_reg"};
  return names;
}

}  // namespace twigsim::features
