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
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "twigsim/features.hpp"
#include "twigsim/twig_net.hpp"

namespace twigsim::train {

inline constexpr std::size_t kHistogramBins = 30;
inline constexpr double kSmoothing = 1e-8;

// Equal-width bins over [lo, hi]; temperature controls sigmoid softness.
struct HistogramSpec {
  double lo = 1.0;
  double hi = 2.0;
  double temperature = 0.1;
  std::size_t bins = kHistogramBins;

  double bin_width() const { return (hi - lo) / static_cast<double>(bins); }
  double edge(std::size_t k) const {
    return lo + bin_width() * static_cast<double>(k);
  }

  // Ranks of a graph with num_entities entities: [1, |E|], temperature equal
  // to a tenth of a bin by default.
  static HistogramSpec for_ranks(std::size_t num_entities,
                                 double temperature_fraction = 0.1);
};

struct SoftHistogram {
  HistogramSpec spec;
  std::vector<double> raw;     // unnormalised sigmoid-difference masses
  double total = 0.0;          // sum of raw
  std::vector<double> masses;  // raw / (total + kSmoothing)
};

// Bin b with edges [l, u] receives sum_x sigmoid((x - l)/t) - sigmoid((x - u)/t).
SoftHistogram soft_histogram(std::span<const double> values,
                             const HistogramSpec& spec);

// Gradient of a scalar w.r.t. each value, given its gradient w.r.t. masses.
std::vector<double> soft_histogram_backward(std::span<const double> values,
                                            const SoftHistogram& hist,
                                            std::span<const double> d_masses);

// Counts per equal-width bin divided by the number of values. Values outside
// [lo, hi] are clamped into the edge bins; hi itself falls in the last bin.
std::vector<double> hard_histogram(std::span<const double> values,
                                   const HistogramSpec& spec);

// sum_b p_b ln((p_b + eps) / (q_b + eps)).
double kl_divergence(std::span<const double> p, std::span<const double> q);
// Partial derivatives of kl_divergence w.r.t. p and q.
void kl_divergence_gradient(std::span<const double> p,
                            std::span<const double> q, std::span<double> d_p,
                            std::span<double> d_q);

// Mean of reciprocals, and its gradient -1 / (n x_i^2).
double mrr(std::span<const double> ranks);
std::vector<double> mrr_gradient(std::span<const double> ranks);

enum class KlDirection { kTrueToPredicted, kPredictedToTrue };
std::string_view to_string(KlDirection d);
KlDirection parse_kl_direction(std::string_view name);

enum class Phase { kDistribution = 1, kDistributionAndMrr = 2 };

struct LossWeights {
  double kl = 1.0;
  double mse = 1.0;
  KlDirection direction = KlDirection::kTrueToPredicted;
};

struct BatchLoss {
  double value = 0.0;
  double kl = 0.0;
  double mse = 0.0;
  std::vector<double> d_predicted;
};

// Phase 1: KL between the soft histograms of true and predicted ranks.
// Phase 2: kl weight x KL + mse weight x (mrr(predicted) - mrr(true))^2.
// Throws UsageError when the two lists differ in length or are empty.
BatchLoss batch_loss(std::span<const double> predicted,
                     std::span<const double> truth, const HistogramSpec& spec,
                     Phase phase, const LossWeights& weights = {});

struct TrainProtocol {
  int phase1_epochs = 50;
  int phase2_epochs = 100;
  net::AdamConfig adam;
  LossWeights weights;
  double temperature_fraction = 0.1;

  nlohmann::json to_json() const;
  static TrainProtocol from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch = 0;  // 1-based, across both phases
  int phase = 1;
  double mean_kl = 0.0;
  double mean_mse = 0.0;
  double wall_time_s = 0.0;
};

struct TrainOutcome {
  net::TwigModel model;
  net::TwigModel phase1_model;
  std::vector<EpochLog> log;
};

// Two-phase training over the non-holdout batches of dataset. All layers train
// in phase 1; only the final integration layer trains in phase 2. Batches are
// shuffled each epoch with the seed; one Adam step per batch. Throws
// NumericalError naming the batch when the loss becomes non-finite.
TrainOutcome train_twig(const features::FeatureDataset& dataset,
                        const net::TwigLayout& layout,
                        const TrainProtocol& protocol, std::uint64_t seed,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

std::vector<bool> final_layer_only(const net::TwigModel& model);

// Predicted MRR of every batch (mean of 1 / predicted rank).
std::vector<double> predicted_batch_mrr(const net::TwigModel& model,
                                        const features::FeatureDataset& dataset,
                                        std::span<const std::size_t> batches);

void write_training_log(std::span<const EpochLog> log,
                        const std::string& path);

}  // namespace twigsim::train
