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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twigsim/errors.hpp"
#include "twigsim/twig_train.hpp"

namespace twigsim::train {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// sigmoid(a) - sigmoid(c) for a >= c. Right of both edges the two sigmoids are
// close to 1, so the difference is taken between their complements instead.
double sigmoid_gap(double a, double c) {
  if (c >= 0.0) return sigmoid(-c) - sigmoid(-a);
  return sigmoid(a) - sigmoid(c);
}

// sigmoid'(z) without forming 1 - sigmoid(z).
double sigmoid_slope(double z) { return sigmoid(z) * sigmoid(-z); }

// Ascending order of values. Aggregates are summed in this order so they do
// not depend on the order the values arrive in.
std::vector<std::size_t> ascending_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  return order;
}

}  // namespace

HistogramSpec HistogramSpec::for_ranks(std::size_t num_entities,
                                       double temperature_fraction) {
  HistogramSpec spec;
  spec.lo = 1.0;
  spec.hi = std::max(2.0, static_cast<double>(num_entities));
  spec.bins = kHistogramBins;
  spec.temperature = spec.bin_width() * temperature_fraction;
  return spec;
}

SoftHistogram soft_histogram(std::span<const double> values,
                             const HistogramSpec& spec) {
  if (!(spec.hi > spec.lo) || !(spec.temperature > 0.0) || spec.bins == 0) {
    throw UsageError("soft histogram needs hi > lo, temperature > 0, bins > 0");
  }
  SoftHistogram h;
  h.spec = spec;
  h.raw.assign(spec.bins, 0.0);
  std::vector<double> edges(spec.bins + 1);
  for (std::size_t k = 0; k < spec.bins; ++k) edges[k] = spec.edge(k);
  edges[spec.bins] = spec.hi;
  std::vector<double> s(spec.bins + 1);
  for (std::size_t idx : ascending_order(values)) {
    const double x = values[idx];
    for (std::size_t k = 0; k <= spec.bins; ++k) {
      s[k] = (x - edges[k]) / spec.temperature;
    }
    for (std::size_t b = 0; b < spec.bins; ++b) {
      h.raw[b] += sigmoid_gap(s[b], s[b + 1]);
    }
  }
  h.total = 0.0;
  for (double m : h.raw) h.total += m;
  h.masses.resize(spec.bins);
  for (std::size_t b = 0; b < spec.bins; ++b) {
    h.masses[b] = h.raw[b] / (h.total + kSmoothing);
  }
  return h;
}

std::vector<double> soft_histogram_backward(std::span<const double> values,
                                            const SoftHistogram& hist,
                                            std::span<const double> d_masses) {
  const HistogramSpec& spec = hist.spec;
  const double denom = hist.total + kSmoothing;
  // dq_b/dm_c = [b == c] / denom - m_b / denom^2
  double cross = 0.0;
  for (std::size_t b = 0; b < spec.bins; ++b) {
    cross += d_masses[b] * hist.raw[b];
  }
  std::vector<double> d_raw(spec.bins);
  for (std::size_t b = 0; b < spec.bins; ++b) {
    d_raw[b] = d_masses[b] / denom - cross / (denom * denom);
  }
  std::vector<double> edges(spec.bins + 1);
  for (std::size_t k = 0; k < spec.bins; ++k) edges[k] = spec.edge(k);
  edges[spec.bins] = spec.hi;
  // d/dx of sigmoid((x - e)/t) is s (1 - s) / t. Each edge k is the lower
  // edge of bin k and the upper edge of bin k-1.
  std::vector<double> d_edge(spec.bins + 1, 0.0);
  for (std::size_t k = 0; k <= spec.bins; ++k) {
    const double lower_of = k < spec.bins ? d_raw[k] : 0.0;
    const double upper_of = k > 0 ? d_raw[k - 1] : 0.0;
    d_edge[k] = lower_of - upper_of;
  }
  std::vector<double> d_values(values.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double g = 0.0;
    for (std::size_t k = 0; k <= spec.bins; ++k) {
      g += d_edge[k] * sigmoid_slope((values[i] - edges[k]) / spec.temperature);
    }
    d_values[i] = g / spec.temperature;
  }
  return d_values;
}

std::vector<double> hard_histogram(std::span<const double> values,
                                   const HistogramSpec& spec) {
  std::vector<double> counts(spec.bins, 0.0);
  if (values.empty()) return counts;
  const double w = spec.bin_width();
  for (double x : values) {
    const double pos = std::floor((x - spec.lo) / w);
    const auto b = static_cast<std::size_t>(
        std::clamp(pos, 0.0, static_cast<double>(spec.bins - 1)));
    counts[b] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(values.size());
  return counts;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw UsageError("KL divergence needs histograms with the same bins");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < p.size(); ++b) {
    total += p[b] * std::log((p[b] + kSmoothing) / (q[b] + kSmoothing));
  }
  return total;
}

void kl_divergence_gradient(std::span<const double> p,
                            std::span<const double> q, std::span<double> d_p,
                            std::span<double> d_q) {
  for (std::size_t b = 0; b < p.size(); ++b) {
    d_p[b] = std::log((p[b] + kSmoothing) / (q[b] + kSmoothing)) +
             p[b] / (p[b] + kSmoothing);
    d_q[b] = -p[b] / (q[b] + kSmoothing);
  }
}

double mrr(std::span<const double> ranks) {
  if (ranks.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t idx : ascending_order(ranks)) total += 1.0 / ranks[idx];
  return total / static_cast<double>(ranks.size());
}

std::vector<double> mrr_gradient(std::span<const double> ranks) {
  std::vector<double> g(ranks.size());
  const double n = static_cast<double>(ranks.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    g[i] = -1.0 / (n * ranks[i] * ranks[i]);
  }
  return g;
}

std::string_view to_string(KlDirection d) {
  return d == KlDirection::kTrueToPredicted ? "true_to_predicted"
                                            : "predicted_to_true";
}

KlDirection parse_kl_direction(std::string_view name) {
  if (name == "true_to_predicted") return KlDirection::kTrueToPredicted;
  if (name == "predicted_to_true") return KlDirection::kPredictedToTrue;
  throw UsageError("unknown KL direction: " + std::string(name));
}

BatchLoss batch_loss(std::span<const double> predicted,
                     std::span<const double> truth, const HistogramSpec& spec,
                     Phase phase, const LossWeights& weights) {
  if (predicted.empty() || predicted.size() != truth.size()) {
    throw UsageError("batch loss needs a full batch: " +
                     std::to_string(predicted.size()) + " predictions for " +
                     std::to_string(truth.size()) + " targets");
  }
  const SoftHistogram h_true = soft_histogram(truth, spec);
  const SoftHistogram h_pred = soft_histogram(predicted, spec);
  std::vector<double> d_p(spec.bins), d_q(spec.bins);
  BatchLoss out;
  std::span<const double> d_pred_masses;
  if (weights.direction == KlDirection::kTrueToPredicted) {
    out.kl = kl_divergence(h_true.masses, h_pred.masses);
    kl_divergence_gradient(h_true.masses, h_pred.masses, d_p, d_q);
    d_pred_masses = d_q;
  } else {
    out.kl = kl_divergence(h_pred.masses, h_true.masses);
    kl_divergence_gradient(h_pred.masses, h_true.masses, d_p, d_q);
    d_pred_masses = d_p;
  }
  const double mrr_gap = mrr(predicted) - mrr(truth);
  out.mse = mrr_gap * mrr_gap;

  const double kl_w = phase == Phase::kDistribution ? 1.0 : weights.kl;
  std::vector<double> scaled(spec.bins);
  for (std::size_t b = 0; b < spec.bins; ++b) {
    scaled[b] = kl_w * d_pred_masses[b];
  }
  out.d_predicted = soft_histogram_backward(predicted, h_pred, scaled);
  out.value = kl_w * out.kl;
  if (phase == Phase::kDistributionAndMrr) {
    out.value += weights.mse * out.mse;
    const auto g = mrr_gradient(predicted);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      out.d_predicted[i] += weights.mse * 2.0 * mrr_gap * g[i];
    }
  }
  return out;
}

}  // namespace twigsim::train
