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
#include <span>
#include <vector>

#include <json.hpp>

#include "twigsim/features.hpp"

namespace twigsim::net {

// Widths of the three dense components. hyp_sizes and struct_sizes start at
// their input widths; integration_sizes starts at the sum of the two
// component outputs and ends at 1.
struct TwigLayout {
  std::vector<std::size_t> hyp_sizes{11, 8};
  std::vector<std::size_t> struct_sizes{23, 16, 16};
  std::vector<std::size_t> integration_sizes{24, 35, 26, 1};

  static TwigLayout standard() { return {}; }

  // Throws UsageError describing the first violated constraint.
  void validate() const;
  std::size_t param_count() const;

  std::size_t hyp_input() const { return hyp_sizes.front(); }
  std::size_t struct_input() const { return struct_sizes.front(); }
  std::size_t input_width() const { return hyp_input() + struct_input(); }

  friend bool operator==(const TwigLayout&, const TwigLayout&) = default;
};

inline constexpr std::size_t kStandardParamCount = 2590;

void to_json(nlohmann::json& j, const TwigLayout& l);
void from_json(const nlohmann::json& j, TwigLayout& l);

// weights is fan_out x fan_in, column-major: w(o, i) = weights[o + i * fan_out].
struct DenseLayer {
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& w(std::size_t o, std::size_t i) { return weights[o + i * fan_out]; }
  double w(std::size_t o, std::size_t i) const {
    return weights[o + i * fan_out];
  }
  std::size_t param_count() const { return weights.size() + bias.size(); }
};

enum class Component { kHyp, kStruct, kIntegration };

// Layers in order: hyp component, struct component, integration component.
// Row inputs use the dataset column order (structural columns first, then
// hyperparameter columns).
class TwigModel {
 public:
  TwigModel() = default;
  explicit TwigModel(TwigLayout layout);  // all-zero parameters

  const TwigLayout& layout() const { return layout_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t num_hyp_layers() const { return layout_.hyp_sizes.size() - 1; }
  std::size_t num_struct_layers() const {
    return layout_.struct_sizes.size() - 1;
  }
  Component component_of(std::size_t layer) const;
  std::size_t final_layer() const { return layers_.size() - 1; }

  std::size_t param_count() const;
  bool all_finite() const;

  // Flattened parameters: per layer, weights (column-major) then bias.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

  features::Standardizer standardizer;

 private:
  TwigLayout layout_;
  std::vector<DenseLayer> layers_;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
TwigModel init_model(const TwigLayout& layout, std::uint64_t seed);

// Activations of every layer for a batch, kept for the backward pass.
struct ForwardCache {
  std::size_t rows = 0;
  // Per layer l: input (rows x fan_in), pre-activation and post-activation
  // (rows x fan_out).
  std::vector<std::vector<double>> input;
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
  std::vector<double> outputs;  // ReLU(z) + 1 of the final layer
  std::vector<double> hyp_raw, struct_raw;  // only for layer-less components
};

// rows: standardised, row-major, layout().input_width() columns.
// Throws UsageError on a width mismatch.
ForwardCache forward(const TwigModel& model, std::span<const double> rows);
// Same, reusing the buffers already held by cache.
void forward(const TwigModel& model, std::span<const double> rows,
             ForwardCache& cache);
std::vector<double> predict(const TwigModel& model,
                            std::span<const double> rows);

struct Gradients {
  std::vector<DenseLayer> layers;  // same shapes as the model

  static Gradients zeros_like(const TwigModel& model);
  std::vector<double> flatten() const;
};

// Exact gradient of sum_i upstream[i] * y_i. ReLU'(0) is taken as 0.
Gradients backward(const TwigModel& model, const ForwardCache& cache,
                   std::span<const double> upstream);

struct BackwardScratch {
  std::vector<double> a, b, c;
};
// Allocation-free variant for training loops; grads is overwritten.
void backward(const TwigModel& model, const ForwardCache& cache,
              std::span<const double> upstream, Gradients& grads,
              BackwardScratch& scratch);

struct AdamConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<DenseLayer> m, v;
  long step = 0;

  static AdamState zeros_like(const TwigModel& model);
};

// One bias-corrected Adam update. Layers with trainable[l] == false are left
// untouched, moments included. An empty mask trains every layer.
void adam_step(TwigModel& model, const Gradients& grads, AdamState& state,
               const AdamConfig& config, const std::vector<bool>& trainable = {});

}  // namespace twigsim::net
