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

#include "twigsim/twig_net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "twigsim/errors.hpp"
#include "twigsim/rng.hpp"

namespace twigsim::net {

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::ostringstream out;
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "->" : "") << v[i];
  return out.str();
}

void append_layers(std::vector<DenseLayer>& layers,
                   const std::vector<std::size_t>& sizes) {
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    DenseLayer l;
    l.fan_in = sizes[k];
    l.fan_out = sizes[k + 1];
    l.weights.assign(l.fan_in * l.fan_out, 0.0);
    l.bias.assign(l.fan_out, 0.0);
    layers.push_back(std::move(l));
  }
}

std::vector<DenseLayer> zero_layers(const TwigLayout& layout) {
  std::vector<DenseLayer> layers;
  append_layers(layers, layout.hyp_sizes);
  append_layers(layers, layout.struct_sizes);
  append_layers(layers, layout.integration_sizes);
  return layers;
}

// out[r][o] = b[o] + sum_i w(o, i) in[r][i], summed left to right over i.
void dense_forward(const DenseLayer& layer, const double* in, std::size_t rows,
                   double* out) {
  const std::size_t fi = layer.fan_in, fo = layer.fan_out;
  for (std::size_t r = 0; r < rows; ++r) {
    double* acc = out + r * fo;
    const double* x = in + r * fi;
    std::copy(layer.bias.begin(), layer.bias.end(), acc);
    for (std::size_t i = 0; i < fi; ++i) {
      const double xi = x[i];
      const double* col = layer.weights.data() + i * fo;
      for (std::size_t o = 0; o < fo; ++o) acc[o] += col[o] * xi;
    }
  }
}

// Accumulates parameter gradients over rows in order; writes dx when given.
void dense_backward(const DenseLayer& layer, const double* in,
                    const double* dz, std::size_t rows, DenseLayer& grad,
                    double* dx) {
  const std::size_t fi = layer.fan_in, fo = layer.fan_out;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* g = dz + r * fo;
    const double* x = in + r * fi;
    for (std::size_t o = 0; o < fo; ++o) grad.bias[o] += g[o];
    for (std::size_t i = 0; i < fi; ++i) {
      const double xi = x[i];
      double* gcol = grad.weights.data() + i * fo;
      const double* col = layer.weights.data() + i * fo;
      double sum = 0.0;
      for (std::size_t o = 0; o < fo; ++o) {
        gcol[o] += g[o] * xi;
        sum += col[o] * g[o];
      }
      if (dx) dx[r * fi + i] = sum;
    }
  }
}

}  // namespace

void TwigLayout::validate() const {
  auto fail = [&](const std::string& why) {
    throw UsageError("invalid TWIG layout (hyp " + join(hyp_sizes) +
                     ", struct " + join(struct_sizes) + ", integration " +
                     join(integration_sizes) + "): " + why);
  };
  if (hyp_sizes.empty() || struct_sizes.empty()) {
    fail("component size lists must name their input width");
  }
  if (integration_sizes.size() < 2) fail("integration needs at least one layer");
  for (const auto* sizes : {&hyp_sizes, &struct_sizes, &integration_sizes}) {
    for (std::size_t k = 1; k < sizes->size(); ++k) {
      if ((*sizes)[k] == 0) fail("layer width 0");
    }
  }
  if (integration_sizes.front() != hyp_sizes.back() + struct_sizes.back()) {
    fail("integration input must equal hyp output + struct output");
  }
  if (integration_sizes.back() != 1) fail("integration output must be 1");
}

std::size_t TwigLayout::param_count() const {
  std::size_t total = 0;
  for (const auto* sizes : {&hyp_sizes, &struct_sizes, &integration_sizes}) {
    for (std::size_t k = 0; k + 1 < sizes->size(); ++k) {
      total += ((*sizes)[k] + 1) * (*sizes)[k + 1];
    }
  }
  return total;
}

void to_json(nlohmann::json& j, const TwigLayout& l) {
  j = nlohmann::json{{"hyp", l.hyp_sizes},
                     {"struct", l.struct_sizes},
                     {"integration", l.integration_sizes}};
}

void from_json(const nlohmann::json& j, TwigLayout& l) {
  l.hyp_sizes = j.at("hyp").get<std::vector<std::size_t>>();
  l.struct_sizes = j.at("struct").get<std::vector<std::size_t>>();
  l.integration_sizes = j.at("integration").get<std::vector<std::size_t>>();
}

TwigModel::TwigModel(TwigLayout layout) : layout_(std::move(layout)) {
  layout_.validate();
  layers_ = zero_layers(layout_);
}

Component TwigModel::component_of(std::size_t layer) const {
  if (layer < num_hyp_layers()) return Component::kHyp;
  if (layer < num_hyp_layers() + num_struct_layers()) return Component::kStruct;
  return Component::kIntegration;
}

std::size_t TwigModel::param_count() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += l.param_count();
  return total;
}

bool TwigModel::all_finite() const {
  for (const auto& l : layers_) {
    for (double v : l.weights) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : l.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<double> TwigModel::flatten() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void TwigModel::unflatten(std::span<const double> params) {
  if (params.size() != param_count()) {
    throw DataError("parameter vector has " + std::to_string(params.size()) +
                    " values, layout needs " + std::to_string(param_count()));
  }
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (double& v : l.weights) v = params[k++];
    for (double& v : l.bias) v = params[k++];
  }
}

TwigModel init_model(const TwigLayout& layout, std::uint64_t seed) {
  TwigModel model(layout);
  Rng rng(mix_seed(seed, 0x54574947ULL));
  for (auto& l : model.layers()) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(l.fan_in + l.fan_out));
    for (double& v : l.weights) v = uniform_real(rng, -bound, bound);
  }
  return model;
}

void forward(const TwigModel& model, std::span<const double> rows,
             ForwardCache& cache) {
  const TwigLayout& layout = model.layout();
  const std::size_t width = layout.input_width();
  if (width == 0 || rows.size() % width != 0) {
    throw UsageError("input has " + std::to_string(rows.size()) +
                     " values, not a multiple of the row width " +
                     std::to_string(width));
  }
  const std::size_t n = rows.size() / width;
  const auto& layers = model.layers();
  cache.rows = n;
  cache.input.resize(layers.size());
  cache.pre.resize(layers.size());
  cache.post.resize(layers.size());

  const std::size_t si = layout.struct_input();
  const std::size_t hi = layout.hyp_input();
  const std::size_t nh = model.num_hyp_layers();
  const std::size_t ns = model.num_struct_layers();
  // A component without layers passes its raw columns straight through.
  std::vector<double>& hyp_in = nh > 0 ? cache.input[0] : cache.hyp_raw;
  std::vector<double>& struct_in = ns > 0 ? cache.input[nh] : cache.struct_raw;
  hyp_in.resize(n * hi);
  struct_in.resize(n * si);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(rows.data() + r * width, si, struct_in.data() + r * si);
    std::copy_n(rows.data() + r * width + si, hi, hyp_in.data() + r * hi);
  }

  // Runs layers [first, last), ReLU after each; input[first] must be filled.
  auto run = [&](std::size_t first, std::size_t last) {
    for (std::size_t l = first; l < last; ++l) {
      const DenseLayer& layer = layers[l];
      if (l > first) cache.input[l] = cache.post[l - 1];
      cache.pre[l].resize(n * layer.fan_out);
      dense_forward(layer, cache.input[l].data(), n, cache.pre[l].data());
      cache.post[l].resize(n * layer.fan_out);
      for (std::size_t k = 0; k < cache.pre[l].size(); ++k) {
        const double v = cache.pre[l][k];
        cache.post[l][k] = v > 0.0 ? v : 0.0;
      }
    }
  };

  run(0, nh);
  run(nh, nh + ns);
  const std::size_t ho = layout.hyp_sizes.back();
  const std::size_t so = layout.struct_sizes.back();
  const std::vector<double>& hyp_out = nh > 0 ? cache.post[nh - 1] : hyp_in;
  const std::vector<double>& struct_out =
      ns > 0 ? cache.post[nh + ns - 1] : struct_in;
  std::vector<double>& joined = cache.input[nh + ns];
  joined.resize(n * (ho + so));
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(hyp_out.data() + r * ho, ho, joined.data() + r * (ho + so));
    std::copy_n(struct_out.data() + r * so, so,
                joined.data() + r * (ho + so) + ho);
  }
  run(nh + ns, layers.size());
  // The final post-activation is ReLU(z); the output adds 1.
  const std::vector<double>& z = cache.post.back();
  cache.outputs.resize(n);
  for (std::size_t r = 0; r < n; ++r) cache.outputs[r] = z[r] + 1.0;
}

ForwardCache forward(const TwigModel& model, std::span<const double> rows) {
  ForwardCache cache;
  forward(model, rows, cache);
  return cache;
}

std::vector<double> predict(const TwigModel& model,
                            std::span<const double> rows) {
  return forward(model, rows).outputs;
}

Gradients Gradients::zeros_like(const TwigModel& model) {
  return {zero_layers(model.layout())};
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void backward(const TwigModel& model, const ForwardCache& cache,
              std::span<const double> upstream, Gradients& grads,
              BackwardScratch& scratch) {
  const auto& layers = model.layers();
  const std::size_t n = cache.rows;
  if (upstream.size() != n) {
    throw UsageError("upstream gradient size does not match the batch");
  }
  if (grads.layers.size() != layers.size()) {
    grads = Gradients::zeros_like(model);
  } else {
    for (auto& g : grads.layers) {
      std::fill(g.weights.begin(), g.weights.end(), 0.0);
      std::fill(g.bias.begin(), g.bias.end(), 0.0);
    }
  }
  std::vector<double>& dpost = scratch.a;
  std::vector<double>& dx = scratch.b;

  // Walks layers [first, last) backwards; dpost holds the gradient w.r.t.
  // the post-activation of layer last-1 and ends holding the gradient w.r.t.
  // the input of layer first when need_input is set.
  auto run_back = [&](std::size_t first, std::size_t last, bool need_input) {
    for (std::size_t l = last; l-- > first;) {
      const DenseLayer& layer = layers[l];
      for (std::size_t k = 0; k < dpost.size(); ++k) {
        if (!(cache.pre[l][k] > 0.0)) dpost[k] = 0.0;
      }
      const bool want_dx = l > first || need_input;
      dx.resize(want_dx ? n * layer.fan_in : 0);
      dense_backward(layer, cache.input[l].data(), dpost.data(), n,
                     grads.layers[l], want_dx ? dx.data() : nullptr);
      std::swap(dpost, dx);
    }
  };

  const std::size_t nh = model.num_hyp_layers();
  const std::size_t ns = model.num_struct_layers();
  dpost.assign(upstream.begin(), upstream.end());
  run_back(nh + ns, layers.size(), nh + ns > 0);
  if (nh + ns == 0) return;

  const std::size_t ho = model.layout().hyp_sizes.back();
  const std::size_t so = model.layout().struct_sizes.back();
  std::vector<double>& dstruct = scratch.c;
  dstruct.resize(n * so);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(dpost.data() + r * (ho + so) + ho, so, dstruct.data() + r * so);
  }
  if (nh > 0) {
    // Compact the hyp half of the joined gradient in place.
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(dpost.data() + r * (ho + so), ho, dpost.data() + r * ho);
    }
    dpost.resize(n * ho);
    run_back(0, nh, false);
  }
  if (ns > 0) {
    std::swap(dpost, dstruct);
    run_back(nh, nh + ns, false);
  }
}

Gradients backward(const TwigModel& model, const ForwardCache& cache,
                   std::span<const double> upstream) {
  Gradients grads;
  BackwardScratch scratch;
  backward(model, cache, upstream, grads, scratch);
  return grads;
}

AdamState AdamState::zeros_like(const TwigModel& model) {
  AdamState s;
  s.m = zero_layers(model.layout());
  s.v = zero_layers(model.layout());
  return s;
}

void adam_step(TwigModel& model, const Gradients& grads, AdamState& state,
               const AdamConfig& config, const std::vector<bool>& trainable) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      p[i] -= config.learning_rate * (m[i] / c1) /
              (std::sqrt(v[i] / c2) + config.epsilon);
    }
  };
  auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!trainable.empty() && !trainable[l]) continue;
    update(layers[l].weights, grads.layers[l].weights, state.m[l].weights,
           state.v[l].weights);
    update(layers[l].bias, grads.layers[l].bias, state.m[l].bias,
           state.v[l].bias);
  }
}

}  // namespace twigsim::net
