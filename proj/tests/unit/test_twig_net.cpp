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

#include <doctest.h>

#include "twigsim/checkpoint.hpp"
#include "twigsim/errors.hpp"
#include "twigsim/rng.hpp"
#include "twigsim/twig_net.hpp"
#include "unit/support.hpp"

using namespace twigsim;
using namespace twigsim::net;

namespace {

TwigLayout random_layout(Rng& rng) {
  TwigLayout l;
  l.hyp_sizes = {11};
  l.struct_sizes = {23};
  const std::size_t hyp_depth = uniform_index(rng, 3);
  const std::size_t struct_depth = uniform_index(rng, 3);
  for (std::size_t i = 0; i < hyp_depth; ++i) l.hyp_sizes.push_back(1 + uniform_index(rng, 8));
  for (std::size_t i = 0; i < struct_depth; ++i) l.struct_sizes.push_back(1 + uniform_index(rng, 12));
  l.integration_sizes = {l.hyp_sizes.back() + l.struct_sizes.back()};
  const std::size_t int_depth = uniform_index(rng, 3);
  for (std::size_t i = 0; i < int_depth; ++i) l.integration_sizes.push_back(1 + uniform_index(rng, 10));
  l.integration_sizes.push_back(1);
  return l;
}

std::vector<double> random_rows(Rng& rng, std::size_t n, std::size_t width) {
  std::vector<double> rows(n * width);
  for (double& v : rows) v = standard_normal(rng);
  return rows;
}

double weighted_output(const TwigModel& m, std::span<const double> rows,
                       std::span<const double> g) {
  const auto y = predict(m, rows);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += g[i] * y[i];
  return s;
}

}  // namespace

TEST_CASE("default layout has 2590 parameters") {
  const TwigLayout l = TwigLayout::standard();
  CHECK(l.param_count() == 2590);
  CHECK(kStandardParamCount == 2590);
  // (fan_in + 1) * fan_out per layer
  CHECK(12 * 8 + 24 * 16 + 17 * 16 + 25 * 35 + 36 * 26 + 27 * 1 == 2590);
  const auto m = init_model(l, 1);
  CHECK(m.param_count() == 2590);
  CHECK(m.flatten().size() == 2590);
  CHECK(m.layers().size() == 6);
  CHECK(m.component_of(0) == Component::kHyp);
  CHECK(m.component_of(1) == Component::kStruct);
  CHECK(m.component_of(3) == Component::kIntegration);
  CHECK(m.final_layer() == 5);
  CHECK(m.layers()[5].fan_in == 26);
}

TEST_CASE("layout validation") {
  TwigLayout l;
  l.integration_sizes.back() = 2;
  CHECK_THROWS_AS(l.validate(), UsageError);
  CHECK_THROWS_AS(init_model(l, 1), UsageError);
  TwigLayout m;
  m.integration_sizes.front() = 25;
  CHECK_THROWS_AS(m.validate(), UsageError);
  TwigLayout z;
  z.struct_sizes = {23, 0, 16};
  CHECK_THROWS_AS(z.validate(), UsageError);
}

TEST_CASE("init is seeded Glorot uniform with zero biases") {
  const auto a = init_model(TwigLayout::standard(), 9);
  const auto b = init_model(TwigLayout::standard(), 9);
  const auto c = init_model(TwigLayout::standard(), 10);
  CHECK(a.flatten() == b.flatten());
  CHECK(a.flatten() != c.flatten());
  for (const auto& layer : a.layers()) {
    const double bound = std::sqrt(6.0 / double(layer.fan_in + layer.fan_out));
    for (double w : layer.weights) CHECK(std::abs(w) <= bound);
    for (double v : layer.bias) CHECK(v == 0.0);
  }
}

TEST_CASE("forward") {
  Rng rng(2);
  const auto rows = random_rows(rng, 7, 34);
  const TwigModel zero(TwigLayout::standard());
  for (double y : predict(zero, rows)) CHECK(y == 1.0);

  // one integration weight w=2, b=3, input 1 -> ReLU(5) + 1
  TwigLayout tiny;
  tiny.hyp_sizes = {0};
  tiny.struct_sizes = {1};
  tiny.integration_sizes = {1, 1};
  TwigModel m(tiny);
  REQUIRE(m.layers().size() == 1);
  m.layers()[0].w(0, 0) = 2.0;
  m.layers()[0].bias[0] = 3.0;
  const double in[] = {1.0};
  CHECK(predict(m, in)[0] == 6.0);
  const double neg[] = {-4.0};
  CHECK(predict(m, neg)[0] == 1.0);

  const auto model = init_model(TwigLayout::standard(), 3);
  const auto many = random_rows(rng, 10000, 34);
  const auto y = predict(model, many);
  CHECK(*std::min_element(y.begin(), y.end()) >= 1.0);
  CHECK(predict(model, many) == y);
  const std::vector<double> bad(33);
  CHECK_THROWS_AS(forward(model, bad), UsageError);
}

TEST_CASE("hand-computed two-layer forward") {
  // struct 2 -> 1, hyp 1 -> 1, integration 2 -> 1; rows are [struct, hyp]
  TwigLayout l;
  l.hyp_sizes = {1, 1};
  l.struct_sizes = {2, 1};
  l.integration_sizes = {2, 1};
  TwigModel m(l);
  m.layers()[0].w(0, 0) = -1.0;  // hyp: ReLU(-h)
  m.layers()[1].w(0, 0) = 1.0;   // struct: ReLU(s0 - 2 s1 + 0.5)
  m.layers()[1].w(0, 1) = -2.0;
  m.layers()[1].bias[0] = 0.5;
  m.layers()[2].w(0, 0) = 3.0;   // integration over [hyp_out, struct_out]
  m.layers()[2].w(0, 1) = 0.25;
  m.layers()[2].bias[0] = -1.0;
  const double row[] = {4.0, 1.0, -2.0};
  // hyp_out = 2, struct_out = 2.5, z = 6 + 0.625 - 1, y = z + 1
  CHECK(predict(m, row)[0] == doctest::Approx(5.625 + 1.0));
}

TEST_CASE("backward matches central differences on random layouts") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const TwigLayout l = random_layout(rng);
    auto model = init_model(l, 100 + trial);
    for (auto& layer : model.layers()) {
      for (double& b : layer.bias) b = 0.1 * standard_normal(rng);
    }
    const std::size_t n = 16;
    const auto rows = random_rows(rng, n, l.input_width());
    std::vector<double> g(n);
    for (double& v : g) v = standard_normal(rng);
    const auto grads = backward(model, forward(model, rows), g).flatten();
    const auto params = model.flatten();
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto up = params, dn = params;
      up[i] += h;
      dn[i] -= h;
      TwigModel mu = model, md = model;
      mu.unflatten(up);
      md.unflatten(dn);
      const double fd = (weighted_output(mu, rows, g) - weighted_output(md, rows, g)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grads[i]) / std::max({std::abs(fd), std::abs(grads[i]), 1e-4}));
    }
    CHECK_MESSAGE(worst < 1e-4, "trial ", trial, " worst ", worst);
  }
}

TEST_CASE("reused buffers give the same results as fresh ones") {
  Rng rng(808);
  for (int trial = 0; trial < 10; ++trial) {
    const TwigLayout l = random_layout(rng);
    const TwigModel m = init_model(l, 50 + trial);
    ForwardCache cache;
    Gradients grads;
    BackwardScratch scratch;
    for (std::size_t n : {7u, 3u, 12u}) {
      const auto rows = random_rows(rng, n, l.input_width());
      const auto up = random_rows(rng, n, 1);
      forward(m, rows, cache);
      backward(m, cache, up, grads, scratch);
      const ForwardCache fresh = forward(m, rows);
      CHECK(cache.outputs == fresh.outputs);
      CHECK(grads.flatten() == backward(m, fresh, up).flatten());
    }
  }
}

TEST_CASE("zero upstream and dead rows give zero gradients") {
  Rng rng(5);
  const auto model = init_model(TwigLayout::standard(), 4);
  const auto rows = random_rows(rng, 8, 34);
  const std::vector<double> zero(8, 0.0);
  for (double v : backward(model, forward(model, rows), zero).flatten()) CHECK(v == 0.0);

  TwigModel dead = model;
  auto& last = dead.layers()[dead.final_layer()];
  std::fill(last.weights.begin(), last.weights.end(), 0.0);
  last.bias[0] = -1.0;  // final pre-activation negative for every row
  const std::vector<double> ones(8, 1.0);
  for (double v : backward(dead, forward(dead, rows), ones).flatten()) CHECK(v == 0.0);
}

TEST_CASE("Adam") {
  const TwigLayout l = TwigLayout::standard();
  auto model = init_model(l, 1);
  const auto before = model.flatten();
  AdamConfig cfg;
  auto state = AdamState::zeros_like(model);
  adam_step(model, Gradients::zeros_like(model), state, cfg);
  CHECK(model.flatten() == before);

  Gradients ones = Gradients::zeros_like(model);
  for (auto& layer : ones.layers) {
    std::fill(layer.weights.begin(), layer.weights.end(), 1.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 1.0);
  }
  auto frozen = init_model(l, 1);
  auto s2 = AdamState::zeros_like(frozen);
  adam_step(frozen, ones, s2, cfg, std::vector<bool>(frozen.layers().size(), false));
  CHECK(frozen.flatten() == before);

  auto fresh = init_model(l, 1);
  auto s3 = AdamState::zeros_like(fresh);
  std::vector<bool> mask(fresh.layers().size(), true);
  mask[0] = false;
  adam_step(fresh, ones, s3, cfg, mask);
  const auto after = fresh.flatten();
  const std::size_t first = fresh.layers()[0].param_count();
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (i < first) {
      CHECK(after[i] == before[i]);
    } else {
      CHECK(after[i] - before[i] == doctest::Approx(-cfg.learning_rate).epsilon(1e-6));
    }
  }
}

TEST_CASE("flatten order and checkpoint round trip") {
  auto model = init_model(TwigLayout::standard(), 12);
  const auto& l0 = model.layers()[0];
  const auto flat = model.flatten();
  // column-major weights of the first layer, then its bias
  CHECK(flat[1] == l0.w(1, 0));
  CHECK(flat[l0.fan_out] == l0.w(0, 1));
  model.standardizer.mean[3] = 1.5;
  const auto dir = testing::scratch_dir("ckpt");
  write_checkpoint(dir / "m.json", model, {{"phase", 2}});
  const auto back = read_checkpoint(dir / "m.json");
  CHECK(back.model.flatten() == flat);
  CHECK(back.model.layout() == model.layout());
  CHECK(back.model.standardizer.mean[3] == 1.5);
  CHECK(back.metadata["phase"] == 2);
  auto j = checkpoint_json(model, {});
  j["param_count"] = 7;
  CHECK_THROWS_AS(checkpoint_from_json(j), DataError);
}
