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

#include "twigsim/errors.hpp"
#include "twigsim/kge.hpp"

namespace twigsim::kge {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

LossValue kge_loss(features::LossKind kind,
                   std::span<const double> positive_scores,
                   std::span<const double> negative_scores, double margin) {
  const std::size_t b = positive_scores.size();
  LossValue out;
  out.grad_positive.assign(b, 0.0);
  out.grad_negative.assign(negative_scores.size(), 0.0);
  if (b == 0) return out;
  if (negative_scores.size() % b != 0) {
    throw UsageError("negative score count is not a multiple of positives");
  }
  const std::size_t npp = negative_scores.size() / b;

  switch (kind) {
    case features::LossKind::kMarginRanking: {
      if (npp == 0) return out;
      const double w = 1.0 / static_cast<double>(b * npp);
      double total = 0.0;
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < npp; ++j) {
          const double v =
              margin + negative_scores[i * npp + j] - positive_scores[i];
          if (v > 0.0) {
            total += v;
            out.grad_negative[i * npp + j] = w;
            out.grad_positive[i] -= w;
          }
        }
      }
      out.value = total * w;
      break;
    }
    case features::LossKind::kBCEWithLogits: {
      // Pooled mean over positive (label 1) and negative (label 0) logits.
      const double w = 1.0 / static_cast<double>(b * (npp + 1));
      double total = 0.0;
      for (std::size_t i = 0; i < b; ++i) {
        total += softplus(-positive_scores[i]);
        out.grad_positive[i] = -sigmoid(-positive_scores[i]) * w;
      }
      for (std::size_t k = 0; k < negative_scores.size(); ++k) {
        total += softplus(negative_scores[k]);
        out.grad_negative[k] = sigmoid(negative_scores[k]) * w;
      }
      out.value = total * w;
      break;
    }
    case features::LossKind::kCrossEntropy: {
      const double w = 1.0 / static_cast<double>(b);
      double total = 0.0;
      std::vector<double> probs(npp + 1);
      for (std::size_t i = 0; i < b; ++i) {
        double top = positive_scores[i];
        for (std::size_t j = 0; j < npp; ++j) {
          top = std::max(top, negative_scores[i * npp + j]);
        }
        double z = 0.0;
        probs[0] = std::exp(positive_scores[i] - top);
        z += probs[0];
        for (std::size_t j = 0; j < npp; ++j) {
          probs[j + 1] = std::exp(negative_scores[i * npp + j] - top);
          z += probs[j + 1];
        }
        total += -(positive_scores[i] - top) + std::log(z);
        out.grad_positive[i] = (probs[0] / z - 1.0) * w;
        for (std::size_t j = 0; j < npp; ++j) {
          out.grad_negative[i * npp + j] = probs[j + 1] / z * w;
        }
      }
      out.value = total * w;
      break;
    }
  }
  return out;
}

}  // namespace twigsim::kge
