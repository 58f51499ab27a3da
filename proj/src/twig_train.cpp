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

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "twigsim/errors.hpp"
#include "twigsim/rng.hpp"
#include "twigsim/twig_train.hpp"

namespace twigsim::train {

nlohmann::json TrainProtocol::to_json() const {
  return {{"phase1_epochs", phase1_epochs},
          {"phase2_epochs", phase2_epochs},
          {"learning_rate", adam.learning_rate},
          {"adam_beta1", adam.beta1},
          {"adam_beta2", adam.beta2},
          {"adam_epsilon", adam.epsilon},
          {"kl_weight", weights.kl},
          {"mse_weight", weights.mse},
          {"kl_direction", to_string(weights.direction)},
          {"temperature_fraction", temperature_fraction}};
}

TrainProtocol TrainProtocol::from_json(const nlohmann::json& j) {
  TrainProtocol p;
  p.phase1_epochs = j.value("phase1_epochs", p.phase1_epochs);
  p.phase2_epochs = j.value("phase2_epochs", p.phase2_epochs);
  p.adam.learning_rate = j.value("learning_rate", p.adam.learning_rate);
  p.adam.beta1 = j.value("adam_beta1", p.adam.beta1);
  p.adam.beta2 = j.value("adam_beta2", p.adam.beta2);
  p.adam.epsilon = j.value("adam_epsilon", p.adam.epsilon);
  p.weights.kl = j.value("kl_weight", p.weights.kl);
  p.weights.mse = j.value("mse_weight", p.weights.mse);
  if (j.contains("kl_direction")) {
    p.weights.direction =
        parse_kl_direction(j.at("kl_direction").get<std::string>());
  }
  p.temperature_fraction =
      j.value("temperature_fraction", p.temperature_fraction);
  if (p.phase1_epochs < 0 || p.phase2_epochs < 0) {
    throw UsageError("epoch counts must be non-negative");
  }
  return p;
}

std::vector<bool> final_layer_only(const net::TwigModel& model) {
  std::vector<bool> mask(model.layers().size(), false);
  mask[model.final_layer()] = true;
  return mask;
}

namespace {

// Standardised structural block shared by every batch, plus a per-batch
// standardised hyperparameter vector spliced into each row.
class RowBuilder {
 public:
  explicit RowBuilder(const features::FeatureDataset& ds) : ds_(ds) {
    const std::size_t q = ds.num_queries();
    struct_block_.resize(q * features::kStructFeatureCount);
    for (std::size_t i = 0; i < q; ++i) {
      for (std::size_t c = 0; c < features::kStructFeatureCount; ++c) {
        const double v = ds.query_features[i * features::kStructFeatureCount + c];
        struct_block_[i * features::kStructFeatureCount + c] =
            (v - ds.standardizer.mean[c]) / ds.standardizer.scale[c];
      }
    }
  }

  void build(const features::Batch& b, std::vector<double>& rows) const {
    using features::kRowWidth;
    using features::kStructFeatureCount;
    const std::size_t q = ds_.num_queries();
    std::array<double, features::kHypFeatureCount> hyp{};
    for (std::size_t c = 0; c < hyp.size(); ++c) {
      const std::size_t col = kStructFeatureCount + c;
      hyp[c] = (b.hyp[c] - ds_.standardizer.mean[col]) /
               ds_.standardizer.scale[col];
    }
    rows.resize(q * kRowWidth);
    for (std::size_t i = 0; i < q; ++i) {
      double* row = rows.data() + i * kRowWidth;
      std::copy_n(struct_block_.data() + i * kStructFeatureCount,
                  kStructFeatureCount, row);
      std::copy(hyp.begin(), hyp.end(), row + kStructFeatureCount);
    }
  }

 private:
  const features::FeatureDataset& ds_;
  std::vector<double> struct_block_;
};

}  // namespace

TrainOutcome train_twig(const features::FeatureDataset& dataset,
                        const net::TwigLayout& layout,
                        const TrainProtocol& protocol, std::uint64_t seed,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  layout.validate();
  if (layout.input_width() != features::kRowWidth) {
    throw UsageError("layout input width " +
                     std::to_string(layout.input_width()) +
                     " does not match the dataset row width");
  }
  std::vector<std::size_t> training;
  for (std::size_t i = 0; i < dataset.batches.size(); ++i) {
    if (!dataset.batches[i].holdout) training.push_back(i);
  }
  if (training.empty() && protocol.phase1_epochs + protocol.phase2_epochs > 0) {
    throw DataError("dataset has no training batches");
  }

  TrainOutcome out;
  out.model = net::init_model(layout, seed);
  out.model.standardizer = dataset.standardizer;
  const HistogramSpec spec =
      HistogramSpec::for_ranks(dataset.num_entities, protocol.temperature_fraction);
  const RowBuilder builder(dataset);
  Rng rng(mix_seed(seed, 0x7368756666ULL));
  std::vector<double> rows;
  net::ForwardCache cache;
  net::Gradients grads;
  net::BackwardScratch scratch;
  const auto start = std::chrono::steady_clock::now();

  auto run_phase = [&](Phase phase, int epochs, int first_epoch,
                       const std::vector<bool>& trainable) {
    net::AdamState state = net::AdamState::zeros_like(out.model);
    for (int e = 0; e < epochs; ++e) {
      shuffle(std::span<std::size_t>(training), rng);
      double kl_sum = 0.0, mse_sum = 0.0;
      for (std::size_t bi : training) {
        const features::Batch& batch = dataset.batches[bi];
        builder.build(batch, rows);
        net::forward(out.model, rows, cache);
        const BatchLoss loss = batch_loss(cache.outputs, batch.target_ranks,
                                          spec, phase, protocol.weights);
        if (!std::isfinite(loss.value)) {
          throw NumericalError("non-finite loss in batch " + batch.name() +
                               " at epoch " + std::to_string(first_epoch + e));
        }
        kl_sum += loss.kl;
        mse_sum += loss.mse;
        net::backward(out.model, cache, loss.d_predicted, grads, scratch);
        net::adam_step(out.model, grads, state, protocol.adam, trainable);
      }
      EpochLog entry;
      entry.epoch = first_epoch + e;
      entry.phase = static_cast<int>(phase);
      entry.mean_kl = kl_sum / static_cast<double>(training.size());
      entry.mean_mse = mse_sum / static_cast<double>(training.size());
      entry.wall_time_s = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count();
      out.log.push_back(entry);
      if (on_epoch) on_epoch(entry);
    }
  };

  run_phase(Phase::kDistribution, protocol.phase1_epochs, 1, {});
  out.phase1_model = out.model;
  run_phase(Phase::kDistributionAndMrr, protocol.phase2_epochs,
            protocol.phase1_epochs + 1, final_layer_only(out.model));
  return out;
}

std::vector<double> predicted_batch_mrr(const net::TwigModel& model,
                                        const features::FeatureDataset& dataset,
                                        std::span<const std::size_t> batches) {
  std::vector<double> out;
  out.reserve(batches.size());
  for (std::size_t bi : batches) {
    auto rows = dataset.raw_rows(dataset.batches.at(bi));
    model.standardizer.apply(rows);
    out.push_back(mrr(net::predict(model, rows)));
  }
  return out;
}

void write_training_log(std::span<const EpochLog> log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training log " + path);
  out << "epoch,phase,mean_kl,mean_mse,wall_time_s\n";
  out.precision(10);
  for (const EpochLog& e : log) {
    out << e.epoch << ',' << e.phase << ',' << e.mean_kl << ',' << e.mean_mse
        << ',' << e.wall_time_s << '\n';
  }
}

}  // namespace twigsim::train
