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

#include "twigsim/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "twigsim/errors.hpp"

namespace twigsim::features {

const std::array<std::string_view, kStructFeatureCount>& struct_feature_names() {
  static const std::array<std::string_view, kStructFeatureCount> names = {
      "is_head",
      "s_deg",
      "o_deg",
      "p_freq",
      "s_p_cofreq",
      "o_p_cofreq",
      "s_o_cofreq",
      "s_min_deg_neighbour",
      "s_max_deg_neighbour",
      "s_mean_deg_neighbour",
      "o_min_deg_neighbour",
      "o_max_deg_neighbour",
      "o_mean_deg_neighbour",
      "s_num_neighbours",
      "o_num_neighbours",
      "s_min_freq_rel",
      "s_max_freq_rel",
      "s_mean_freq_rel",
      "o_min_freq_rel",
      "o_max_freq_rel",
      "o_mean_freq_rel",
      "s_num_rels",
      "o_num_rels",
  };
  return names;
}

std::vector<std::string> row_feature_names() {
  std::vector<std::string> names;
  for (auto n : struct_feature_names()) names.emplace_back(n);
  for (auto n : hyp_feature_names()) names.emplace_back(n);
  return names;
}

namespace {

struct MinMaxMean {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

template <typename Range, typename F>
MinMaxMean summarise(const Range& items, F value_of) {
  MinMaxMean out;
  if (items.empty()) return out;
  out.min = std::numeric_limits<double>::infinity();
  out.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& item : items) {
    const double v = value_of(item);
    out.min = std::min(out.min, v);
    out.max = std::max(out.max, v);
    sum += v;
  }
  out.mean = sum / static_cast<double>(items.size());
  return out;
}

}  // namespace

StructFeatureVector structural_features(const kg::StructIndex& index,
                                        const kg::Triple& triple, Side side) {
  const kg::EntityId s = triple.subject;
  const kg::EntityId o = triple.object;
  const kg::RelationId p = triple.predicate;
  StructFeatureVector f{};
  f[kIsHead] = side == Side::kHead ? 1.0 : 0.0;
  f[kSDeg] = index.degree(s);
  f[kODeg] = index.degree(o);
  f[kPFreq] = index.rel_freq(p);
  f[kSPCofreq] = index.sp_cofreq(s, p);
  f[kOPCofreq] = index.op_cofreq(o, p);
  f[kSOCofreq] = index.so_cofreq(s, o);

  auto neighbour_degrees = [&](kg::EntityId e) {
    return summarise(index.neighbours(e),
                     [&](kg::EntityId n) { return double(index.degree(n)); });
  };
  auto rel_freqs = [&](kg::EntityId e) {
    return summarise(index.incident_rels(e),
                     [&](kg::RelationId r) { return double(index.rel_freq(r)); });
  };

  const MinMaxMean snd = neighbour_degrees(s);
  const MinMaxMean ond = neighbour_degrees(o);
  f[kSMinDegNeighbour] = snd.min;
  f[kSMaxDegNeighbour] = snd.max;
  f[kSMeanDegNeighbour] = snd.mean;
  f[kOMinDegNeighbour] = ond.min;
  f[kOMaxDegNeighbour] = ond.max;
  f[kOMeanDegNeighbour] = ond.mean;
  f[kSNumNeighbours] = static_cast<double>(index.neighbours(s).size());
  f[kONumNeighbours] = static_cast<double>(index.neighbours(o).size());

  const MinMaxMean srf = rel_freqs(s);
  const MinMaxMean orf = rel_freqs(o);
  f[kSMinFreqRel] = srf.min;
  f[kSMaxFreqRel] = srf.max;
  f[kSMeanFreqRel] = srf.mean;
  f[kOMinFreqRel] = orf.min;
  f[kOMaxFreqRel] = orf.max;
  f[kOMeanFreqRel] = orf.mean;
  f[kSNumRels] = static_cast<double>(index.num_distinct_rels(s));
  f[kONumRels] = static_cast<double>(index.num_distinct_rels(o));
  return f;
}

std::vector<StructFeatureVector> validation_query_features(
    const kg::KnowledgeGraph& graph, const kg::StructIndex& index) {
  std::vector<StructFeatureVector> rows;
  rows.reserve(graph.valid.size() * 2);
  for (const kg::Triple& t : graph.valid) {
    rows.push_back(structural_features(index, t, Side::kHead));
    rows.push_back(structural_features(index, t, Side::kTail));
  }
  return rows;
}

FeatureRow make_row(const StructFeatureVector& s, const HypFeatureVector& h) {
  FeatureRow row{};
  std::copy(s.begin(), s.end(), row.begin());
  std::copy(h.begin(), h.end(), row.begin() + kStructFeatureCount);
  return row;
}

bool is_standardised_column(std::size_t column) {
  return column < kStructFeatureCount ||
         column == kStructFeatureCount + kNpp ||
         column == kStructFeatureCount + kDim;
}

Standardizer Standardizer::fit(std::span<const double> rows) {
  Standardizer st;
  const std::size_t n = rows.size() / kRowWidth;
  if (n == 0) return st;
  for (std::size_t c = 0; c < kRowWidth; ++c) {
    if (!is_standardised_column(c)) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += rows[i * kRowWidth + c];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = rows[i * kRowWidth + c] - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / static_cast<double>(n));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      st.mean[c] = mean;
      st.scale[c] = sd;
    }
  }
  return st;
}

void Standardizer::apply(std::span<double> rows) const {
  const std::size_t n = rows.size() / kRowWidth;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < kRowWidth; ++c) {
      double& v = rows[i * kRowWidth + c];
      v = (v - mean[c]) / scale[c];
    }
  }
}

std::vector<double> Standardizer::transform(std::span<const double> rows) const {
  std::vector<double> out(rows.begin(), rows.end());
  apply(out);
  return out;
}

void to_json(nlohmann::json& j, const Standardizer& s) {
  j = nlohmann::json{{"mean", s.mean}, {"scale", s.scale}};
}

void from_json(const nlohmann::json& j, Standardizer& s) {
  s.mean = j.at("mean").get<std::array<double, kRowWidth>>();
  s.scale = j.at("scale").get<std::array<double, kRowWidth>>();
}

Standardizer Standardizer::fit_product(
    std::span<const double> struct_rows,
    std::span<const HypFeatureVector> hyps) {
  Standardizer st;
  const std::size_t q = struct_rows.size() / kStructFeatureCount;
  if (q == 0 || hyps.empty()) return st;
  auto set_column = [&](std::size_t column, auto value_at, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += value_at(i);
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = value_at(i) - mean;
      sq += d * d;
    }
    const double sd = std::sqrt(sq / static_cast<double>(n));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      st.mean[column] = mean;
      st.scale[column] = sd;
    }
  };
  // Every batch repeats the query block, so structural moments are those of
  // the block; every hyp vector repeats q times, so its moments are those of
  // the batch list.
  for (std::size_t c = 0; c < kStructFeatureCount; ++c) {
    set_column(
        c, [&](std::size_t i) { return struct_rows[i * kStructFeatureCount + c]; },
        q);
  }
  for (std::size_t slot : {std::size_t{kNpp}, std::size_t{kDim}}) {
    set_column(
        kStructFeatureCount + slot, [&](std::size_t i) { return hyps[i][slot]; },
        hyps.size());
  }
  return st;
}

std::string Batch::name() const {
  return "cfg" + std::to_string(config_index) + "_seed" + std::to_string(seed);
}

std::size_t FeatureDataset::num_training_batches() const {
  return static_cast<std::size_t>(std::count_if(
      batches.begin(), batches.end(), [](const Batch& b) { return !b.holdout; }));
}

std::vector<double> FeatureDataset::raw_rows(const Batch& b) const {
  const std::size_t q = num_queries();
  std::vector<double> rows(q * kRowWidth);
  for (std::size_t i = 0; i < q; ++i) {
    double* row = rows.data() + i * kRowWidth;
    std::copy_n(query_features.data() + i * kStructFeatureCount,
                kStructFeatureCount, row);
    std::copy(b.hyp.begin(), b.hyp.end(), row + kStructFeatureCount);
  }
  return rows;
}

std::vector<double> FeatureDataset::standardised_rows(const Batch& b) const {
  auto rows = raw_rows(b);
  standardizer.apply(rows);
  return rows;
}

FeatureDataset assemble_dataset(const kg::KnowledgeGraph& graph,
                                const kg::StructIndex& index,
                                std::span<const kge::RunRecord> runs,
                                std::optional<int> holdout_seed) {
  const auto queries = validation_query_features(graph, index);
  FeatureDataset ds;
  ds.num_entities = graph.num_entities();
  ds.holdout_seed = holdout_seed;
  for (const auto& q : queries) {
    ds.query_features.insert(ds.query_features.end(), q.begin(), q.end());
  }
  std::vector<HypFeatureVector> training_hyps;
  for (const kge::RunRecord& run : runs) {
    if (!run.ok()) {
      ++ds.failed_runs_excluded;
      continue;
    }
    if (run.ranks.size() != queries.size()) {
      throw DataError("run " + kge::run_file_name(run.config_index, run.seed) +
                      " has " + std::to_string(run.ranks.size()) +
                      " ranks but the validation split has " +
                      std::to_string(queries.size()) + " queries");
    }
    Batch b;
    b.config_index = run.config_index;
    b.seed = run.seed;
    b.config = run.config;
    b.holdout = holdout_seed && run.seed == *holdout_seed;
    b.true_mrr = run.mrr;
    b.hyp = hyperparam_features(run.config);
    b.target_ranks.assign(run.ranks.begin(), run.ranks.end());
    if (!b.holdout) training_hyps.push_back(b.hyp);
    ds.batches.push_back(std::move(b));
  }
  ds.standardizer = Standardizer::fit_product(ds.query_features, training_hyps);
  return ds;
}

}  // namespace twigsim::features
