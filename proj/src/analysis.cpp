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

#include "twigsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "twigsim/errors.hpp"
#include "twigsim/twig_train.hpp"

namespace twigsim::analysis {

std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw UsageError("pearson needs two lists of equal length >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

bool SquareMatrix::symmetric() const {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (at(i, j) != at(j, i)) return false;
    }
  }
  return true;
}

std::string SquareMatrix::to_csv(std::span<const int> labels) const {
  std::ostringstream out;
  out.precision(10);
  out << "seed";
  for (int l : labels) out << ",seed" << l;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << "seed" << labels[i];
    for (std::size_t j = 0; j < n; ++j) out << ',' << at(i, j);
    out << '\n';
  }
  return out.str();
}

RunSets group_runs(std::span<const kge::RunRecord> runs) {
  std::map<int, std::map<std::size_t, const kge::RunRecord*>> by_seed;
  for (const auto& r : runs) {
    auto& slot = by_seed[r.seed][r.config_index];
    if (slot != nullptr) {
      throw DataError("duplicate run for " +
                      kge::run_file_name(r.config_index, r.seed));
    }
    slot = &r;
  }
  RunSets sets;
  if (by_seed.empty()) return sets;
  std::set<std::size_t> grid;
  for (const auto& [ci, r] : by_seed.begin()->second) grid.insert(ci);
  for (const auto& [seed, configs] : by_seed) {
    std::set<std::size_t> mine;
    for (const auto& [ci, r] : configs) mine.insert(ci);
    if (mine != grid) {
      throw DataError("seed " + std::to_string(seed) +
                      " covers a different grid than seed " +
                      std::to_string(by_seed.begin()->first));
    }
    sets.seeds.push_back(seed);
  }
  std::optional<std::size_t> rank_len;
  std::optional<std::string> query_order;
  for (std::size_t ci : grid) {
    bool all_ok = true;
    for (const auto& [seed, configs] : by_seed) {
      all_ok = all_ok && configs.at(ci)->ok();
    }
    if (!all_ok) {
      ++sets.configs_dropped;
      continue;
    }
    for (const auto& [seed, configs] : by_seed) {
      const kge::RunRecord* r = configs.at(ci);
      if (rank_len && *rank_len != r->ranks.size()) {
        throw DataError("rank lists differ in length across runs");
      }
      rank_len = r->ranks.size();
      if (r->metadata.contains("query_order")) {
        const auto q = r->metadata["query_order"].get<std::string>();
        if (query_order && *query_order != q) {
          throw DataError("rank lists use different query orders");
        }
        query_order = q;
      }
    }
    sets.config_indices.push_back(ci);
  }
  sets.table.resize(sets.seeds.size());
  for (std::size_t s = 0; s < sets.seeds.size(); ++s) {
    for (std::size_t ci : sets.config_indices) {
      sets.table[s].push_back(by_seed.at(sets.seeds[s]).at(ci));
    }
  }
  return sets;
}

SquareMatrix mrr_correlation_matrix(const RunSets& sets) {
  const std::size_t k = sets.num_seeds();
  std::vector<std::vector<double>> mrr(k);
  for (std::size_t s = 0; s < k; ++s) {
    for (const auto* r : sets.table[s]) mrr[s].push_back(r->mrr);
  }
  SquareMatrix m(k);
  for (std::size_t i = 0; i < k; ++i) {
    m.at(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const auto c = pearson(mrr[i], mrr[j]);
      const double v = c ? *c : std::nan("");
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
  return m;
}

namespace {

std::vector<double> rank_histogram(const kge::RunRecord& r,
                                   const train::HistogramSpec& spec) {
  const std::vector<double> values(r.ranks.begin(), r.ranks.end());
  return train::hard_histogram(values, spec);
}

double pair_kl(const std::vector<double>& a, const std::vector<double>& b,
               bool symmetrise) {
  if (!symmetrise) return train::kl_divergence(a, b);
  return 0.5 * (train::kl_divergence(a, b) + train::kl_divergence(b, a));
}

}  // namespace

KlStats kl_matrix(const RunSets& sets, std::size_t num_entities,
                  bool symmetrise) {
  const train::HistogramSpec spec = train::HistogramSpec::for_ranks(num_entities);
  const std::size_t k = sets.num_seeds();
  const std::size_t c = sets.num_configs();
  std::vector<std::vector<std::vector<double>>> hist(k);
  for (std::size_t s = 0; s < k; ++s) {
    for (const auto* r : sets.table[s]) hist[s].push_back(rank_histogram(*r, spec));
  }
  KlStats out;
  out.symmetrised = symmetrise;
  out.same_config = SquareMatrix(k);
  double off_sum = 0.0;
  std::size_t off_count = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      if (symmetrise && j > i) continue;
      double sum = 0.0;
      for (std::size_t ci = 0; ci < c; ++ci) {
        sum += pair_kl(hist[i][ci], hist[j][ci], symmetrise);
      }
      const double mean = c ? sum / static_cast<double>(c) : 0.0;
      out.same_config.at(i, j) = mean;
      if (symmetrise) out.same_config.at(j, i) = mean;
      off_sum += symmetrise ? 2.0 * mean : mean;
      off_count += symmetrise ? 2 : 1;
    }
  }
  out.same_config_mean = off_count ? off_sum / static_cast<double>(off_count) : 0.0;

  double cross_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t a = 0; a < c; ++a) {
      for (std::size_t b = 0; b < c; ++b) {
        if (a == b || (symmetrise && b > a)) continue;
        cross_sum += pair_kl(hist[s][a], hist[s][b], symmetrise);
        ++pairs;
      }
    }
  }
  out.cross_config_pairs = pairs;
  out.cross_config_mean = pairs ? cross_sum / static_cast<double>(pairs) : 0.0;
  return out;
}

CorrelationDistribution ranklist_correlation_distribution(const RunSets& sets,
                                                          std::size_t bins) {
  CorrelationDistribution out;
  const std::size_t k = sets.num_seeds();
  for (std::size_t ci = 0; ci < sets.num_configs(); ++ci) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto& ri = sets.table[i][ci]->ranks;
        const auto& rj = sets.table[j][ci]->ranks;
        const std::vector<double> x(ri.begin(), ri.end());
        const std::vector<double> y(rj.begin(), rj.end());
        if (x.size() < 2) {
          ++out.skipped;
          continue;
        }
        const auto c = pearson(x, y);
        if (c) {
          out.values.push_back(*c);
        } else {
          ++out.skipped;
        }
      }
    }
  }
  out.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    out.bin_edges[b] = -1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins);
  }
  out.counts.assign(bins, 0);
  for (double v : out.values) {
    const auto b = static_cast<std::size_t>(std::clamp(
        std::floor((v + 1.0) / 2.0 * static_cast<double>(bins)), 0.0,
        static_cast<double>(bins - 1)));
    ++out.counts[b];
  }
  if (!out.values.empty()) {
    double sum = 0.0;
    for (double v : out.values) sum += v;
    out.mean = sum / static_cast<double>(out.values.size());
    std::vector<double> sorted = out.values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    out.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  return out;
}

R2Result r2_of_mrr(std::span<const double> predicted,
                   std::span<const double> truth) {
  if (predicted.size() != truth.size() || truth.size() < 2) {
    throw UsageError("R2 needs matching prediction and truth lists of size >= 2");
  }
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot <= 0.0) throw UsageError("R2 is undefined for constant truth");
  R2Result out;
  out.r2 = 1.0 - ss_res / ss_tot;
  out.correlation = pearson(predicted, truth);
  return out;
}

SignalReport signal_report(std::span<const kge::RunRecord> runs,
                           std::size_t num_entities, bool symmetrise) {
  const RunSets sets = group_runs(runs);
  if (sets.num_seeds() < 2) {
    throw DataError("signal analysis needs runs from at least 2 seeds");
  }
  SignalReport r;
  r.seeds = sets.seeds;
  r.num_configs = sets.num_configs();
  r.configs_dropped = sets.configs_dropped;
  r.mrr_corr = mrr_correlation_matrix(sets);
  r.kl = kl_matrix(sets, num_entities, symmetrise);
  r.ranklist_corr = ranklist_correlation_distribution(sets);
  return r;
}

namespace {

nlohmann::json matrix_json(const SquareMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.n; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.n; ++j) {
      const double v = m.at(i, j);
      row.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::json to_json(const SignalReport& r) {
  return {
      {"seeds", r.seeds},
      {"num_configs", r.num_configs},
      {"configs_dropped", r.configs_dropped},
      {"mrr_corr_matrix", matrix_json(r.mrr_corr)},
      {"same_config_kl", matrix_json(r.kl.same_config)},
      {"same_config_kl_mean", r.kl.same_config_mean},
      {"cross_config_mean_kl", r.kl.cross_config_mean},
      {"cross_config_pairs", r.kl.cross_config_pairs},
      {"kl_symmetrised", r.kl.symmetrised},
      {"ranklist_corr_histogram",
       {{"bin_edges", r.ranklist_corr.bin_edges},
        {"counts", r.ranklist_corr.counts},
        {"skipped", r.ranklist_corr.skipped},
        {"mean", r.ranklist_corr.mean},
        {"median", r.ranklist_corr.median},
        {"n", r.ranklist_corr.values.size()}}},
  };
}

}  // namespace twigsim::analysis
