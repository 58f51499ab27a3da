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

#include <chrono>
#include <cmath>
#include <unordered_set>

#include "twigsim/errors.hpp"
#include "twigsim/kge.hpp"

namespace twigsim::kge {

std::string_view to_string(RankingMode m) {
  return m == RankingMode::kFiltered ? "filtered" : "raw";
}

RankingMode parse_ranking(std::string_view name) {
  if (name == "filtered") return RankingMode::kFiltered;
  if (name == "raw") return RankingMode::kRaw;
  throw UsageError("unknown ranking mode: " + std::string(name));
}

int realistic_rank(std::size_t greater, std::size_t equal) {
  // greater + (equal + 1) / 2, halves rounded up.
  return static_cast<int>(greater + (equal + 2) / 2);
}

namespace {

struct TripleHash {
  std::size_t operator()(const kg::Triple& t) const {
    std::uint64_t h = t.subject;
    h = h * 0x9e3779b97f4a7c15ULL + t.predicate;
    h = h * 0x9e3779b97f4a7c15ULL + t.object;
    return static_cast<std::size_t>(splitmix64(h));
  }
};

}  // namespace

std::vector<int> evaluate_ranks(const ComplexEmbeddings& emb,
                                const kg::KnowledgeGraph& graph,
                                RankingMode mode) {
  std::unordered_set<kg::Triple, TripleHash> known;
  if (mode == RankingMode::kFiltered) {
    for (const auto* split : {&graph.train, &graph.valid, &graph.test}) {
      known.insert(split->begin(), split->end());
    }
  }
  const std::size_t d = emb.dim;
  const std::size_t n = graph.num_entities();
  std::vector<double> scores(n);
  std::vector<double> u_re(d), u_im(d);
  std::vector<int> ranks;
  ranks.reserve(graph.valid.size() * 2);

  auto rank_of = [&](kg::EntityId truth, auto is_filtered) {
    const double target = scores[truth];
    std::size_t greater = 0;
    std::size_t equal = 0;
    for (std::size_t e = 0; e < n; ++e) {
      if (e != truth && is_filtered(static_cast<kg::EntityId>(e))) continue;
      if (scores[e] > target) {
        ++greater;
      } else if (scores[e] == target) {
        ++equal;
      }
    }
    return realistic_rank(greater, equal);
  };

  for (const kg::Triple& t : graph.valid) {
    const auto sre = emb.ent_re(t.subject), sim = emb.ent_im(t.subject);
    const auto pre = emb.rel_re(t.predicate), pim = emb.rel_im(t.predicate);
    const auto ore = emb.ent_re(t.object), oim = emb.ent_im(t.object);

    // Head query (?, p, o): score(x) = sum x_re a_re - x_im a_im.
    for (std::size_t k = 0; k < d; ++k) {
      u_re[k] = pre[k] * ore[k] + pim[k] * oim[k];
      u_im[k] = pim[k] * ore[k] - pre[k] * oim[k];
    }
    for (std::size_t e = 0; e < n; ++e) {
      const auto xre = emb.ent_re(e), xim = emb.ent_im(e);
      double f = 0.0;
      for (std::size_t k = 0; k < d; ++k) f += xre[k] * u_re[k] - xim[k] * u_im[k];
      scores[e] = f;
    }
    ranks.push_back(rank_of(t.subject, [&](kg::EntityId x) {
      return mode == RankingMode::kFiltered &&
             known.count({x, t.predicate, t.object}) != 0;
    }));

    // Tail query (s, p, ?): score(x) = sum c_re x_re + c_im x_im.
    for (std::size_t k = 0; k < d; ++k) {
      u_re[k] = sre[k] * pre[k] - sim[k] * pim[k];
      u_im[k] = sre[k] * pim[k] + sim[k] * pre[k];
    }
    for (std::size_t e = 0; e < n; ++e) {
      const auto xre = emb.ent_re(e), xim = emb.ent_im(e);
      double f = 0.0;
      for (std::size_t k = 0; k < d; ++k) f += u_re[k] * xre[k] + u_im[k] * xim[k];
      scores[e] = f;
    }
    ranks.push_back(rank_of(t.object, [&](kg::EntityId x) {
      return mode == RankingMode::kFiltered &&
             known.count({t.subject, t.predicate, x}) != 0;
    }));
  }
  return ranks;
}

RunRecord evaluate_run(const ComplexEmbeddings& emb,
                       const kg::KnowledgeGraph& graph, RankingMode mode,
                       const features::HyperparamConfig& config,
                       std::size_t config_index, int seed) {
  RunRecord r;
  r.config = config;
  r.config_index = config_index;
  r.seed = seed;
  r.ranks = evaluate_ranks(emb, graph, mode);
  r.mrr = mean_reciprocal_rank(r.ranks);
  return r;
}

}  // namespace twigsim::kge
