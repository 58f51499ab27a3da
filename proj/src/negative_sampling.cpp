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

#include "twigsim/kge.hpp"

namespace twigsim::kge {

NegativeSampler::NegativeSampler(const kg::KnowledgeGraph& graph,
                                 features::Sampler strategy)
    : strategy_(strategy),
      num_entities_(graph.num_entities()),
      head_prob_(graph.num_relations(), 0.5),
      head_pool_(graph.num_relations()),
      tail_pool_(graph.num_relations()) {
  std::vector<std::size_t> count(graph.num_relations(), 0);
  for (const kg::Triple& t : graph.train) {
    ++count[t.predicate];
    head_pool_[t.predicate].push_back(t.subject);
    tail_pool_[t.predicate].push_back(t.object);
  }
  for (std::size_t r = 0; r < graph.num_relations(); ++r) {
    for (auto* pool : {&head_pool_[r], &tail_pool_[r]}) {
      std::sort(pool->begin(), pool->end());
      pool->erase(std::unique(pool->begin(), pool->end()), pool->end());
    }
    if (count[r] == 0) continue;
    const double n = static_cast<double>(count[r]);
    const double tails_per_head = n / static_cast<double>(head_pool_[r].size());
    const double heads_per_tail = n / static_cast<double>(tail_pool_[r].size());
    head_prob_[r] = tails_per_head / (tails_per_head + heads_per_tail);
  }
}

kg::EntityId NegativeSampler::draw(const std::vector<kg::EntityId>& pool,
                                   Rng& rng) const {
  if (pool.size() <= 1) {
    return static_cast<kg::EntityId>(uniform_index(rng, num_entities_));
  }
  return pool[uniform_index(rng, pool.size())];
}

void NegativeSampler::sample(const kg::Triple& positive, int count, Rng& rng,
                             std::vector<Negative>& out) const {
  const kg::RelationId r = positive.predicate;
  for (int i = 0; i < count; ++i) {
    bool corrupt_head = false;
    if (strategy_ == features::Sampler::kBernoulli) {
      corrupt_head = uniform01(rng) < head_prob_[r];
    } else {
      corrupt_head = (rng() >> 63) != 0;
    }
    Negative neg{positive,
                 corrupt_head ? CorruptedSlot::kHead : CorruptedSlot::kTail};
    kg::EntityId replacement = 0;
    if (strategy_ == features::Sampler::kPseudoTyped) {
      replacement = draw(corrupt_head ? head_pool_[r] : tail_pool_[r], rng);
    } else {
      replacement = static_cast<kg::EntityId>(uniform_index(rng, num_entities_));
    }
    if (corrupt_head) {
      neg.triple.subject = replacement;
    } else {
      neg.triple.object = replacement;
    }
    out.push_back(neg);
  }
}

std::vector<Negative> NegativeSampler::sample(const kg::Triple& positive,
                                              int count, Rng& rng) const {
  std::vector<Negative> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  sample(positive, count, rng, out);
  return out;
}

}  // namespace twigsim::kge
