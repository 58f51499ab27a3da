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
#include <string>
#include <vector>

#include <json.hpp>

#include "twigsim/hyperparams.hpp"
#include "twigsim/kg_store.hpp"
#include "twigsim/rng.hpp"
#include "twigsim/run_record.hpp"

namespace twigsim::kge {

// ComplEx embedding tables, row-major (rows x dim), real and imaginary parts
// stored separately.
struct ComplexEmbeddings {
  std::size_t dim = 0;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::vector<double> entity_re, entity_im;
  std::vector<double> relation_re, relation_im;

  ComplexEmbeddings() = default;
  ComplexEmbeddings(std::size_t entities, std::size_t relations,
                    std::size_t d);

  std::span<const double> ent_re(std::size_t e) const {
    return {entity_re.data() + e * dim, dim};
  }
  std::span<const double> ent_im(std::size_t e) const {
    return {entity_im.data() + e * dim, dim};
  }
  std::span<const double> rel_re(std::size_t r) const {
    return {relation_re.data() + r * dim, dim};
  }
  std::span<const double> rel_im(std::size_t r) const {
    return {relation_im.data() + r * dim, dim};
  }

  std::size_t real_parameter_count() const {
    return (num_entities + num_relations) * 2 * dim;
  }
  bool all_finite() const;
};

// i.i.d. normal, mean 0, stddev 1/sqrt(2d).
ComplexEmbeddings init_embeddings(std::size_t entities, std::size_t relations,
                                  std::size_t dim, Rng& rng);

// Re(<e_s, e_p, conj(e_o)>).
double score(const ComplexEmbeddings& emb, kg::EntityId s, kg::RelationId p,
             kg::EntityId o);

// Sum over k of |c_k|^3 for one complex row.
double n3_row(std::span<const double> re, std::span<const double> im);

// N3 of every entity and relation row touched by the triples, counted with
// multiplicity.
double n3_penalty(const ComplexEmbeddings& emb,
                  std::span<const kg::Triple> triples);

// ---------------------------------------------------------------------------
// Negative sampling

enum class CorruptedSlot { kHead, kTail };

struct Negative {
  kg::Triple triple;
  CorruptedSlot slot;
};

// Per-relation statistics from the train split: Bernoulli head-corruption
// probabilities tph / (tph + hpt) and the entity pools observed in each slot.
class NegativeSampler {
 public:
  NegativeSampler(const kg::KnowledgeGraph& graph, features::Sampler strategy);

  void sample(const kg::Triple& positive, int count, Rng& rng,
              std::vector<Negative>& out) const;
  std::vector<Negative> sample(const kg::Triple& positive, int count,
                               Rng& rng) const;

  double head_corruption_probability(kg::RelationId r) const {
    return head_prob_[r];
  }
  const std::vector<kg::EntityId>& head_pool(kg::RelationId r) const {
    return head_pool_[r];
  }
  const std::vector<kg::EntityId>& tail_pool(kg::RelationId r) const {
    return tail_pool_[r];
  }

 private:
  kg::EntityId draw(const std::vector<kg::EntityId>& pool, Rng& rng) const;

  features::Sampler strategy_;
  std::size_t num_entities_;
  std::vector<double> head_prob_;
  std::vector<std::vector<kg::EntityId>> head_pool_;
  std::vector<std::vector<kg::EntityId>> tail_pool_;
};

// ---------------------------------------------------------------------------
// Training losses over one mini-batch of positives and their negatives.

struct LossValue {
  double value = 0.0;
  std::vector<double> grad_positive;  // per positive
  std::vector<double> grad_negative;  // positives x negatives_per_positive
};

// negative_scores holds negatives_per_positive consecutive entries per
// positive.
LossValue kge_loss(features::LossKind kind,
                   std::span<const double> positive_scores,
                   std::span<const double> negative_scores, double margin);

// ---------------------------------------------------------------------------
// Training and evaluation

struct KgeSettings {
  int epochs = 100;
  std::size_t batch_size = 128;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  nlohmann::json to_json() const;
};

// Per-positive partial products. For a positive (s, p, o):
//   tail route: c = s * p,        f(s, p, x) = sum c_re x_re + c_im x_im
//   head route: a = p * conj(o),  f(x, p, o) = sum x_re a_re - x_im a_im
// Gradients of the partial products accumulate in g* and are chained back to
// the s, p, o rows once per positive.
struct PartialProducts {
  std::vector<double> c_re, c_im, a_re, a_im;
  std::vector<double> gc_re, gc_im, ga_re, ga_im;
  void resize(std::size_t n);
};

struct BatchScratch {
  std::vector<double> pos_scores, neg_scores;
  std::vector<PartialProducts> partial;
};

// Loss plus reg_coefficient * N3 / |positives| for one mini-batch, with the
// exact gradient written to grad (same shape as emb). negatives holds
// negatives_per_positive consecutive entries per positive.
double batch_objective(const ComplexEmbeddings& emb,
                       const features::HyperparamConfig& config,
                       std::span<const kg::Triple> positives,
                       std::span<const Negative> negatives,
                       ComplexEmbeddings& grad);
double batch_objective(const ComplexEmbeddings& emb,
                       const features::HyperparamConfig& config,
                       std::span<const kg::Triple> positives,
                       std::span<const Negative> negatives,
                       ComplexEmbeddings& grad, BatchScratch& scratch);

struct TrainResult {
  ComplexEmbeddings embeddings;
  bool diverged = false;
  int epochs_completed = 0;
  std::string failure;
  double final_loss = 0.0;
};

// Deterministic given (graph, config, seed, settings).
TrainResult train_kge(const kg::KnowledgeGraph& graph,
                      const features::HyperparamConfig& config,
                      std::uint64_t seed, const KgeSettings& settings = {});

enum class RankingMode { kFiltered, kRaw };
std::string_view to_string(RankingMode m);
RankingMode parse_ranking(std::string_view name);

// Mid-point tie rule: greater + (equal + 1) / 2 rounded half up, where equal
// counts the true entity.
int realistic_rank(std::size_t greater, std::size_t equal);

// Ranks of every validation query in canonical order.
std::vector<int> evaluate_ranks(const ComplexEmbeddings& emb,
                                const kg::KnowledgeGraph& graph,
                                RankingMode mode);

RunRecord evaluate_run(const ComplexEmbeddings& emb,
                       const kg::KnowledgeGraph& graph, RankingMode mode,
                       const features::HyperparamConfig& config,
                       std::size_t config_index, int seed);

// Sum over configs of (|E| + |R|) x dim.
std::uint64_t parameter_accounting(
    std::span<const features::HyperparamConfig> configs,
    std::size_t num_entities, std::size_t num_relations);

}  // namespace twigsim::kge
