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

#include <cmath>
#include <numeric>

#include "twigsim/kge.hpp"

namespace twigsim::kge {

nlohmann::json KgeSettings::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_epsilon", adam_epsilon},
          {"init", "normal(0, 1/sqrt(2d))"}};
}

namespace {

class AdamTables {
 public:
  explicit AdamTables(const ComplexEmbeddings& shape)
      : m_(shape.num_entities, shape.num_relations, shape.dim),
        v_(shape.num_entities, shape.num_relations, shape.dim) {}

  void step(ComplexEmbeddings& params, const ComplexEmbeddings& grads,
            double lr, const KgeSettings& s) {
    ++t_;
    const double c1 = 1.0 - std::pow(s.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(s.adam_beta2, static_cast<double>(t_));
    auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = s.adam_beta1 * m[i] + (1.0 - s.adam_beta1) * g[i];
        v[i] = s.adam_beta2 * v[i] + (1.0 - s.adam_beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.adam_epsilon);
      }
    };
    update(params.entity_re, grads.entity_re, m_.entity_re, v_.entity_re);
    update(params.entity_im, grads.entity_im, m_.entity_im, v_.entity_im);
    update(params.relation_re, grads.relation_re, m_.relation_re,
           v_.relation_re);
    update(params.relation_im, grads.relation_im, m_.relation_im,
           v_.relation_im);
  }

 private:
  ComplexEmbeddings m_;
  ComplexEmbeddings v_;
  long t_ = 0;
};

void zero(ComplexEmbeddings& g) {
  for (auto* table : {&g.entity_re, &g.entity_im, &g.relation_re,
                      &g.relation_im}) {
    std::fill(table->begin(), table->end(), 0.0);
  }
}

}  // namespace

void PartialProducts::resize(std::size_t n) {
  for (auto* v : {&c_re, &c_im, &a_re, &a_im, &gc_re, &gc_im, &ga_re,
                  &ga_im}) {
    v->assign(n, 0.0);
  }
}

double batch_objective(const ComplexEmbeddings& emb,
                       const features::HyperparamConfig& config,
                       std::span<const kg::Triple> positives,
                       std::span<const Negative> negatives,
                       ComplexEmbeddings& grad) {
  BatchScratch scratch;
  return batch_objective(emb, config, positives, negatives, grad, scratch);
}

double batch_objective(const ComplexEmbeddings& emb,
                       const features::HyperparamConfig& config,
                       std::span<const kg::Triple> positives,
                       std::span<const Negative> negatives,
                       ComplexEmbeddings& grad, BatchScratch& scratch) {
  const std::size_t d = emb.dim;
  const std::size_t b = positives.size();
  if (grad.dim != d || grad.num_entities != emb.num_entities ||
      grad.num_relations != emb.num_relations) {
    grad = ComplexEmbeddings(emb.num_entities, emb.num_relations, d);
  }
  if (b == 0) {
    zero(grad);
    return 0.0;
  }
  const std::size_t npp = negatives.size() / b;
  auto& pos_scores = scratch.pos_scores;
  auto& neg_scores = scratch.neg_scores;
  auto& partial = scratch.partial;
  if (partial.size() < b) partial.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    if (partial[i].c_re.size() != d) partial[i].resize(d);
  }
  pos_scores.assign(b, 0.0);
  neg_scores.assign(negatives.size(), 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    const kg::Triple& t = positives[i];
    PartialProducts& pp = partial[i];
    const auto sre = emb.ent_re(t.subject), sim = emb.ent_im(t.subject);
    const auto pre = emb.rel_re(t.predicate), pim = emb.rel_im(t.predicate);
    const auto ore = emb.ent_re(t.object), oim = emb.ent_im(t.object);
    double f = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      pp.c_re[k] = sre[k] * pre[k] - sim[k] * pim[k];
      pp.c_im[k] = sre[k] * pim[k] + sim[k] * pre[k];
      pp.a_re[k] = pre[k] * ore[k] + pim[k] * oim[k];
      pp.a_im[k] = pim[k] * ore[k] - pre[k] * oim[k];
      f += pp.c_re[k] * ore[k] + pp.c_im[k] * oim[k];
    }
    pos_scores[i] = f;
    for (std::size_t j = 0; j < npp; ++j) {
      const Negative& n = negatives[i * npp + j];
      double g = 0.0;
      if (n.slot == CorruptedSlot::kTail) {
        const auto xre = emb.ent_re(n.triple.object);
        const auto xim = emb.ent_im(n.triple.object);
        for (std::size_t k = 0; k < d; ++k) {
          g += pp.c_re[k] * xre[k] + pp.c_im[k] * xim[k];
        }
      } else {
        const auto xre = emb.ent_re(n.triple.subject);
        const auto xim = emb.ent_im(n.triple.subject);
        for (std::size_t k = 0; k < d; ++k) {
          g += xre[k] * pp.a_re[k] - xim[k] * pp.a_im[k];
        }
      }
      neg_scores[i * npp + j] = g;
    }
  }

  const LossValue loss =
      kge_loss(config.loss, pos_scores, neg_scores, config.margin);
  const double reg_scale = config.reg_coefficient / static_cast<double>(b);
  const double penalty = reg_scale * n3_penalty(emb, positives);
  const double total = loss.value + penalty;
  if (!std::isfinite(total)) return total;

  zero(grad);
  for (std::size_t i = 0; i < b; ++i) {
    const kg::Triple& t = positives[i];
    PartialProducts& pp = partial[i];
    std::fill(pp.gc_re.begin(), pp.gc_re.end(), 0.0);
    std::fill(pp.gc_im.begin(), pp.gc_im.end(), 0.0);
    std::fill(pp.ga_re.begin(), pp.ga_re.end(), 0.0);
    std::fill(pp.ga_im.begin(), pp.ga_im.end(), 0.0);
    auto add_tail = [&](kg::EntityId x, double g) {
      if (g == 0.0) return;
      const auto xre = emb.ent_re(x), xim = emb.ent_im(x);
      double* gx_re = grad.entity_re.data() + x * d;
      double* gx_im = grad.entity_im.data() + x * d;
      for (std::size_t k = 0; k < d; ++k) {
        gx_re[k] += g * pp.c_re[k];
        gx_im[k] += g * pp.c_im[k];
        pp.gc_re[k] += g * xre[k];
        pp.gc_im[k] += g * xim[k];
      }
    };
    auto add_head = [&](kg::EntityId x, double g) {
      if (g == 0.0) return;
      const auto xre = emb.ent_re(x), xim = emb.ent_im(x);
      double* gx_re = grad.entity_re.data() + x * d;
      double* gx_im = grad.entity_im.data() + x * d;
      for (std::size_t k = 0; k < d; ++k) {
        gx_re[k] += g * pp.a_re[k];
        gx_im[k] -= g * pp.a_im[k];
        pp.ga_re[k] += g * xre[k];
        pp.ga_im[k] -= g * xim[k];
      }
    };
    add_tail(t.object, loss.grad_positive[i]);
    for (std::size_t j = 0; j < npp; ++j) {
      const Negative& n = negatives[i * npp + j];
      const double g = loss.grad_negative[i * npp + j];
      if (n.slot == CorruptedSlot::kTail) {
        add_tail(n.triple.object, g);
      } else {
        add_head(n.triple.subject, g);
      }
    }

    const auto sre = emb.ent_re(t.subject), sim = emb.ent_im(t.subject);
    const auto pre = emb.rel_re(t.predicate), pim = emb.rel_im(t.predicate);
    const auto ore = emb.ent_re(t.object), oim = emb.ent_im(t.object);
    double* gs_re = grad.entity_re.data() + t.subject * d;
    double* gs_im = grad.entity_im.data() + t.subject * d;
    double* gp_re = grad.relation_re.data() + t.predicate * d;
    double* gp_im = grad.relation_im.data() + t.predicate * d;
    double* go_re = grad.entity_re.data() + t.object * d;
    double* go_im = grad.entity_im.data() + t.object * d;
    for (std::size_t k = 0; k < d; ++k) {
      const double gcr = pp.gc_re[k], gci = pp.gc_im[k];
      const double gar = pp.ga_re[k], gai = pp.ga_im[k];
      gs_re[k] += gcr * pre[k] + gci * pim[k];
      gs_im[k] += -gcr * pim[k] + gci * pre[k];
      gp_re[k] += gcr * sre[k] + gci * sim[k] + gar * ore[k] - gai * oim[k];
      gp_im[k] += -gcr * sim[k] + gci * sre[k] + gar * oim[k] + gai * ore[k];
      go_re[k] += gar * pre[k] + gai * pim[k];
      go_im[k] += gar * pim[k] - gai * pre[k];
    }

    // d/dx |c|^3 = 3 |c| x for each real component.
    auto add_n3 = [&](std::span<const double> re, std::span<const double> im,
                      double* g_re, double* g_im) {
      for (std::size_t k = 0; k < d; ++k) {
        const double m = std::sqrt(re[k] * re[k] + im[k] * im[k]);
        g_re[k] += reg_scale * 3.0 * m * re[k];
        g_im[k] += reg_scale * 3.0 * m * im[k];
      }
    };
    add_n3(sre, sim, gs_re, gs_im);
    add_n3(pre, pim, gp_re, gp_im);
    add_n3(ore, oim, go_re, go_im);
  }

  return total;
}

TrainResult train_kge(const kg::KnowledgeGraph& graph,
                      const features::HyperparamConfig& config,
                      std::uint64_t seed, const KgeSettings& settings) {
  Rng rng(mix_seed(seed, 0x436f6d706c4578ULL));
  const std::size_t d = static_cast<std::size_t>(config.dim);
  TrainResult result;
  result.embeddings =
      init_embeddings(graph.num_entities(), graph.num_relations(), d, rng);
  ComplexEmbeddings& emb = result.embeddings;
  ComplexEmbeddings grad(graph.num_entities(), graph.num_relations(), d);
  AdamTables adam(emb);
  const NegativeSampler sampler(graph, config.sampler);
  const int npp = config.negatives_per_positive;
  const std::size_t batch_cap = std::max<std::size_t>(1, settings.batch_size);

  std::vector<std::size_t> order(graph.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Negative> negatives;
  std::vector<kg::Triple> positives;
  BatchScratch scratch;

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_cap) {
      const std::size_t b = std::min(batch_cap, order.size() - start);
      positives.clear();
      negatives.clear();
      for (std::size_t i = 0; i < b; ++i) {
        positives.push_back(graph.train[order[start + i]]);
        sampler.sample(positives.back(), npp, rng, negatives);
      }

      const double total =
          batch_objective(emb, config, positives, negatives, grad, scratch);
      if (!std::isfinite(total)) {
        result.diverged = true;
        result.failure = "non-finite loss at epoch " + std::to_string(epoch);
        return result;
      }
      epoch_loss += total;
      adam.step(emb, grad, config.learning_rate, settings);
    }
    result.final_loss = epoch_loss;
    result.epochs_completed = epoch + 1;
    if (!emb.all_finite()) {
      result.diverged = true;
      result.failure =
          "non-finite embeddings after epoch " + std::to_string(epoch);
      return result;
    }
  }
  return result;
}

}  // namespace twigsim::kge
