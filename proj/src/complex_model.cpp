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

#include "twigsim/kge.hpp"

namespace twigsim::kge {

ComplexEmbeddings::ComplexEmbeddings(std::size_t entities,
                                     std::size_t relations, std::size_t d)
    : dim(d),
      num_entities(entities),
      num_relations(relations),
      entity_re(entities * d, 0.0),
      entity_im(entities * d, 0.0),
      relation_re(relations * d, 0.0),
      relation_im(relations * d, 0.0) {}

bool ComplexEmbeddings::all_finite() const {
  for (const auto* table : {&entity_re, &entity_im, &relation_re, &relation_im}) {
    for (double v : *table) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ComplexEmbeddings init_embeddings(std::size_t entities, std::size_t relations,
                                  std::size_t dim, Rng& rng) {
  ComplexEmbeddings emb(entities, relations, dim);
  const double sd = 1.0 / std::sqrt(2.0 * static_cast<double>(dim));
  for (auto* table : {&emb.entity_re, &emb.entity_im, &emb.relation_re,
                      &emb.relation_im}) {
    for (double& v : *table) v = sd * standard_normal(rng);
  }
  return emb;
}

double score(const ComplexEmbeddings& emb, kg::EntityId s, kg::RelationId p,
             kg::EntityId o) {
  const auto sre = emb.ent_re(s), sim = emb.ent_im(s);
  const auto pre = emb.rel_re(p), pim = emb.rel_im(p);
  const auto ore = emb.ent_re(o), oim = emb.ent_im(o);
  double total = 0.0;
  for (std::size_t k = 0; k < emb.dim; ++k) {
    total += sre[k] * pre[k] * ore[k] + sim[k] * pre[k] * oim[k] +
             sre[k] * pim[k] * oim[k] - sim[k] * pim[k] * ore[k];
  }
  return total;
}

double n3_row(std::span<const double> re, std::span<const double> im) {
  double total = 0.0;
  for (std::size_t k = 0; k < re.size(); ++k) {
    const double modulus = std::sqrt(re[k] * re[k] + im[k] * im[k]);
    total += modulus * modulus * modulus;
  }
  return total;
}

double n3_penalty(const ComplexEmbeddings& emb,
                  std::span<const kg::Triple> triples) {
  double total = 0.0;
  for (const kg::Triple& t : triples) {
    total += n3_row(emb.ent_re(t.subject), emb.ent_im(t.subject));
    total += n3_row(emb.rel_re(t.predicate), emb.rel_im(t.predicate));
    total += n3_row(emb.ent_re(t.object), emb.ent_im(t.object));
  }
  return total;
}

std::uint64_t parameter_accounting(
    std::span<const features::HyperparamConfig> configs,
    std::size_t num_entities, std::size_t num_relations) {
  std::uint64_t total = 0;
  for (const auto& c : configs) {
    total += static_cast<std::uint64_t>(num_entities + num_relations) *
             static_cast<std::uint64_t>(c.dim);
  }
  return total;
}

}  // namespace twigsim::kge
