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
#include <set>

#include <doctest.h>

#include "twigsim/errors.hpp"
#include "twigsim/grid_runner.hpp"
#include "twigsim/kge.hpp"
#include "twigsim/rng.hpp"
#include "twigsim/run_record.hpp"
#include "twigsim/synth_oracle.hpp"
#include "unit/support.hpp"

using namespace twigsim;
using namespace twigsim::kge;
using features::HyperparamConfig;
using features::LossKind;
using features::Sampler;

namespace {

ComplexEmbeddings random_embeddings(std::size_t ne, std::size_t nr, std::size_t d,
                                    std::uint64_t seed, bool real_only = false) {
  Rng rng(seed);
  ComplexEmbeddings e(ne, nr, d);
  for (auto* t : {&e.entity_re, &e.entity_im, &e.relation_re, &e.relation_im}) {
    for (double& v : *t) v = standard_normal(rng);
  }
  if (real_only) {
    std::fill(e.entity_im.begin(), e.entity_im.end(), 0.0);
    std::fill(e.relation_im.begin(), e.relation_im.end(), 0.0);
  }
  return e;
}

// Complex trilinear product written with std::complex-free scalar algebra in
// the other association order: Re(s * (p * conj(o))).
double score_oracle(const ComplexEmbeddings& e, kg::EntityId s, kg::RelationId p,
                    kg::EntityId o) {
  double total = 0.0;
  for (std::size_t k = 0; k < e.dim; ++k) {
    const double pr = e.rel_re(p)[k], pi = e.rel_im(p)[k];
    const double orr = e.ent_re(o)[k], oi = -e.ent_im(o)[k];
    const double qr = pr * orr - pi * oi, qi = pr * oi + pi * orr;
    total += e.ent_re(s)[k] * qr - e.ent_im(s)[k] * qi;
  }
  return total;
}

// Exhaustive filtered/raw ranking straight from the definition.
std::vector<int> rank_oracle(const ComplexEmbeddings& e, const kg::KnowledgeGraph& g,
                             bool filtered) {
  std::set<kg::Triple> known;
  for (const auto* split : {&g.train, &g.valid, &g.test}) known.insert(split->begin(), split->end());
  std::vector<int> ranks;
  for (const auto& t : g.valid) {
    for (int side = 0; side < 2; ++side) {
      const double truth = score_oracle(e, t.subject, t.predicate, t.object);
      int greater = 0, equal = 0;
      for (kg::EntityId x = 0; x < g.num_entities(); ++x) {
        kg::Triple c = t;
        (side == 0 ? c.subject : c.object) = x;
        if (c != t && filtered && known.count(c)) continue;
        const double sc = score_oracle(e, c.subject, c.predicate, c.object);
        if (c == t || sc == truth) {
          ++equal;
        } else if (sc > truth) {
          ++greater;
        }
      }
      // mid-point of the tied block, half rounded up
      ranks.push_back(static_cast<int>(std::ceil(greater + (equal + 1) / 2.0)));
    }
  }
  return ranks;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("score examples by hand") {
  ComplexEmbeddings e(3, 1, 2);
  CHECK(score(e, 0, 0, 1) == 0.0);
  e.entity_re = {1, 2, 2, 1, 0, 0};
  e.relation_re = {3, 1};
  CHECK(score(e, 0, 0, 1) == 8.0);

  ComplexEmbeddings c(2, 1, 1);
  c.entity_re = {1, 0};
  c.entity_im = {1, 1};
  c.relation_re = {1};
  c.relation_im = {0};
  CHECK(score(c, 0, 0, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("score agrees with an independent complex product") {
  const auto e = random_embeddings(6, 3, 7, 11);
  for (kg::EntityId s = 0; s < 6; ++s) {
    for (kg::EntityId o = 0; o < 6; ++o) {
      CHECK(std::abs(score(e, s, 1, o) - score_oracle(e, s, 1, o)) < 1e-12);
    }
  }
}

TEST_CASE("zero imaginary parts reduce to DistMult") {
  const auto e = random_embeddings(5, 2, 16, 3, true);
  for (kg::EntityId s = 0; s < 5; ++s) {
    for (kg::EntityId o = 0; o < 5; ++o) {
      double dm = 0.0;
      for (std::size_t k = 0; k < 16; ++k) dm += e.ent_re(s)[k] * e.rel_re(0)[k] * e.ent_re(o)[k];
      CHECK(std::abs(score(e, s, 0, o) - dm) < 1e-12);
    }
  }
}

TEST_CASE("conjugate relation swaps subject and object") {
  auto e = random_embeddings(4, 2, 9, 5);
  ComplexEmbeddings conj = e;
  for (double& v : conj.relation_im) v = -v;
  for (kg::EntityId s = 0; s < 4; ++s) {
    for (kg::EntityId o = 0; o < 4; ++o) {
      CHECK(std::abs(score(e, s, 1, o) - score(conj, o, 1, s)) < 1e-12);
    }
  }
}

TEST_CASE("N3 penalty") {
  const double re[] = {3.0}, im[] = {4.0};
  CHECK(n3_row(re, im) == doctest::Approx(125.0));
  const double z[] = {0.0};
  CHECK(n3_row(z, z) == 0.0);
  const auto e = random_embeddings(3, 1, 5, 9);
  std::vector<double> r2(e.ent_re(0).begin(), e.ent_re(0).end());
  std::vector<double> i2(e.ent_im(0).begin(), e.ent_im(0).end());
  const double base = n3_row(r2, i2);
  for (double& v : r2) v *= 1.7;
  for (double& v : i2) v *= 1.7;
  CHECK(n3_row(r2, i2) == doctest::Approx(base * 1.7 * 1.7 * 1.7));

  // rows of s, p, o for each triple, with multiplicity
  const std::vector<kg::Triple> ts = {{0, 0, 1}, {0, 0, 2}};
  const double want = 2 * n3_row(e.ent_re(0), e.ent_im(0)) + 2 * n3_row(e.rel_re(0), e.rel_im(0)) +
                      n3_row(e.ent_re(1), e.ent_im(1)) + n3_row(e.ent_re(2), e.ent_im(2));
  CHECK(n3_penalty(e, ts) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("negative samplers") {
  const std::vector<kg::NamedTriple> train = {{"a", "r", "b"}, {"c", "r", "b"}, {"a", "s", "c"}};
  const auto g = kg::build_graph(train, {}, {});
  const kg::Triple pos = g.train[0];
  Rng rng(1);
  for (auto strategy : features::kSamplers) {
    const NegativeSampler sampler(g, strategy);
    for (int npp : {5, 25, 125}) CHECK(sampler.sample(pos, npp, rng).size() == std::size_t(npp));
  }

  const NegativeSampler bern(g, Sampler::kBernoulli);
  CHECK(bern.head_corruption_probability(0) == doctest::Approx(1.0 / 3.0));
  const int draws = 10000;
  int heads = 0;
  for (int i = 0; i < draws; ++i) {
    heads += bern.sample(pos, 1, rng)[0].slot == CorruptedSlot::kHead;
  }
  const double p = 1.0 / 3.0;
  const double se = std::sqrt(p * (1 - p) / draws);
  CHECK(std::abs(heads / double(draws) - p) < 3 * se);

  const NegativeSampler typed(g, Sampler::kPseudoTyped);
  CHECK(typed.tail_pool(0) == std::vector<kg::EntityId>{1});
  CHECK(typed.head_pool(0) == std::vector<kg::EntityId>{0, 2});
  // singleton tail pool falls back to uniform over all entities
  std::set<kg::EntityId> tails, head_draws;
  for (int i = 0; i < 2000; ++i) {
    for (const auto& n : typed.sample(pos, 1, rng)) {
      if (n.slot == CorruptedSlot::kTail) tails.insert(n.triple.object);
      if (n.slot == CorruptedSlot::kHead) head_draws.insert(n.triple.subject);
    }
  }
  CHECK(tails.size() == 3);
  CHECK(head_draws == std::set<kg::EntityId>{0, 2});

  const NegativeSampler basic(g, Sampler::kBasic);
  int basic_heads = 0;
  for (int i = 0; i < draws; ++i) basic_heads += basic.sample(pos, 1, rng)[0].slot == CorruptedSlot::kHead;
  CHECK(std::abs(basic_heads / double(draws) - 0.5) < 3 * std::sqrt(0.25 / draws));
}

TEST_CASE("loss values") {
  const double pos[] = {2.0}, neg[] = {0.0};
  CHECK(kge_loss(LossKind::kMarginRanking, pos, neg, 1.0).value == 0.0);
  const double p0[] = {0.0}, n0[] = {0.0};
  CHECK(kge_loss(LossKind::kCrossEntropy, p0, n0, 0).value == doctest::Approx(std::log(2.0)));
  const double big[] = {60.0}, small[] = {-60.0};
  CHECK(kge_loss(LossKind::kBCEWithLogits, big, small, 0).value < 1e-20);
  CHECK(kge_loss(LossKind::kBCEWithLogits, p0, n0, 0).value == doctest::Approx(std::log(2.0)));

  // two positives, two negatives each
  const double ps[] = {1.0, -0.5}, ns[] = {0.2, 1.5, -1.0, 0.0};
  const double mr = (std::max(0.0, 0.5 + 0.2 - 1.0) + std::max(0.0, 0.5 + 1.5 - 1.0) +
                     std::max(0.0, 0.5 - 1.0 + 0.5) + std::max(0.0, 0.5 + 0.0 + 0.5)) / 4;
  CHECK(kge_loss(LossKind::kMarginRanking, ps, ns, 0.5).value == doctest::Approx(mr));
  auto sp = [](double x) { return std::log1p(std::exp(x)); };
  const double bce = (sp(-1.0) + sp(0.5) + sp(0.2) + sp(1.5) + sp(-1.0) + sp(0.0)) / 6;
  CHECK(kge_loss(LossKind::kBCEWithLogits, ps, ns, 0).value == doctest::Approx(bce));
  auto lse = [](double a, double b, double c) { return std::log(std::exp(a) + std::exp(b) + std::exp(c)); };
  const double ce = ((lse(1.0, 0.2, 1.5) - 1.0) + (lse(-0.5, -1.0, 0.0) + 0.5)) / 2;
  CHECK(kge_loss(LossKind::kCrossEntropy, ps, ns, 0).value == doctest::Approx(ce));
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(4);
  for (auto kind : {LossKind::kMarginRanking, LossKind::kBCEWithLogits, LossKind::kCrossEntropy}) {
    std::vector<double> ps(3), ns(15);
    for (double& v : ps) v = 2 * standard_normal(rng);
    for (double& v : ns) v = 2 * standard_normal(rng);
    const auto lv = kge_loss(kind, ps, ns, 1.0);
    const double h = 1e-6;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto up = ps, dn = ps;
      up[i] += h;
      dn[i] -= h;
      const double fd = (kge_loss(kind, up, ns, 1.0).value - kge_loss(kind, dn, ns, 1.0).value) / (2 * h);
      CHECK(std::abs(fd - lv.grad_positive[i]) < 1e-6);
    }
    for (std::size_t i = 0; i < ns.size(); ++i) {
      auto up = ns, dn = ns;
      up[i] += h;
      dn[i] -= h;
      const double fd = (kge_loss(kind, ps, up, 1.0).value - kge_loss(kind, ps, dn, 1.0).value) / (2 * h);
      CHECK(std::abs(fd - lv.grad_negative[i]) < 1e-6);
    }
  }
}

TEST_CASE("batch objective: value and gradient") {
  const auto g = testing::toy_graph();
  Rng rng(21);
  for (auto kind : {LossKind::kMarginRanking, LossKind::kBCEWithLogits, LossKind::kCrossEntropy}) {
    HyperparamConfig cfg;
    cfg.loss = kind;
    cfg.margin = kind == LossKind::kMarginRanking ? 1.0 : 0.0;
    cfg.reg_coefficient = 0.05;
    cfg.negatives_per_positive = 5;
    auto emb = random_embeddings(g.num_entities(), g.num_relations(), 4, 17 + int(kind));
    for (auto* t : {&emb.entity_re, &emb.entity_im, &emb.relation_re, &emb.relation_im}) {
      for (double& v : *t) v *= 0.5;
    }
    const NegativeSampler sampler(g, Sampler::kBasic);
    std::vector<Negative> negs;
    for (const auto& t : g.train) sampler.sample(t, 5, rng, negs);

    std::vector<double> ps, ns;
    for (const auto& t : g.train) ps.push_back(score(emb, t.subject, t.predicate, t.object));
    for (const auto& n : negs) ns.push_back(score(emb, n.triple.subject, n.triple.predicate, n.triple.object));
    const double want = kge_loss(kind, ps, ns, cfg.margin).value +
                        cfg.reg_coefficient * n3_penalty(emb, g.train) / double(g.train.size());

    ComplexEmbeddings grad;
    const double got = batch_objective(emb, cfg, g.train, negs, grad);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));

    const double h = 1e-6;
    double worst = 0.0;
    for (auto member : {&ComplexEmbeddings::entity_re, &ComplexEmbeddings::entity_im,
                        &ComplexEmbeddings::relation_re, &ComplexEmbeddings::relation_im}) {
      for (std::size_t i = 0; i < (emb.*member).size(); ++i) {
        ComplexEmbeddings up = emb, dn = emb, scratch;
        (up.*member)[i] += h;
        (dn.*member)[i] -= h;
        const double fd = (batch_objective(up, cfg, g.train, negs, scratch) -
                           batch_objective(dn, cfg, g.train, negs, scratch)) / (2 * h);
        worst = std::max(worst, relative_error(fd, (grad.*member)[i]));
      }
    }
    CHECK_MESSAGE(worst < 1e-4, "loss ", features::to_string(kind), " worst ", worst);
  }
}

TEST_CASE("realistic tie rule") {
  CHECK(realistic_rank(0, 1) == 1);
  CHECK(realistic_rank(3, 1) == 4);
  CHECK(realistic_rank(0, 2) == 2);  // 1.5 rounds up
  CHECK(realistic_rank(0, 3) == 2);
  CHECK(realistic_rank(0, 135) == 68);
  CHECK(realistic_rank(2, 4) == 5);  // 2 + 2.5
}

TEST_CASE("toy ranks by hand") {
  const auto g = testing::toy_graph();
  // dim 1, real only: a=1, b=2, c=3; r=1, s=-1, so score = s*p*o.
  ComplexEmbeddings e(3, 2, 1);
  e.entity_re = {1, 2, 3};
  e.relation_re = {1, -1};
  // (?,s,b): a=-2 b=-4 c=-6 -> 1.  (a,s,?): a=-1 beats b=-2 -> 2.
  // (?,r,a): c=3 beats b=2 but (c,r,a) is known -> 1 filtered, 2 raw.
  // (b,r,?): b=4, c=6 beat a=2 -> 3.
  CHECK(evaluate_ranks(e, g, RankingMode::kFiltered) == std::vector<int>{1, 2, 1, 3});
  CHECK(evaluate_ranks(e, g, RankingMode::kRaw) == std::vector<int>{1, 2, 2, 3});
  const auto run = evaluate_run(e, g, RankingMode::kFiltered, {}, 0, 1);
  CHECK(run.mrr == doctest::Approx(17.0 / 24.0).epsilon(1e-15));

  ComplexEmbeddings zero(3, 2, 1);
  // all tie; (?,r,a) has c filtered so two candidates tie
  CHECK(evaluate_ranks(zero, g, RankingMode::kFiltered) == std::vector<int>{2, 2, 2, 2});
  CHECK(evaluate_ranks(zero, g, RankingMode::kRaw) == std::vector<int>{2, 2, 2, 2});
}

TEST_CASE("ranks agree with an exhaustive oracle") {
  const auto g = testing::umls_graph();
  const auto e = random_embeddings(g.num_entities(), g.num_relations(), 8, 99);
  CHECK(evaluate_ranks(e, g, RankingMode::kFiltered) == rank_oracle(e, g, true));
  CHECK(evaluate_ranks(e, g, RankingMode::kRaw) == rank_oracle(e, g, false));
}

TEST_CASE("MRR and run records") {
  const int r[] = {1, 2, 4};
  CHECK(mean_reciprocal_rank(r) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  RunRecord rec;
  rec.ranks = {1, 2, 4};
  rec.mrr = 7.0 / 12.0;
  rec.config_index = 12;
  rec.seed = 3;
  CHECK_NOTHROW(validate(rec, 4));
  CHECK_THROWS_AS(validate(rec, 3), DataError);
  rec.mrr = 0.5;
  CHECK_THROWS_AS(validate(rec, 4), DataError);
  rec.mrr = 7.0 / 12.0;
  const auto dir = testing::scratch_dir("runrec");
  write_run(rec, dir);
  CHECK(run_file_name(12, 3) == "cfg12_seed3.json");
  const auto back = read_run(dir / "cfg12_seed3.json");
  CHECK(back.ranks == rec.ranks);
  CHECK(back.mrr == rec.mrr);
  CHECK(back.config == rec.config);
}

TEST_CASE("parameter accounting") {
  const auto grid = features::expand_grid();
  CHECK(parameter_accounting(grid, 135, 46) == 29'322'000);
  CHECK(parameter_accounting(std::span(grid).first(1), 135, 46) == 9'050);
  CHECK(parameter_accounting({}, 135, 46) == 0);
  CHECK(ComplexEmbeddings(135, 46, 50).real_parameter_count() == 18'100);
}

TEST_CASE("training on the toy graph") {
  const auto g = testing::toy_graph();
  HyperparamConfig cfg;
  cfg.dim = 50;
  const auto a = train_kge(g, cfg, 5);
  const auto b = train_kge(g, cfg, 5);
  CHECK_FALSE(a.diverged);
  CHECK(a.epochs_completed == 100);
  CHECK(a.embeddings.all_finite());
  CHECK(a.embeddings.entity_re == b.embeddings.entity_re);
  const auto run = evaluate_run(a.embeddings, g, RankingMode::kFiltered, cfg, 0, 5);
  CHECK(run.ranks.size() == 4);
  CHECK(train_kge(g, cfg, 6).embeddings.entity_re != a.embeddings.entity_re);

  HyperparamConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  KgeSettings few;
  few.epochs = 3;
  const auto z = train_kge(g, frozen, 5, few);
  KgeSettings none;
  none.epochs = 0;
  const auto init = train_kge(g, frozen, 5, none);
  CHECK(z.embeddings.entity_re == init.embeddings.entity_re);
  CHECK(z.embeddings.relation_im == init.embeddings.relation_im);

  // init scale 1/sqrt(2d)
  Rng rng(3);
  const auto big = init_embeddings(2000, 10, 50, rng);
  double ss = 0;
  for (double v : big.entity_re) ss += v * v;
  CHECK(std::sqrt(ss / double(big.entity_re.size())) == doctest::Approx(0.1).epsilon(0.02));
}

TEST_CASE("grid runner writes, reuses, and keeps going") {
  const auto g = testing::toy_graph();
  const auto grid = features::expand_grid();
  std::vector<GridTask> tasks = {{0, grid[0], 1}, {600, grid[600], 1}, {0, grid[0], 2}};
  GridOptions opts;
  opts.settings.epochs = 5;
  opts.workers = 2;
  const auto dir = testing::scratch_dir("grid");
  const auto s1 = run_grid(g, tasks, dir, opts);
  CHECK(s1.completed == 3);
  CHECK(s1.reused == 0);
  const auto runs = read_run_dir(dir);
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].seed == 1);
  CHECK(runs[2].seed == 2);
  CHECK(runs[0].metadata.contains("query_order"));
  const auto s2 = run_grid(g, tasks, dir, opts);
  CHECK(s2.reused == 3);
  const auto again = run_task(g, tasks[1], opts.settings, RankingMode::kFiltered);
  CHECK(again.ranks == read_run(dir / "cfg600_seed1.json").ranks);
  CHECK(task_seed(1, 0) != task_seed(2, 0));

  // A diverging config is recorded as failed; the sweep continues.
  HyperparamConfig wild = grid[0];
  wild.learning_rate = 1e300;
  std::vector<GridTask> bad = {{0, wild, 7}, {1, grid[1], 7}};
  const auto dir2 = testing::scratch_dir("grid_fail");
  const auto s3 = run_grid(g, bad, dir2, opts);
  CHECK(s3.failed == 1);
  CHECK(s3.completed == 1);
  CHECK_FALSE(read_run(dir2 / "cfg0_seed7.json").ok());
}

TEST_CASE("synthetic oracle") {
  const auto g = testing::umls_graph();
  const kg::StructIndex idx(g);
  SynthOracleWeights zero;
  std::vector<double> row(features::kRowWidth, 0.3);
  CHECK(synth_rank(row, 135, zero) == 68);  // round(67.5) half away from zero
  const auto w = SynthOracleWeights::standard();
  CHECK(synth_rank(row, 135, w) == synth_rank(row, 135, w));
  const auto top = static_cast<std::size_t>(
      std::max_element(w.weights.begin(), w.weights.end()) - w.weights.begin());
  CHECK(w.weights[top] > 0);
  int last = 0;
  for (double x = -4; x <= 4; x += 0.05) {
    row[top] = x;
    const int r = synth_rank(row, 135, w);
    CHECK(r >= last);
    CHECK(r >= 1);
    CHECK(r <= 135);
    last = r;
  }
  const std::size_t configs[] = {0, 500, 1214};
  const int seeds[] = {1, 2};
  const auto runs = synth_runs(g, idx, configs, seeds, w);
  REQUIRE(runs.size() == 6);
  CHECK(runs[0].ranks.size() == 1304);
  CHECK(runs[0].ranks == runs[3].ranks);
  CHECK(runs[0].ranks != runs[1].ranks);
  for (const auto& r : runs) CHECK_NOTHROW(validate(r, 135));
}
