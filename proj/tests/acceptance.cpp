// Acceptance gate. Eight self-contained checks: formula agreement against
// independent evaluations, finite-difference gradients, exact CF against
// brute force, directional quality on planted clusters, add-cart weighting,
// evaluator properties, online/offline serving equivalence with a latency
// budget, and whole-pipeline determinism. One [PASS]/[FAIL] line per check;
// exits nonzero if any fail. Stated runtime budgets are enforced.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "simrec/simrec.hpp"

using namespace simrec;
namespace fs = std::filesystem;

namespace {

std::string strf(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return std::string(buf);
}

struct Gate {
  bool ok = true;
  std::vector<std::string> notes;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back("FAILED: " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

template <class Fn>
void run_check(const char* id, const char* label, double budget_s, int& failures, Fn&& fn) {
  Gate gate;
  auto t0 = std::chrono::steady_clock::now();
  try {
    fn(gate);
  } catch (const std::exception& e) {
    gate.ok = false;
    gate.notes.push_back(std::string("exception: ") + e.what());
  }
  double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && el > budget_s)
    gate.require(false, strf("runtime %.1f s exceeds the %.0f s budget", el, budget_s));
  std::printf("[%s] %s %s (%.1f s)\n", gate.ok ? "PASS" : "FAIL", id, label, el);
  for (const auto& n : gate.notes) std::printf("        %s\n", n.c_str());
  std::fflush(stdout);
  if (!gate.ok) ++failures;
}

AttributeStore parse_attributes(const std::string& tsv) {
  AttributeStore attrs;
  for (auto line : split(tsv, '\n')) {
    if (line.empty()) continue;
    auto f = split(line, '\t');
    attrs.add(std::string(f[0]), std::vector<std::string_view>(f.begin() + 1, f.end()));
  }
  return attrs;
}

double report_ratio(const EvalReport& rep, const std::string& ranker, int k,
                    const std::string& metric) {
  for (const auto& r : rep.rows)
    if (r.ranker == ranker && r.k == k && r.metric == metric && !r.skipped) return r.ratio;
  throw EvalError("no report row for " + ranker + " at K=" + std::to_string(k));
}

EmbeddingModel random_embedding(int vocab, int dim, Rng& rng) {
  EmbeddingModel m = init_embedding_model(vocab, dim, rng);
  for (auto& x : m.input) x = rng.uniform_range(-1.0, 1.0);
  for (auto& x : m.weight) x = rng.uniform_range(-1.0, 1.0);
  for (auto& x : m.bias) x = rng.uniform_range(-0.5, 0.5);
  return m;
}

PersonalizedModel random_personalized(int vocab, int dim, int window, Rng& rng) {
  PersonalizedConfig pc;
  pc.dim = dim;
  pc.window = window;
  PersonalizedModel m = init_personalized_model(vocab, pc, rng);
  for (auto& x : m.emb.input) x = rng.uniform_range(-1.0, 1.0);
  for (auto& x : m.emb.weight) x = rng.uniform_range(-1.0, 1.0);
  for (auto& w : m.pos_weights) w = rng.uniform_range(0.25, 1.75);
  return m;
}

// ---------------------------------------------------------------------------
// C1: closed-form pieces against independently coded evaluations.

void check_formulas(Gate& g) {
  Rng rng(101);
  int bad = 0;

  for (int t = 0; t < 150; ++t) {  // jaccard and the blend
    auto make_set = [&](int cap, int universe) {
      std::set<int> s;
      int cnt = rng.uniform_int(cap + 1);
      for (int i = 0; i < cnt; ++i) s.insert(rng.uniform_int(universe));
      return s;
    };
    std::set<int> sa = make_set(12, 30), sb = make_set(12, 30);
    std::vector<int> va(sa.begin(), sa.end()), vb(sb.begin(), sb.end());
    double c = covisit_jaccard(va, vb);
    double f = attribute_jaccard(va, vb);
    double alpha = rng.uniform_real();
    if (std::fabs(c - oracle::jaccard(sa, sb)) > 1e-10) ++bad;
    if (std::fabs(f - oracle::jaccard(sa, sb)) > 1e-10) ++bad;
    if (std::fabs(blended_sim(c, f, alpha) - (alpha * c + (1 - alpha) * f)) > 1e-10) ++bad;
  }
  g.require(bad == 0, strf("jaccard/blend mismatches: %d", bad));

  bad = 0;
  for (int t = 0; t < 150; ++t) {  // negative-sampling loss
    int vocab = 3 + rng.uniform_int(10);
    EmbeddingModel m = random_embedding(vocab, 1 + rng.uniform_int(8), rng);
    int center = rng.uniform_int(vocab), context = rng.uniform_int(vocab);
    std::vector<int> negs;
    for (int i = 0, nn = 1 + rng.uniform_int(6); i < nn; ++i) negs.push_back(rng.uniform_int(vocab));
    double got = sgns_loss(center, context, negs, m);
    if (std::fabs(got - oracle::sgns_loss(m, center, context, negs)) > 1e-9) ++bad;
  }
  g.require(bad == 0, strf("embedding loss mismatches: %d", bad));

  bad = 0;
  for (int t = 0; t < 150; ++t) {  // pooled user vector, scores, softmax loss
    int vocab = 4 + rng.uniform_int(10);
    int window = 1 + rng.uniform_int(6);
    PersonalizedModel m = random_personalized(vocab, 1 + rng.uniform_int(8), window, rng);
    std::vector<int> wi;
    for (int i = 0, n = rng.uniform_int(window + 1); i < n; ++i) wi.push_back(rng.uniform_int(vocab));
    std::vector<double> u = user_vector(m, wi);
    std::vector<double> want_u = oracle::user_vector(m, wi);
    for (int k = 0; k < m.dim(); ++k)
      if (std::fabs(u[static_cast<size_t>(k)] - want_u[static_cast<size_t>(k)]) > 1e-9) ++bad;

    int cand = rng.uniform_int(vocab);
    double direct = 0.0;
    for (int k = 0; k < m.dim(); ++k)
      direct += want_u[static_cast<size_t>(k)] *
                m.emb.input[static_cast<size_t>(cand) * m.dim() + k];
    if (std::fabs(interest_score(m, u, cand) - direct) > 1e-9) ++bad;

    std::vector<double> z;
    for (int i = 0, n = 1 + rng.uniform_int(10); i < n; ++i) z.push_back(rng.uniform_range(-4, 4));
    if (std::fabs(softmax_ce_loss(z) - oracle::softmax_ce(z)) > 1e-9) ++bad;

    if (!wi.empty()) {  // weighted case loss end to end
      int next = rng.uniform_int(vocab);
      std::vector<int> negs{rng.uniform_int(vocab), rng.uniform_int(vocab)};
      double omega = t % 2 == 0 ? 1.0 : 2.0;
      std::vector<double> zz;
      auto wdot = [&](int item) {
        double s = 0.0;
        for (int k = 0; k < m.dim(); ++k)
          s += want_u[static_cast<size_t>(k)] *
               m.emb.weight[static_cast<size_t>(item) * m.dim() + k];
        return s;
      };
      zz.push_back(wdot(next));
      for (int neg : negs) zz.push_back(wdot(neg));
      double got = personalized_forward_backward(m, wi, next, negs, omega).weighted_loss;
      if (std::fabs(got - omega * oracle::softmax_ce(zz)) > 1e-9) ++bad;
    }
  }
  g.require(bad == 0, strf("pooling/softmax mismatches: %d", bad));

  bad = 0;
  for (int t = 0; t < 120; ++t) {  // hit ratio vs a hand counter
    int vocab = 30;
    CandidatePool pools;
    pools.pool_size = 10;
    pools.pools.resize(static_cast<size_t>(vocab));
    for (int i = 0; i < vocab; ++i)
      for (int j = 1; j <= 10; ++j) pools.pools[static_cast<size_t>(i)].push_back((i + j) % vocab);
    SimilarityTable table;
    table.rows.resize(static_cast<size_t>(vocab));
    for (int i = 0; i < vocab; ++i) {
      for (int j = 0; j < 12; ++j)
        table.rows[static_cast<size_t>(i)].push_back({rng.uniform_int(vocab), rng.uniform_real()});
      sort_neighbors(table.rows[static_cast<size_t>(i)]);
    }
    CfTableRanker ranker(table);

    std::vector<EvalCase> cases(static_cast<size_t>(5 + rng.uniform_int(36)));
    for (size_t i = 0; i < cases.size(); ++i) {
      cases[i].index = static_cast<std::int64_t>(i);
      cases[i].current = rng.uniform_int(vocab);
      cases[i].next = rng.uniform_int(vocab);
      cases[i].next_is_addcart = rng.bernoulli(0.4);
    }
    cases[0].next_is_addcart = true;
    int K = 1 + rng.uniform_int(10);
    for (bool cart_only : {false, true}) {
      std::int64_t hits = 0, total = 0;
      for (const auto& c : cases) {
        if (cart_only && !c.next_is_addcart) continue;
        ++total;
        RankedList top = ranker.rank(c, pools.lookup(c.current), K);
        for (const auto& e : top)
          if (e.item == c.next) {
            ++hits;
            break;
          }
      }
      double want = static_cast<double>(hits) / static_cast<double>(total);
      if (std::fabs(hit_ratio(cases, ranker, pools, K, cart_only) - want) > 1e-12) ++bad;
    }
  }
  g.require(bad == 0, strf("hit-ratio mismatches: %d", bad));
}

// ---------------------------------------------------------------------------
// C2: analytic gradients vs central finite differences, eps 1e-4, both
// omega branches, d <= 8, window <= 4.

void check_gradients(Gate& g) {
  const double eps = 1e-4, tol = 1e-4;
  auto rel_ok = [&](double a, double b) {
    return std::fabs(a - b) <= tol * std::max({std::fabs(a), std::fabs(b), 1e-6});
  };
  Rng rng(202);

  int bad = 0, instances = 0;
  for (int t = 0; t < 120; ++t) {
    int d = 1 + rng.uniform_int(8);
    int vocab = 4 + rng.uniform_int(8);
    EmbeddingModel m = random_embedding(vocab, d, rng);
    int center = rng.uniform_int(vocab), context = rng.uniform_int(vocab);
    std::vector<int> negs;
    for (int i = 0, nn = 1 + rng.uniform_int(5); i < nn; ++i) negs.push_back(rng.uniform_int(vocab));

    SgnsStep step = sgns_forward_backward(center, context, negs, m);
    std::map<std::pair<int, int>, double> wgrad;
    std::map<int, double> bgrad;
    for (const auto& [x, gg] : step.g) {
      for (int k = 0; k < d; ++k)
        wgrad[{x, k}] += gg * m.input[static_cast<size_t>(center) * d + k];
      bgrad[x] += gg;
    }
    auto loss = [&]() { return sgns_loss(center, context, negs, m); };
    for (int k = 0; k < d; ++k) {
      double fd = oracle::finite_difference(m.input[static_cast<size_t>(center) * d + k], loss, eps);
      if (!rel_ok(step.grad_center[static_cast<size_t>(k)], fd)) ++bad;
    }
    for (const auto& [key, val] : wgrad) {
      double fd = oracle::finite_difference(
          m.weight[static_cast<size_t>(key.first) * d + key.second], loss, eps);
      if (!rel_ok(val, fd)) ++bad;
    }
    for (const auto& [item, val] : bgrad) {
      double fd = oracle::finite_difference(m.bias[static_cast<size_t>(item)], loss, eps);
      if (!rel_ok(val, fd)) ++bad;
    }
    ++instances;
  }
  g.require(bad == 0, strf("embedding gradient cells off: %d", bad));
  g.note(strf("embedding instances: %d", instances));

  for (double omega : {1.0, 2.0}) {
    bad = 0;
    instances = 0;
    for (int t = 0; t < 100; ++t) {
      int d = 1 + rng.uniform_int(8);
      int window = 1 + rng.uniform_int(4);
      int vocab = 4 + rng.uniform_int(8);
      PersonalizedModel m = random_personalized(vocab, d, window, rng);
      std::vector<int> wi;
      for (int i = 0, n = 1 + rng.uniform_int(window); i < n; ++i) wi.push_back(rng.uniform_int(vocab));
      int next = rng.uniform_int(vocab);
      std::vector<int> negs;
      for (int i = 0, nn = 1 + rng.uniform_int(5); i < nn; ++i) negs.push_back(rng.uniform_int(vocab));

      PersonalizedStep step = personalized_forward_backward(m, wi, next, negs, omega);
      std::map<std::pair<int, int>, double> igrad, wgrad;
      std::map<size_t, double> pgrad;
      for (const auto& [item, coeff] : step.window_coeff)
        for (int k = 0; k < d; ++k) igrad[{item, k}] += coeff * step.grad_u[static_cast<size_t>(k)];
      for (const auto& [item, gz] : step.dz)
        for (int k = 0; k < d; ++k) wgrad[{item, k}] += gz * step.u[static_cast<size_t>(k)];
      for (const auto& [slot, gp] : step.pos_grad) pgrad[slot] += gp;

      auto loss = [&]() {
        return personalized_forward_backward(m, wi, next, negs, omega).weighted_loss;
      };
      for (const auto& [key, val] : igrad) {
        double fd = oracle::finite_difference(
            m.emb.input[static_cast<size_t>(key.first) * d + key.second], loss, eps);
        if (!rel_ok(val, fd)) ++bad;
      }
      for (const auto& [key, val] : wgrad) {
        double fd = oracle::finite_difference(
            m.emb.weight[static_cast<size_t>(key.first) * d + key.second], loss, eps);
        if (!rel_ok(val, fd)) ++bad;
      }
      for (const auto& [slot, val] : pgrad) {
        double fd = oracle::finite_difference(m.pos_weights[slot], loss, eps);
        if (!rel_ok(val, fd)) ++bad;
      }
      ++instances;
    }
    g.require(bad == 0, strf("personalized gradient cells off at omega=%.0f: %d", omega, bad));
    g.note(strf("personalized instances at omega=%.0f: %d", omega, instances));
  }
}

// ---------------------------------------------------------------------------
// C3: similarity table equals the brute-force oracle exactly and is
// invariant to the shard count.

void check_cf_oracle(Gate& g) {
  Rng rng(303);
  auto same_table = [](const SimilarityTable& a, const SimilarityTable& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (size_t i = 0; i < a.rows.size(); ++i) {
      if (a.rows[i].size() != b.rows[i].size()) return false;
      for (size_t j = 0; j < a.rows[i].size(); ++j)
        if (a.rows[i][j].item != b.rows[i][j].item || a.rows[i][j].score != b.rows[i][j].score)
          return false;
    }
    return true;
  };

  int corpora = 0;
  for (int t = 0; t < 20; ++t) {
    int users = 5 + rng.uniform_int(46);
    int items = 4 + rng.uniform_int(27);
    std::vector<ClickEvent> events;
    std::int64_t ts = 0;
    for (int u = 0; u < users; ++u)
      for (int e = 0, n = 2 + rng.uniform_int(11); e < n; ++e)
        events.push_back({"u" + std::to_string(u), "i" + std::to_string(rng.uniform_int(items)),
                          ++ts, rng.bernoulli(0.15) ? EventKind::AddCart : EventKind::Click});
    AttributeStore attrs;
    for (int i = 0; i < items; ++i) {
      std::vector<std::string> toks;
      for (int a = 0, n = rng.uniform_int(4); a < n; ++a)
        toks.push_back("t" + std::to_string(rng.uniform_int(8)));
      std::vector<std::string_view> views(toks.begin(), toks.end());
      attrs.add("i" + std::to_string(i), views);
    }
    Corpus corpus = build_corpus(events);

    CfParams params;
    params.alpha = t % 2 == 0 ? 0.9 : 0.6;
    params.top_n = t % 2 == 0 ? 200 : 6;
    params.max_user_degree = t % 3 == 0 ? 5 : 500;
    SimilarityTable want =
        oracle::brute_force_table(corpus, attrs, params.alpha, params.top_n, params.max_user_degree);
    for (int shards : {1, 2, 4}) {
      params.shards = shards;
      SimilarityTable got = compute_similarity_table(corpus, attrs, params);
      g.require(same_table(got, want),
                strf("corpus %d (%d users, %d items) differs from brute force at shards=%d", t,
                     users, items, shards));
    }
    ++corpora;
  }
  g.note(strf("corpora checked: %d, shard counts 1/2/4", corpora));
}

// ---------------------------------------------------------------------------
// C4: planted-cluster corpus, 7+1 day split. Personalized and item2vec must
// beat the random baseline at top-5; personalized >= 0.9 * item2vec.

void check_ordering(Gate& g) {
  SynthParams sp;  // 2000 users, 1000 items, 8 clusters, 8 days
  sp.seed = 424;
  SynthOutput synth = generate_synth(sp);
  auto [train, test] = temporal_split(synth.events, 7 * kDayMs);
  AttributeStore attrs = parse_attributes(synth.attributes_tsv);

  CfParams cfp;
  SimilarityTable table = compute_similarity_table(train, attrs, cfp);
  AttributeIndex aidx = build_attribute_index(train.items, attrs, cfp.top_n);
  CandidatePool pools = build_pools(table, aidx, {}, PoolQuotas{}, 200);

  TrainConfig ic;
  ic.seed = 424;
  EmbeddingModel i2v = train_item2vec(train, ic);

  PersonalizedConfig pc;
  pc.seed = 424;
  pc.omega = 1.0;
  PersonalizedModel pers = train_personalized(train, pc);

  auto cases = build_cases(train, test, EvalOptions{});
  PersonalizedRanker r_pers(pers);
  Item2vecRanker r_i2v(i2v);
  RandomRanker r_rand(424);
  EvalReport rep = run_report(
      cases, pools,
      {{"personalized", &r_pers}, {"item2vec", &r_i2v}, {"random", &r_rand}}, {5}, 1);

  double p = report_ratio(rep, "personalized", 5, "click");
  double v = report_ratio(rep, "item2vec", 5, "click");
  double r = report_ratio(rep, "random", 5, "click");
  g.note(strf("top-5 hit ratio over %zu cases: personalized %.4f, item2vec %.4f, random %.4f",
              cases.size(), p, v, r));
  g.require(p > r, "personalized must beat the random baseline");
  g.require(v > r, "item2vec must beat the random baseline");
  g.require(p >= 0.9 * v, "personalized must reach at least 0.9x item2vec");
}

// ---------------------------------------------------------------------------
// C5: corpus whose add-cart transitions target a distinct item slice.
// omega=2 must strictly beat omega=1 on the add-cart top-5 ratio.
// Small dim keeps click and cart transitions competing for capacity,
// which is where the omega reweighting actually changes the ranking.

void check_addcart_direction(Gate& g) {
  SynthParams sp;
  sp.seed = 555;
  sp.addcart_rate = 0.15;
  sp.cart_items_per_cluster = 4;
  sp.zipf_s = 1.0;
  SynthOutput synth = generate_synth(sp);
  auto [train, test] = temporal_split(synth.events, 7 * kDayMs);
  AttributeStore attrs = parse_attributes(synth.attributes_tsv);

  CfParams cfp;
  SimilarityTable table = compute_similarity_table(train, attrs, cfp);
  AttributeIndex aidx = build_attribute_index(train.items, attrs, cfp.top_n);
  CandidatePool pools = build_pools(table, aidx, {}, PoolQuotas{}, 200);

  PersonalizedConfig base;
  base.seed = 77;
  base.dim = 8;
  base.omega = 1.0;
  PersonalizedConfig boosted = base;
  boosted.omega = 2.0;
  PersonalizedModel m1 = train_personalized(train, base);
  PersonalizedModel m2 = train_personalized(train, boosted);

  auto cases = build_cases(train, test, EvalOptions{});
  std::int64_t carts = 0;
  for (const auto& c : cases) carts += c.next_is_addcart ? 1 : 0;
  g.require(carts > 100, strf("too few add-cart cases to judge: %lld",
                              static_cast<long long>(carts)));

  PersonalizedRanker r1(m1), r2(m2);
  double h1 = hit_ratio(cases, r1, pools, 5, /*addcart_only=*/true);
  double h2 = hit_ratio(cases, r2, pools, 5, /*addcart_only=*/true);
  g.note(strf("add-cart top-5 over %lld cart cases: omega=1 %.4f, omega=2 %.4f",
              static_cast<long long>(carts), h1, h2));
  g.require(h2 > h1, "omega=2 must strictly beat omega=1 on the add-cart metric");
}

// ---------------------------------------------------------------------------
// C6: monotone in K for every ranker, oracle ceiling 1.0, and the random
// baseline within 3 binomial sigma of 5/200 over 1e4 in-pool cases.

void check_evaluator(Gate& g) {
  const int vocab = 300, pool_n = 200, n_cases = 10000;
  Rng rng(606);

  CandidatePool pools;
  pools.pool_size = pool_n;
  pools.pools.resize(static_cast<size_t>(vocab));
  for (int i = 0; i < vocab; ++i)
    for (int j = 1; j <= pool_n; ++j)
      pools.pools[static_cast<size_t>(i)].push_back((i + j) % vocab);

  std::vector<EvalCase> cases(static_cast<size_t>(n_cases));
  for (int i = 0; i < n_cases; ++i) {
    auto& c = cases[static_cast<size_t>(i)];
    c.index = i;
    c.current = rng.uniform_int(vocab);
    c.next = pools.pools[static_cast<size_t>(c.current)][static_cast<size_t>(rng.uniform_int(pool_n))];
    c.next_is_addcart = rng.bernoulli(0.3);
    for (int h = 0, n = rng.uniform_int(8); h < n; ++h) c.recents.push_back(rng.uniform_int(vocab));
  }

  SimilarityTable table;  // random scores, just to have a third live ranker
  table.rows.resize(static_cast<size_t>(vocab));
  for (int i = 0; i < vocab; ++i) {
    for (int j = 0; j < 80; ++j)
      table.rows[static_cast<size_t>(i)].push_back({rng.uniform_int(vocab), rng.uniform_real()});
    sort_neighbors(table.rows[static_cast<size_t>(i)]);
  }
  OracleRanker oracle_ranker;
  RandomRanker random_ranker(9090);
  CfTableRanker cf_ranker(table);
  EvalReport rep = run_report(cases, pools,
                              {{"oracle", &oracle_ranker},
                               {"random", &random_ranker},
                               {"cf", &cf_ranker}},
                              {5, 10, 20}, 1);

  std::map<std::pair<std::string, std::string>, std::map<int, double>> grid;
  for (const auto& row : rep.rows) grid[{row.ranker, row.metric}][row.k] = row.ratio;
  for (const auto& [key, by_k] : grid) {
    double prev = -1.0;
    for (const auto& [k, ratio] : by_k) {
      g.require(ratio >= prev, strf("%s/%s ratio fell when K grew to %d", key.first.c_str(),
                                    key.second.c_str(), k));
      prev = ratio;
    }
  }
  for (const auto& [key, by_k] : grid)
    if (key.first == "oracle")
      for (const auto& [k, ratio] : by_k)
        g.require(ratio == 1.0, strf("oracle ratio at K=%d is %.6f, not 1.0", k, ratio));

  double r5 = report_ratio(rep, "random", 5, "click");
  double sigma = std::sqrt(0.025 * 0.975 / n_cases);
  g.note(strf("random top-5 ratio %.4f, expected 0.0250 +- %.4f (3 sigma)", r5, 3 * sigma));
  g.require(std::fabs(r5 - 0.025) <= 3 * sigma, "random baseline outside the 3-sigma band");
}

// ---------------------------------------------------------------------------
// C7: online similar_items must equal offline ranking bit for bit over 1000
// randomized sessions; p99 latency on a 200-candidate pool at d=64 under
// 10 ms; throughput reported as informational.

void check_serving(Gate& g) {
  SynthParams sp;
  sp.users = 1200;
  sp.items = 1000;
  sp.seed = 777;
  Corpus corpus = build_corpus(generate_synth(sp).events);
  int n = corpus.items.size();
  g.require(n > 200, strf("corpus too small for 200-candidate pools: %d items", n));
  if (n <= 200) return;

  PersonalizedConfig pc;
  pc.dim = 64;
  pc.epochs = 1;
  pc.seed = 777;
  PersonalizedModel model = train_personalized(corpus, pc);

  CandidatePool pool;
  pool.pool_size = 200;
  pool.pools.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 1; j <= 200; ++j) pool.pools[static_cast<size_t>(i)].push_back((i + j) % n);
  SimilarityTable table;
  table.rows.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 1; j <= 50; ++j)
      table.rows[static_cast<size_t>(i)].push_back({(i + j) % n, 1.0 / j});

  PersonalizedFile mf;
  mf.items = corpus.items;
  mf.model = model;
  PoolArtifact pa;
  pa.items = corpus.items;
  pa.pool = pool;
  SimilarityArtifact sa;
  sa.items = corpus.items;
  sa.table = table;
  std::int64_t fake_now = 0;
  ServingEngine engine(std::move(mf), pa, sa, ServeConfig{}, [&fake_now]() { return fake_now; });

  Rng rng(717);
  long steps = 0, mismatches = 0;
  for (int s = 0; s < 1000; ++s) {
    std::string user = "s" + std::to_string(s);
    std::vector<int> fed;
    int len = 1 + rng.uniform_int(10);
    for (int t = 0; t < len; ++t) {
      int item = rng.uniform_int(n);
      std::vector<int> expect = fed;
      if (static_cast<int>(expect.size()) > model.window())
        expect.erase(expect.begin(), expect.end() - model.window());
      SimilarResult got = engine.similar_items(user, corpus.items.id_of(item), 30);
      RankedList want = expect.empty()
                            ? rank_pool_by_row(table.rows[static_cast<size_t>(item)],
                                               pool.lookup(item), 30)
                            : rank_candidates(model, expect, item, pool.lookup(item), 30);
      const char* want_ranker = expect.empty() ? "cf" : "personalized";
      bool same = got.ranker == want_ranker && got.items.size() == want.size();
      for (size_t i = 0; same && i < want.size(); ++i)
        same = got.items[i].item == want[i].item && got.items[i].score == want[i].score;
      if (!same) ++mismatches;
      ++steps;
      fed.push_back(item);
    }
  }
  g.note(strf("sessions: 1000, steps compared: %ld", steps));
  g.require(mismatches == 0, strf("online/offline mismatches: %ld", mismatches));

  // latency of one scoring pass, pool of 200 at d=64
  const int reps = 10000;
  std::vector<std::int64_t> lat(reps);
  std::vector<int> win(8);
  volatile double guard = 0.0;
  for (int i = 0; i < reps; ++i) {
    for (auto& w : win) w = rng.uniform_int(n);
    int cur = rng.uniform_int(n);
    auto t0 = std::chrono::steady_clock::now();
    RankedList top = rank_candidates(model, win, cur, pool.lookup(cur), 30);
    auto t1 = std::chrono::steady_clock::now();
    guard = guard + top.front().score;
    lat[static_cast<size_t>(i)] =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  }
  std::sort(lat.begin(), lat.end());
  double p50_us = lat[reps / 2] / 1e3, p99_us = lat[reps / 100 * 99] / 1e3;
  g.note(strf("scoring latency: p50 %.0f us, p99 %.0f us", p50_us, p99_us));
  g.require(lat[reps / 100 * 99] < 10'000'000, "p99 scoring latency must stay under 10 ms");

  auto t0 = std::chrono::steady_clock::now();
  const int calls = 20000;
  for (int i = 0; i < calls; ++i)
    engine.similar_items("load" + std::to_string(i % 32),
                         corpus.items.id_of(rng.uniform_int(n)), 30);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  g.note(strf("end-to-end throughput: %.0f req/s single core (2000 req/s reference, informational)",
              calls / secs));
}

// ---------------------------------------------------------------------------
// C8: two full pipeline runs, fixed seed, single worker, byte-identical
// artifacts.

void check_determinism(Gate& g) {
  fs::path base = fs::temp_directory_path() / "simrec_acceptance_c8";
  fs::remove_all(base);
  fs::create_directories(base);

  SynthParams sp;
  sp.users = 300;
  sp.items = 150;
  sp.clusters = 6;
  sp.days = 4;
  sp.events_per_user = 20;
  sp.vector_dim = 8;
  sp.seed = 88;
  SynthOutput synth = generate_synth(sp);
  write_file((base / "events.tsv").string(), serialize_events(synth.events));
  write_file((base / "attributes.tsv").string(), synth.attributes_tsv);
  write_file((base / "vectors.tsv").string(), synth.vectors_tsv);

  RunConfig cfg;
  cfg.events_path = (base / "events.tsv").string();
  cfg.attributes_path = (base / "attributes.tsv").string();
  cfg.vectors_path = (base / "vectors.tsv").string();
  cfg.top_n = 40;
  cfg.pool_size = 60;
  cfg.quota_cf = 30;
  cfg.quota_attribute = 20;
  cfg.quota_fresh = 5;
  cfg.i2v_dim = 16;
  cfg.i2v_epochs = 3;
  cfg.pers_dim = 16;
  cfg.pers_window = 4;
  cfg.pers_epochs = 3;
  cfg.seed = 99;
  cfg.workers = 1;

  cfg.outdir = (base / "run_a").string();
  run_pipeline(cfg, /*quiet=*/true);
  cfg.outdir = (base / "run_b").string();
  run_pipeline(cfg, /*quiet=*/true);

  const char* artifacts[] = {"sim_table.tsv",      "pools.tsv",
                             "item2vec.model",     "personalized.model",
                             "personalized_addcart.model", "report.csv",
                             "report.txt"};
  for (const char* leaf : artifacts) {
    std::string a = read_file((base / "run_a" / leaf).string());
    std::string b = read_file((base / "run_b" / leaf).string());
    g.require(!a.empty(), strf("%s is empty", leaf));
    g.require(a == b, strf("%s differs between the two runs", leaf));
  }
  g.note("7 artifacts byte-compared across two runs");
  fs::remove_all(base);
}

}  // namespace

int main() {
  int failures = 0;
  run_check("C1", "formula agreement vs independent evaluation", 10.0, failures, check_formulas);
  run_check("C2", "gradients vs central finite differences", 30.0, failures, check_gradients);
  run_check("C3", "similarity table matches brute force, shard invariant", 10.0, failures,
            check_cf_oracle);
  run_check("C4", "planted-cluster ranking order", 300.0, failures, check_ordering);
  run_check("C5", "add-cart weighting direction", 300.0, failures, check_addcart_direction);
  run_check("C6", "evaluator properties", 0.0, failures, check_evaluator);
  run_check("C7", "serving equivalence and latency", 0.0, failures, check_serving);
  run_check("C8", "pipeline determinism", 0.0, failures, check_determinism);

  if (failures == 0)
    std::printf("all 8 checks passed\n");
  else
    std::printf("%d of 8 checks failed\n", failures);
  return failures == 0 ? 0 : 1;
}
