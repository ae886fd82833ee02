#pragma once

#include <algorithm>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "simrec/cf.hpp"
#include "simrec/ingest.hpp"
#include "simrec/item2vec.hpp"
#include "simrec/personalized.hpp"
#include "simrec/pool.hpp"
#include "simrec/rng.hpp"
#include "simrec/types.hpp"
#include "simrec/vectors.hpp"

namespace simrec {

/// One test click with a successor. All item ids live in the train corpus'
/// dense space; test items never seen in training map to kNoItem, which can
/// only ever miss.
struct EvalCase {
  std::int64_t index = 0;  // stable case number, seeds the random ranker
  std::string user_id;
  std::vector<int> recents;  // history before current, oldest first
  int current = kNoItem;
  int next = kNoItem;
  bool next_is_addcart = false;
};

struct EvalOptions {
  int history_limit = 16;          // recents kept per case
  bool include_train_history = true;  // recents may span the split boundary
};

inline std::vector<EvalCase> build_cases(const Corpus& train, const Corpus& test,
                                         const EvalOptions& opts = {}) {
  if (opts.history_limit < 0) throw ConfigError("history_limit must be >= 0");
  std::vector<EvalCase> cases;
  std::int64_t index = 0;
  for (const auto& session : test.sessions) {
    std::vector<int> all;  // mapped history, train tail first
    std::vector<bool> next_cart;
    if (opts.include_train_history) {
      auto it = train.session_of_user.find(session.user_id);
      if (it != train.session_of_user.end())
        for (const auto& ev : train.sessions[static_cast<size_t>(it->second)].events)
          all.push_back(ev.item);
    }
    size_t base = all.size();
    for (const auto& ev : session.events)
      all.push_back(train.items.index_of(test.items.id_of(ev.item)));
    for (size_t t = 0; t + 1 < session.events.size(); ++t) {
      EvalCase c;
      c.index = index++;
      c.user_id = session.user_id;
      size_t end = base + t;  // history strictly before current
      size_t lo = end > static_cast<size_t>(opts.history_limit)
                      ? end - static_cast<size_t>(opts.history_limit)
                      : 0;
      c.recents.assign(all.begin() + static_cast<long>(lo), all.begin() + static_cast<long>(end));
      c.current = all[end];
      c.next = all[end + 1];
      c.next_is_addcart = session.events[t + 1].kind == EventKind::AddCart;
      cases.push_back(std::move(c));
    }
  }
  return cases;
}

inline int hit(int next_item, const RankedList& topk) {
  for (const auto& e : topk)
    if (e.item == next_item) return 1;
  return 0;
}

/// Rankers score a fixed candidate pool for one case. Implementations must
/// be deterministic and produce prefix-consistent lists: rank(c, pool, k) is
/// the first k entries of rank(c, pool, K) for any k <= K.
class Ranker {
 public:
  virtual ~Ranker() = default;
  virtual RankedList rank(const EvalCase& c, std::span<const int> pool, int k) const = 0;
};

class CfTableRanker : public Ranker {
 public:
  explicit CfTableRanker(const SimilarityTable& table) : table_(&table) {}
  RankedList rank(const EvalCase& c, std::span<const int> pool, int k) const override {
    return rank_pool_by_table(*table_, c.current, pool, k);
  }

 private:
  const SimilarityTable* table_;
};

class Item2vecRanker : public Ranker {
 public:
  explicit Item2vecRanker(const EmbeddingModel& model) : model_(&model) {}
  RankedList rank(const EvalCase& c, std::span<const int> pool, int k) const override {
    RankedList scored;
    RankedList unknown;
    bool have_query = c.current >= 0 && c.current < model_->vocab();
    for (int cand : pool) {
      if (have_query && cand >= 0 && cand < model_->vocab())
        scored.push_back({cand, score(*model_, c.current, cand)});
      else
        unknown.push_back({cand, 0.0});
    }
    sort_neighbors(scored);
    for (const auto& e : unknown) scored.push_back(e);
    if (k >= 0 && scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
    return scored;
  }

 private:
  const EmbeddingModel* model_;
};

class ImageRanker : public Ranker {
 public:
  ImageRanker(const FeatureVectorStore& store, const ItemIndex& items)
      : store_(&store), items_(&items) {}
  RankedList rank(const EvalCase& c, std::span<const int> pool, int k) const override {
    if (c.current < 0 || c.current >= items_->size() || !store_->has(items_->id_of(c.current))) {
      RankedList out;  // unscorable query: keep recall order
      for (int cand : pool) out.push_back({cand, 0.0});
      if (k >= 0 && out.size() > static_cast<size_t>(k)) out.resize(static_cast<size_t>(k));
      return out;
    }
    return rank_by_image(*store_, *items_, c.current, pool, k);
  }

 private:
  const FeatureVectorStore* store_;
  const ItemIndex* items_;
};

class PersonalizedRanker : public Ranker {
 public:
  explicit PersonalizedRanker(const PersonalizedModel& model) : model_(&model) {}
  RankedList rank(const EvalCase& c, std::span<const int> pool, int k) const override {
    return rank_candidates(*model_, c.recents, c.current, pool, k);
  }

 private:
  const PersonalizedModel* model_;
};

/// Uniform random permutation of the pool, reproducible per case. The swap
/// at position i never depends on k, so prefixes are consistent across k.
class RandomRanker : public Ranker {
 public:
  explicit RandomRanker(std::uint64_t seed) : seed_(seed) {}
  RankedList rank(const EvalCase& c, std::span<const int> pool, int k) const override {
    std::vector<int> perm(pool.begin(), pool.end());
    Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(c.index)));
    size_t n = perm.size();
    size_t take = k < 0 ? n : std::min(n, static_cast<size_t>(k));
    RankedList out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) {
      size_t j = i + rng.uniform_index(n - i);
      std::swap(perm[i], perm[j]);
      out.push_back({perm[i], 0.0});
    }
    return out;
  }

 private:
  std::uint64_t seed_;
};

/// Puts the true next item first when the pool contains it; a hit-ratio
/// ceiling probe, not a real ranker.
class OracleRanker : public Ranker {
 public:
  RankedList rank(const EvalCase& c, std::span<const int> pool, int k) const override {
    RankedList out;
    for (int cand : pool)
      if (cand == c.next) out.push_back({cand, 1.0});
    for (int cand : pool)
      if (cand != c.next) out.push_back({cand, 0.0});
    if (k >= 0 && out.size() > static_cast<size_t>(k)) out.resize(static_cast<size_t>(k));
    return out;
  }
};

/// Share of eligible cases whose successor lands in the top K. addcart_only
/// keeps only cases whose next event is an add-cart (numerator and
/// denominator both filtered).
inline double hit_ratio(const std::vector<EvalCase>& cases, const Ranker& ranker,
                        const CandidatePool& pools, int K, bool addcart_only) {
  if (K < 1) throw ConfigError("K must be >= 1");
  std::int64_t hits = 0, total = 0;
  for (const auto& c : cases) {
    if (addcart_only && !c.next_is_addcart) continue;
    ++total;
    hits += hit(c.next, ranker.rank(c, pools.lookup(c.current), K));
  }
  if (total == 0) throw EvalError("no eligible cases for hit ratio");
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct EvalRow {
  std::string ranker;
  int k = 0;
  std::string metric;  // "click" or "addcart"
  double ratio = 0.0;
  std::int64_t cases = 0;
  bool skipped = false;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

struct RankerEntry {
  std::string name;
  const Ranker* ranker;
};

/// Scores every case once at max(Ks) per ranker and reads the K prefixes
/// from that single list. Worker partials are integer hit counts reduced in
/// chunk order, so the report does not depend on the worker count.
inline EvalReport run_report(const std::vector<EvalCase>& cases, const CandidatePool& pools,
                             const std::vector<RankerEntry>& rankers, std::vector<int> ks,
                             int workers = 1) {
  if (ks.empty()) throw ConfigError("at least one K required");
  std::sort(ks.begin(), ks.end());
  if (ks.front() < 1) throw ConfigError("K must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  int max_k = ks.back();

  std::int64_t addcart_total = 0;
  for (const auto& c : cases)
    if (c.next_is_addcart) ++addcart_total;

  EvalReport report;
  for (const auto& entry : rankers) {
    std::vector<std::int64_t> click_hits(ks.size(), 0), cart_hits(ks.size(), 0);
    auto run_range = [&](size_t lo, size_t hi, std::vector<std::int64_t>& clicks,
                         std::vector<std::int64_t>& carts) {
      for (size_t i = lo; i < hi; ++i) {
        const auto& c = cases[i];
        RankedList ranked = entry.ranker->rank(c, pools.lookup(c.current), max_k);
        size_t found = ranked.size();  // position of next, or off the end
        for (size_t r = 0; r < ranked.size(); ++r) {
          if (ranked[r].item == c.next) {
            found = r;
            break;
          }
        }
        for (size_t t = 0; t < ks.size(); ++t) {
          if (found < static_cast<size_t>(ks[t])) {
            ++clicks[t];
            if (c.next_is_addcart) ++carts[t];
          }
        }
      }
    };
    if (workers == 1 || cases.size() < 2 * static_cast<size_t>(workers)) {
      run_range(0, cases.size(), click_hits, cart_hits);
    } else {
      size_t w = static_cast<size_t>(workers);
      std::vector<std::vector<std::int64_t>> pc(w, std::vector<std::int64_t>(ks.size(), 0));
      std::vector<std::vector<std::int64_t>> pa(w, std::vector<std::int64_t>(ks.size(), 0));
      std::vector<std::thread> threads;
      size_t chunk = (cases.size() + w - 1) / w;
      for (size_t t = 0; t < w; ++t) {
        size_t lo = std::min(cases.size(), t * chunk);
        size_t hi = std::min(cases.size(), (t + 1) * chunk);
        threads.emplace_back([&, t, lo, hi] { run_range(lo, hi, pc[t], pa[t]); });
      }
      for (auto& t : threads) t.join();
      for (size_t t = 0; t < w; ++t)
        for (size_t s = 0; s < ks.size(); ++s) click_hits[s] += pc[t][s], cart_hits[s] += pa[t][s];
    }
    for (size_t t = 0; t < ks.size(); ++t) {
      double denom = static_cast<double>(cases.size());
      report.rows.push_back({entry.name, ks[t], "click",
                             cases.empty() ? 0.0 : static_cast<double>(click_hits[t]) / denom,
                             static_cast<std::int64_t>(cases.size()), false});
    }
    if (addcart_total > 0) {
      for (size_t t = 0; t < ks.size(); ++t)
        report.rows.push_back({entry.name, ks[t], "addcart",
                               static_cast<double>(cart_hits[t]) / static_cast<double>(addcart_total),
                               addcart_total, false});
    }
  }
  return report;
}

/// Placeholder rows for a ranker that could not run (missing inputs).
inline void add_skipped_ranker(EvalReport& report, const std::string& name,
                               std::span<const int> ks, bool with_addcart) {
  for (int k : ks) report.rows.push_back({name, k, "click", 0.0, 0, true});
  if (with_addcart)
    for (int k : ks) report.rows.push_back({name, k, "addcart", 0.0, 0, true});
}

inline std::string write_report_csv(const EvalReport& report) {
  std::string out = "ranker,K,metric,ratio,cases\n";
  for (const auto& r : report.rows) {
    out += r.ranker;
    out += ',';
    out += std::to_string(r.k);
    out += ',';
    out += r.metric;
    out += ',';
    out += r.skipped ? "skipped" : fmt6(r.ratio);
    out += ',';
    out += std::to_string(r.cases);
    out += '\n';
  }
  return out;
}

/// Aligned table, one block per metric, one column per K.
inline std::string write_report_text(const EvalReport& report) {
  std::vector<int> ks;
  std::vector<std::string> names;
  for (const auto& r : report.rows) {
    if (std::find(ks.begin(), ks.end(), r.k) == ks.end()) ks.push_back(r.k);
    if (std::find(names.begin(), names.end(), r.ranker) == names.end()) names.push_back(r.ranker);
  }
  std::sort(ks.begin(), ks.end());

  auto cell = [&](const std::string& name, int k, const std::string& metric) -> std::string {
    for (const auto& r : report.rows)
      if (r.ranker == name && r.k == k && r.metric == metric)
        return r.skipped ? "skipped" : fmt6(r.ratio);
    return "-";
  };
  auto cases_of = [&](const std::string& metric) -> std::int64_t {
    for (const auto& r : report.rows)
      if (r.metric == metric && !r.skipped) return r.cases;
    return 0;
  };

  std::string out;
  char buf[64];
  for (const char* metric : {"click", "addcart"}) {
    bool any = false;
    for (const auto& r : report.rows) any = any || r.metric == metric;
    if (!any) continue;
    std::snprintf(buf, sizeof(buf), "hit ratio (%s), %lld cases\n", metric,
                  static_cast<long long>(cases_of(metric)));
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-18s", "ranker");
    out += buf;
    for (int k : ks) {
      std::snprintf(buf, sizeof(buf), " %9s", ("K=" + std::to_string(k)).c_str());
      out += buf;
    }
    out += '\n';
    for (const auto& name : names) {
      std::snprintf(buf, sizeof(buf), "%-18s", name.c_str());
      out += buf;
      for (int k : ks) {
        std::snprintf(buf, sizeof(buf), " %9s", cell(name, k, metric).c_str());
        out += buf;
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace simrec
