#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "simrec/ingest.hpp"
#include "simrec/textio.hpp"
#include "simrec/types.hpp"

namespace simrec {

/// Per-item neighbor lists, score descending, ties by dense index ascending.
struct SimilarityTable {
  double alpha = 0.9;
  std::vector<std::vector<ScoredItem>> rows;  // by dense index

  const std::vector<ScoredItem>& neighbors(int item) const {
    static const std::vector<ScoredItem> empty;
    if (item < 0 || item >= static_cast<int>(rows.size())) return empty;
    return rows[static_cast<size_t>(item)];
  }
};

/// |A ∩ B| / |A ∪ B| over sorted unique int vectors; 0 when both empty.
inline double jaccard_sorted(std::span<const int> a, std::span<const int> b) {
  if (a.empty() && b.empty()) return 0.0;
  size_t i = 0, j = 0, common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++common, ++i, ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  size_t uni = a.size() + b.size() - common;
  return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

/// Co-visitation similarity between two items given per-item user sets
/// (sorted unique user indices).
inline double covisit_jaccard(std::span<const int> users_i, std::span<const int> users_j) {
  return jaccard_sorted(users_i, users_j);
}

inline double attribute_jaccard(std::span<const int> attrs_i, std::span<const int> attrs_j) {
  return jaccard_sorted(attrs_i, attrs_j);
}

inline double blended_sim(double c_sim, double f_sim, double alpha) {
  return alpha * c_sim + (1.0 - alpha) * f_sim;
}

/// Distinct items per user (sorted), users over the heavy-hitter cap dropped.
/// Returned vector is indexed by the corpus session order.
inline std::vector<std::vector<int>> eligible_user_items(const Corpus& corpus,
                                                         int max_user_degree) {
  std::vector<std::vector<int>> out(corpus.sessions.size());
  for (size_t u = 0; u < corpus.sessions.size(); ++u) {
    std::vector<int> items;
    items.reserve(corpus.sessions[u].events.size());
    for (const auto& ev : corpus.sessions[u].events) items.push_back(ev.item);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    if (static_cast<int>(items.size()) > max_user_degree) continue;  // crawler-like user
    out[u] = std::move(items);
  }
  return out;
}

/// Per-item sorted user index sets over eligible users.
inline std::vector<std::vector<int>> item_user_sets(const Corpus& corpus, int max_user_degree) {
  auto per_user = eligible_user_items(corpus, max_user_degree);
  std::vector<std::vector<int>> sets(static_cast<size_t>(corpus.items.size()));
  for (size_t u = 0; u < per_user.size(); ++u)
    for (int item : per_user[u]) sets[static_cast<size_t>(item)].push_back(static_cast<int>(u));
  return sets;  // user indices appended in ascending order already
}

/// Attribute-similar neighbors per item: pairs sharing at least one token,
/// ranked by attribute Jaccard. Used as the cold-start route and as the
/// pool's attribute source.
struct AttributeIndex {
  std::vector<std::vector<ScoredItem>> rows;
};

inline AttributeIndex build_attribute_index(const ItemIndex& items, const AttributeStore& attrs,
                                            int top_n) {
  int n = items.size();
  std::vector<const std::vector<int>*> toks(static_cast<size_t>(n));
  int max_token = 0;
  for (int i = 0; i < n; ++i) {
    toks[static_cast<size_t>(i)] = &attrs.tokens(items.id_of(i));
    for (int t : *toks[static_cast<size_t>(i)]) max_token = std::max(max_token, t + 1);
  }
  std::vector<std::vector<int>> inverted(static_cast<size_t>(max_token));
  for (int i = 0; i < n; ++i)
    for (int t : *toks[static_cast<size_t>(i)]) inverted[static_cast<size_t>(t)].push_back(i);

  AttributeIndex index;
  index.rows.resize(static_cast<size_t>(n));
  std::vector<int> seen(static_cast<size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    std::vector<ScoredItem> cands;
    for (int t : *toks[static_cast<size_t>(i)]) {
      for (int j : inverted[static_cast<size_t>(t)]) {
        if (j == i || seen[static_cast<size_t>(j)] == i) continue;
        seen[static_cast<size_t>(j)] = i;
        double f = attribute_jaccard(*toks[static_cast<size_t>(i)], *toks[static_cast<size_t>(j)]);
        if (f > 0.0) cands.push_back({j, f});
      }
    }
    sort_neighbors(cands);
    if (static_cast<int>(cands.size()) > top_n) cands.resize(static_cast<size_t>(top_n));
    index.rows[static_cast<size_t>(i)] = std::move(cands);
  }
  return index;
}

namespace detail {

inline std::uint64_t pair_key(int i, int j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint32_t>(j);
}

/// Map phase: count distinct co-visited item pairs (i < j) for one block of
/// users. No shared mutable state across shards.
inline std::unordered_map<std::uint64_t, std::uint32_t> count_pairs(
    const std::vector<std::vector<int>>& per_user, size_t begin, size_t end) {
  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  for (size_t u = begin; u < end; ++u) {
    const auto& items = per_user[u];
    for (size_t a = 0; a < items.size(); ++a)
      for (size_t b = a + 1; b < items.size(); ++b) counts[pair_key(items[a], items[b])]++;
  }
  return counts;
}

}  // namespace detail

struct CfParams {
  double alpha = 0.9;
  int top_n = 200;
  int shards = 4;
  int max_user_degree = 500;
};

/// Blended item-to-item similarity table. Co-visiting pairs are scored
/// alpha*C_sim + (1-alpha)*F_sim; pure-attribute neighbors from the attribute
/// index enter with C_sim = 0. Output is identical for any shard count.
inline SimilarityTable compute_similarity_table(const Corpus& corpus, const AttributeStore& attrs,
                                                const CfParams& params) {
  if (params.top_n < 1) throw ConfigError("top_n must be >= 1");
  if (params.shards < 1) throw ConfigError("shards must be >= 1");
  int n = corpus.items.size();
  auto per_user = eligible_user_items(corpus, params.max_user_degree);

  std::vector<std::int64_t> degree(static_cast<size_t>(n), 0);  // |U_v| over eligible users
  for (const auto& items : per_user)
    for (int item : items) degree[static_cast<size_t>(item)]++;

  // map
  size_t shards = static_cast<size_t>(params.shards);
  size_t users = per_user.size();
  std::vector<std::unordered_map<std::uint64_t, std::uint32_t>> partials(shards);
  if (shards == 1 || users < 2 * shards) {
    partials[0] = detail::count_pairs(per_user, 0, users);
  } else {
    std::vector<std::thread> threads;
    size_t chunk = (users + shards - 1) / shards;
    for (size_t s = 0; s < shards; ++s) {
      size_t lo = std::min(users, s * chunk), hi = std::min(users, (s + 1) * chunk);
      threads.emplace_back([&, s, lo, hi] { partials[s] = detail::count_pairs(per_user, lo, hi); });
    }
    for (auto& t : threads) t.join();
  }

  // reduce, merged in shard order
  std::unordered_map<std::uint64_t, std::uint32_t> pair_counts = std::move(partials[0]);
  for (size_t s = 1; s < shards; ++s)
    for (const auto& [k, v] : partials[s]) pair_counts[k] += v;

  std::vector<const std::vector<int>*> toks(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) toks[static_cast<size_t>(i)] = &attrs.tokens(corpus.items.id_of(i));

  std::vector<std::vector<ScoredItem>> rows(static_cast<size_t>(n));
  for (const auto& [key, common] : pair_counts) {
    int i = static_cast<int>(key >> 32);
    int j = static_cast<int>(key & 0xffffffffu);
    double uni = static_cast<double>(degree[static_cast<size_t>(i)] +
                                     degree[static_cast<size_t>(j)] - common);
    double c_sim = static_cast<double>(common) / uni;
    double f_sim = attribute_jaccard(*toks[static_cast<size_t>(i)], *toks[static_cast<size_t>(j)]);
    double s = blended_sim(c_sim, f_sim, params.alpha);
    rows[static_cast<size_t>(i)].push_back({j, s});
    rows[static_cast<size_t>(j)].push_back({i, s});
  }

  // Union each item's top_n co-visit neighbors with its pure-attribute
  // fallback (zero shared users), then re-rank and cap at top_n.
  AttributeIndex attr_index = build_attribute_index(corpus.items, attrs, params.top_n);
  SimilarityTable table;
  table.alpha = params.alpha;
  table.rows.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& row = rows[static_cast<size_t>(i)];
    sort_neighbors(row);
    if (static_cast<int>(row.size()) > params.top_n) row.resize(static_cast<size_t>(params.top_n));
    for (const auto& e : attr_index.rows[static_cast<size_t>(i)]) {
      std::uint64_t key =
          i < e.item ? detail::pair_key(i, e.item) : detail::pair_key(e.item, i);
      if (pair_counts.count(key)) continue;  // co-visiting pair, scored via the Jaccard route
      row.push_back({e.item, blended_sim(0.0, e.score, params.alpha)});
    }
    sort_neighbors(row);
    if (static_cast<int>(row.size()) > params.top_n) row.resize(static_cast<size_t>(params.top_n));
    table.rows[static_cast<size_t>(i)] = std::move(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Text persistence: item_id<TAB>neighbor:score,neighbor:score,...

inline std::string serialize_similarity_table(const SimilarityTable& table,
                                              const ItemIndex& items) {
  std::string out;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    out += items.id_of(static_cast<int>(i));
    out += '\t';
    bool first = true;
    for (const auto& e : table.rows[i]) {
      if (!first) out += ',';
      first = false;
      out += items.id_of(e.item);
      out += ':';
      out += fmt6(e.score);
    }
    out += '\n';
  }
  return out;
}

inline void save_similarity_table(const SimilarityTable& table, const ItemIndex& items,
                                  const std::string& path) {
  write_file(path, serialize_similarity_table(table, items));
}

/// A similarity table read back from disk, keyed by its own item order
/// (row order in the file).
struct SimilarityArtifact {
  ItemIndex items;
  SimilarityTable table;
};

inline SimilarityArtifact load_similarity_table(const std::string& path) {
  SimilarityArtifact art;
  std::vector<std::pair<int, std::string>> pending;  // row, "id:score,..." payload
  for_each_line(path, [&](std::string_view line, size_t no) {
    auto f = split(line, '\t');
    if (f.size() != 2 || f[0].empty())
      throw ParseError(ParseCode::FieldCount, no, "expected item_id<TAB>neighbors");
    int row = art.items.add(std::string(f[0]));
    if (row != static_cast<int>(pending.size()))
      throw ParseError(ParseCode::DuplicateItem, no, "duplicate item " + std::string(f[0]));
    pending.emplace_back(row, std::string(f[1]));
  });
  art.table.rows.resize(pending.size());
  size_t no = 0;
  for (auto& [row, payload] : pending) {
    ++no;
    if (payload.empty()) continue;
    auto& out = art.table.rows[static_cast<size_t>(row)];
    for (auto part : split(payload, ',')) {
      size_t colon = part.rfind(':');
      if (colon == std::string_view::npos || colon == 0)
        throw ParseError(ParseCode::FieldCount, no, "bad neighbor entry");
      double score = 0;
      if (!parse_f64(part.substr(colon + 1), score))
        throw ParseError(ParseCode::BadNumber, no, "bad neighbor score");
      out.push_back({art.items.add(std::string(part.substr(0, colon))), score});
    }
  }
  return art;
}

/// Orders a candidate pool by the blended similarity of each candidate to
/// `current` from the table row; candidates missing from the row score 0 and
/// fall to the back. Shared by the offline CF ranker and the serving
/// fallback so both produce identical lists.
inline RankedList rank_pool_by_row(std::span<const ScoredItem> row, std::span<const int> pool,
                                   int k) {
  std::unordered_map<int, double> row_score;
  for (const auto& e : row) row_score.emplace(e.item, e.score);
  RankedList scored;
  scored.reserve(pool.size());
  for (int cand : pool) {
    auto it = row_score.find(cand);
    scored.push_back({cand, it == row_score.end() ? 0.0 : it->second});
  }
  sort_neighbors(scored);
  if (k >= 0 && scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
  return scored;
}

inline RankedList rank_pool_by_table(const SimilarityTable& table, int current,
                                     std::span<const int> pool, int k) {
  return rank_pool_by_row(table.neighbors(current), pool, k);
}

}  // namespace simrec
