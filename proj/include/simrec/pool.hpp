#pragma once

#include <span>
#include <string>
#include <vector>

#include "simrec/cf.hpp"
#include "simrec/textio.hpp"
#include "simrec/types.hpp"

namespace simrec {

enum class PoolSource : std::uint8_t { Cf, Attribute, Fresh };

struct PoolQuotas {
  int cf = 150;
  int attribute = 40;
  int fresh = 10;
};

/// Per-item recall pool of at most pool_size candidates; rankers only ever
/// score within it.
struct CandidatePool {
  int pool_size = 200;
  std::vector<std::vector<int>> pools;            // dense candidate ids
  std::vector<std::vector<PoolSource>> sources;   // parallel to pools

  std::span<const int> lookup(int item) const {
    if (item < 0 || item >= static_cast<int>(pools.size())) return {};
    return pools[static_cast<size_t>(item)];
  }
};

/// Fills each item's pool by quota in source priority order cf -> attribute
/// -> new; unfilled quota carries forward to later sources, never backward.
inline CandidatePool build_pools(const SimilarityTable& sim_table,
                                 const AttributeIndex& attr_index,
                                 const std::vector<int>& new_items, const PoolQuotas& quotas,
                                 int pool_size = 200) {
  if (quotas.cf < 0 || quotas.attribute < 0 || quotas.fresh < 0)
    throw ConfigError("pool quotas must be non-negative");
  if (quotas.cf + quotas.attribute + quotas.fresh > pool_size)
    throw ConfigError("pool quota sum exceeds pool_size");
  size_t n = sim_table.rows.size();
  CandidatePool pool;
  pool.pool_size = pool_size;
  pool.pools.resize(n);
  pool.sources.resize(n);

  std::vector<int> taken_mark(n, -1);
  for (size_t i = 0; i < n; ++i) {
    auto& out = pool.pools[i];
    auto& tags = pool.sources[i];
    int self = static_cast<int>(i);
    auto add_from = [&](auto&& next_candidate, PoolSource tag, int want) {
      int got = 0;
      int cand;
      while (got < want && (cand = next_candidate()) != kNoItem) {
        if (cand == self || cand < 0) continue;
        if (cand < static_cast<int>(n) && taken_mark[static_cast<size_t>(cand)] == self) continue;
        if (cand < static_cast<int>(n)) taken_mark[static_cast<size_t>(cand)] = self;
        out.push_back(cand);
        tags.push_back(tag);
        ++got;
      }
      return got;
    };

    size_t ci = 0;
    const auto& cf_row = sim_table.rows[i];
    auto cf_next = [&]() { return ci < cf_row.size() ? cf_row[ci++].item : kNoItem; };
    size_t ai = 0;
    const auto& attr_row = attr_index.rows[i];
    auto attr_next = [&]() { return ai < attr_row.size() ? attr_row[ai++].item : kNoItem; };
    size_t fi = 0;
    auto fresh_next = [&]() { return fi < new_items.size() ? new_items[fi++] : kNoItem; };

    int carry = 0;
    int got = add_from(cf_next, PoolSource::Cf, quotas.cf);
    carry = quotas.cf - got;
    got = add_from(attr_next, PoolSource::Attribute, quotas.attribute + carry);
    carry = quotas.attribute + carry - got;
    add_from(fresh_next, PoolSource::Fresh, quotas.fresh + carry);
  }
  return pool;
}

inline std::vector<int> load_new_items(const std::string& path, const ItemIndex& items,
                                       std::vector<std::string>* skipped = nullptr) {
  std::vector<int> out;
  for_each_line(path, [&](std::string_view line, size_t) {
    int k = items.index_of(std::string(line));
    if (k == kNoItem) {
      if (skipped) skipped->push_back(std::string(line));
      return;
    }
    out.push_back(k);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Text persistence: item_id<TAB>cand1,cand2,...

inline std::string serialize_pools(const CandidatePool& pool, const ItemIndex& items) {
  std::string out;
  for (size_t i = 0; i < pool.pools.size(); ++i) {
    out += items.id_of(static_cast<int>(i));
    out += '\t';
    bool first = true;
    for (int cand : pool.pools[i]) {
      if (!first) out += ',';
      first = false;
      out += items.id_of(cand);
    }
    out += '\n';
  }
  return out;
}

inline void save_pools(const CandidatePool& pool, const ItemIndex& items,
                       const std::string& path) {
  write_file(path, serialize_pools(pool, items));
}

/// Pools read back from disk. Candidate ids may reference items without a
/// row of their own (e.g. operator-curated new items); they are appended to
/// the index after all row items.
struct PoolArtifact {
  ItemIndex items;
  CandidatePool pool;
};

inline PoolArtifact load_pools(const std::string& path, int pool_size = 200) {
  PoolArtifact art;
  art.pool.pool_size = pool_size;
  std::vector<std::string> payloads;
  for_each_line(path, [&](std::string_view line, size_t no) {
    auto f = split(line, '\t');
    if (f.size() != 2 || f[0].empty())
      throw ParseError(ParseCode::FieldCount, no, "expected item_id<TAB>candidates");
    int row = art.items.add(std::string(f[0]));
    if (row != static_cast<int>(payloads.size()))
      throw ParseError(ParseCode::DuplicateItem, no, "duplicate item " + std::string(f[0]));
    payloads.emplace_back(f[1]);
  });
  art.pool.pools.resize(payloads.size());
  art.pool.sources.resize(payloads.size());
  for (size_t i = 0; i < payloads.size(); ++i) {
    if (payloads[i].empty()) continue;
    for (auto part : split(payloads[i], ','))
      art.pool.pools[i].push_back(art.items.add(std::string(part)));
  }
  return art;
}

}  // namespace simrec
