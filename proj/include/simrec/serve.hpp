#pragma once

#include <chrono>
#include <cstdio>
#include <deque>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "simrec/cf.hpp"
#include "simrec/personalized.hpp"
#include "simrec/pool.hpp"
#include "simrec/types.hpp"

namespace simrec {

using Clock = std::function<std::int64_t()>;  // milliseconds

inline std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

/// Per-user ring of the most recent events. Capacity equals the model's
/// window size; entries older than the TTL are dropped on access. One lock
/// guards the map, which more than satisfies per-user atomicity at the
/// request rates this serves.
class SessionStore {
 public:
  SessionStore(int capacity, std::int64_t ttl_ms, Clock clock)
      : capacity_(static_cast<size_t>(capacity)), ttl_ms_(ttl_ms), clock_(std::move(clock)) {
    if (capacity < 1) throw ConfigError("session capacity must be >= 1");
  }

  void record(const std::string& user, int item, EventKind kind) {
    std::int64_t now = clock_();
    std::lock_guard<std::mutex> lock(mu_);
    auto& ring = rings_[user];
    expire(ring, now);
    ring.push_back({item, now, kind});
    while (ring.size() > capacity_) ring.pop_front();
  }

  /// Live items, oldest first.
  std::vector<int> recent_items(const std::string& user) {
    std::int64_t now = clock_();
    std::lock_guard<std::mutex> lock(mu_);
    auto it = rings_.find(user);
    if (it == rings_.end()) return {};
    expire(it->second, now);
    std::vector<int> out;
    out.reserve(it->second.size());
    for (const auto& e : it->second) out.push_back(e.item);
    return out;
  }

  size_t ring_size(const std::string& user) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = rings_.find(user);
    return it == rings_.end() ? 0 : it->second.size();
  }

 private:
  void expire(std::deque<SessionEvent>& ring, std::int64_t now) {
    if (ttl_ms_ <= 0) return;
    while (!ring.empty() && now - ring.front().timestamp_ms > ttl_ms_) ring.pop_front();
  }

  size_t capacity_;
  std::int64_t ttl_ms_;
  Clock clock_;
  std::mutex mu_;
  std::unordered_map<std::string, std::deque<SessionEvent>> rings_;
};

struct ServeConfig {
  int k = 30;
  std::string fallback = "cf";
  int latency_budget_ms = 100;
  std::int64_t session_ttl_ms = 30 * 60000;
  std::string host = "127.0.0.1";
  int port = 8080;

  void validate(int pool_size) const {
    if (k < 1) throw ConfigError("serve_k must be >= 1");
    if (k > pool_size) throw ConfigError("serve_k exceeds pool_size");
    if (fallback != "cf") throw ConfigError("unknown fallback ranker '" + fallback + "'");
    if (latency_budget_ms < 1) throw ConfigError("latency budget must be >= 1 ms");
  }
};

struct SimilarResult {
  std::string ranker;  // "personalized", "cf", or "none"
  std::string reason;  // set when items is empty for a structural reason
  RankedList items;    // model-space ids; translate with item_name()
};

/// Immutable artifacts plus the mutable session store. Item identity is the
/// personalized model's row order; pool candidates and table neighbors the
/// model does not know are interned as negative ids so they stay
/// addressable, always rank last, and round-trip back to their id strings.
class ServingEngine {
 public:
  ServingEngine(PersonalizedFile model_file, const PoolArtifact& pools,
                const SimilarityArtifact& table, ServeConfig config,
                Clock clock = system_clock_ms)
      : items_(std::move(model_file.items)),
        model_(std::move(model_file.model)),
        config_(std::move(config)),
        store_(model_.window(), config_.session_ttl_ms, clock ? std::move(clock) : system_clock_ms) {
    config_.validate(pools.pool.pool_size);
    pool_rows_.resize(static_cast<size_t>(items_.size()));
    table_rows_.resize(static_cast<size_t>(items_.size()));

    int foreign = 0;
    auto remap = [&](const ItemIndex& from, int id) {
      int idx = items_.index_of(from.id_of(id));
      if (idx != kNoItem) return idx;
      ++foreign;
      return intern_extra(from.id_of(id));
    };

    for (size_t row = 0; row < pools.pool.pools.size(); ++row) {
      std::vector<int> mapped;
      mapped.reserve(pools.pool.pools[row].size());
      for (int cand : pools.pool.pools[row]) mapped.push_back(remap(pools.items, cand));
      int key = items_.index_of(pools.items.id_of(static_cast<int>(row)));
      if (key != kNoItem)
        pool_rows_[static_cast<size_t>(key)] = std::move(mapped);
      else
        extra_pool_rows_[pools.items.id_of(static_cast<int>(row))] = std::move(mapped);
    }
    for (size_t row = 0; row < table.table.rows.size(); ++row) {
      std::vector<ScoredItem> mapped;
      mapped.reserve(table.table.rows[row].size());
      for (const auto& e : table.table.rows[row])
        mapped.push_back({remap(table.items, e.item), e.score});
      int key = items_.index_of(table.items.id_of(static_cast<int>(row)));
      if (key != kNoItem)
        table_rows_[static_cast<size_t>(key)] = std::move(mapped);
      else
        extra_table_rows_[table.items.id_of(static_cast<int>(row))] = std::move(mapped);
    }
    if (foreign > 0)
      std::fprintf(stderr, "warning: %d pool/table references are absent from the model and will rank last\n",
                   foreign);
  }

  static ServingEngine from_files(const std::string& model_path, const std::string& pools_path,
                                  const std::string& table_path, const ServeConfig& config,
                                  Clock clock = system_clock_ms) {
    PersonalizedFile model = load_personalized_model(model_path);
    PoolArtifact pools = load_pools(pools_path);
    SimilarityArtifact table = load_similarity_table(table_path);
    return ServingEngine(std::move(model), pools, table, config, std::move(clock));
  }

  void record_event(const std::string& user, const std::string& item_id, EventKind kind) {
    store_.record(user, id_to_index(item_id), kind);
  }

  /// Personalized ranking when the user has live history, CF fallback when
  /// not. The current item is recorded into the ring only after scoring.
  SimilarResult similar_items(const std::string& user, const std::string& item_id, int k) {
    if (k < 1) throw ConfigError("k must be >= 1");
    int current = id_to_index(item_id);
    std::span<const int> pool = pool_of(item_id, current);
    SimilarResult result;
    if (pool.empty()) {
      result.ranker = "none";
      result.reason = "no_pool";
      return result;
    }
    std::vector<int> recents = store_.recent_items(user);
    if (recents.empty()) {
      result.ranker = "cf";
      result.items = rank_pool_by_row(table_row_of(item_id, current), pool, k);
    } else {
      result.ranker = "personalized";
      result.items = rank_candidates(model_, recents, current, pool, k);
    }
    store_.record(user, current, EventKind::Click);
    return result;
  }

  const std::string& item_name(int idx) const {
    if (idx <= kExtraBase) return extra_ids_[static_cast<size_t>(kExtraBase - idx)];
    return items_.id_of(idx);
  }

  int item_count() const { return items_.size(); }
  int dim() const { return model_.dim(); }
  const ServeConfig& config() const { return config_; }
  const PersonalizedModel& model() const { return model_; }
  SessionStore& store() { return store_; }

 private:
  static constexpr int kExtraBase = -2;  // extras are -2, -3, ...

  int intern_extra(const std::string& id) {
    auto [it, inserted] = extra_of_.try_emplace(id, kExtraBase - static_cast<int>(extra_ids_.size()));
    if (inserted) extra_ids_.push_back(id);
    return it->second;
  }

  int id_to_index(const std::string& id) const {
    int idx = items_.index_of(id);
    if (idx != kNoItem) return idx;
    auto it = extra_of_.find(id);
    return it == extra_of_.end() ? kNoItem : it->second;
  }

  std::span<const int> pool_of(const std::string& id, int current) const {
    if (current >= 0) return pool_rows_[static_cast<size_t>(current)];
    auto it = extra_pool_rows_.find(id);
    if (it != extra_pool_rows_.end()) return it->second;
    return {};
  }

  std::span<const ScoredItem> table_row_of(const std::string& id, int current) const {
    if (current >= 0) return table_rows_[static_cast<size_t>(current)];
    auto it = extra_table_rows_.find(id);
    if (it != extra_table_rows_.end()) return it->second;
    return {};
  }

  ItemIndex items_;
  PersonalizedModel model_;
  ServeConfig config_;
  SessionStore store_;
  std::vector<std::vector<int>> pool_rows_;
  std::vector<std::vector<ScoredItem>> table_rows_;
  std::unordered_map<std::string, std::vector<int>> extra_pool_rows_;
  std::unordered_map<std::string, std::vector<ScoredItem>> extra_table_rows_;
  std::unordered_map<std::string, int> extra_of_;
  std::vector<std::string> extra_ids_;
};

}  // namespace simrec
