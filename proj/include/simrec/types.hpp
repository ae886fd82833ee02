#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace simrec {

/// Sentinel dense index for "item not known here".
inline constexpr int kNoItem = -1;

enum class EventKind { Click, AddCart };

inline const char* to_token(EventKind k) {
  return k == EventKind::AddCart ? "add_cart" : "click";
}

/// One user interaction from the clickstream log.
struct ClickEvent {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::Click;
};

/// Bijection between external item ids and contiguous dense indices,
/// assigned in first-appearance order.
class ItemIndex {
 public:
  int add(const std::string& id) {
    auto it = by_id_.find(id);
    if (it != by_id_.end()) return it->second;
    int k = static_cast<int>(ids_.size());
    by_id_.emplace(id, k);
    ids_.push_back(id);
    return k;
  }

  int index_of(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? kNoItem : it->second;
  }

  const std::string& id_of(int k) const { return ids_.at(static_cast<size_t>(k)); }
  int size() const { return static_cast<int>(ids_.size()); }
  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

 private:
  std::unordered_map<std::string, int> by_id_;
  std::vector<std::string> ids_;
};

/// One event inside a session, items already dense-indexed.
struct SessionEvent {
  int item = kNoItem;
  std::int64_t timestamp_ms = 0;
  EventKind kind = EventKind::Click;
};

/// A user's time-ordered visit sequence.
struct Session {
  std::string user_id;
  std::vector<SessionEvent> events;  // non-decreasing timestamps, input order on ties
};

/// Immutable after construction; safe to share across readers.
struct Corpus {
  std::vector<Session> sessions;  // ordered by first appearance of the user
  ItemIndex items;
  std::vector<std::int64_t> click_counts;  // per dense index, add-cart visits included
  std::unordered_map<std::string, int> session_of_user;

  std::int64_t total_events() const {
    std::int64_t n = 0;
    for (const auto& s : sessions) n += static_cast<std::int64_t>(s.events.size());
    return n;
  }
};

struct ScoredItem {
  int item = kNoItem;
  double score = 0.0;
};

/// Ordered (item, score) output of any ranker, best first.
using RankedList = std::vector<ScoredItem>;

/// Canonical ranking order: score descending, ties by dense index ascending.
inline void sort_neighbors(std::vector<ScoredItem>& v) {
  std::sort(v.begin(), v.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  });
}

// ---------------------------------------------------------------------------
// Errors

enum class ParseCode {
  FieldCount,
  BadTimestamp,
  BadKind,
  EmptyField,
  BadNumber,
  DimensionMismatch,
  ZeroNorm,
  DuplicateItem,
  BadHeader,
};

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseCode code, std::size_t line_no, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_no) + ": " + msg),
        code_(code),
        line_(line_no) {}
  ParseCode code() const { return code_; }
  std::size_t line() const { return line_; }

 private:
  ParseCode code_;
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Artifact file fails structural validation (bad magic, version, counts).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

class AbsentItemError : public std::runtime_error {
 public:
  explicit AbsentItemError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Ratio requested over zero eligible cases.
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace simrec
