#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "simrec/textio.hpp"
#include "simrec/types.hpp"

namespace simrec {

/// Clickstream record: user_id<TAB>item_id<TAB>timestamp_ms<TAB>kind
inline ClickEvent parse_event_line(std::string_view line, size_t line_no = 0) {
  auto f = split(line, '\t');
  if (f.size() != 4)
    throw ParseError(ParseCode::FieldCount, line_no,
                     "expected 4 tab-separated fields, got " + std::to_string(f.size()));
  ClickEvent ev;
  if (f[0].empty() || f[1].empty())
    throw ParseError(ParseCode::EmptyField, line_no, "empty user_id or item_id");
  ev.user_id = std::string(f[0]);
  ev.item_id = std::string(f[1]);
  if (!parse_i64(f[2], ev.timestamp_ms) || ev.timestamp_ms < 0)
    throw ParseError(ParseCode::BadTimestamp, line_no,
                     "timestamp must be a non-negative integer: '" + std::string(f[2]) + "'");
  if (f[3] == "click")
    ev.kind = EventKind::Click;
  else if (f[3] == "add_cart")
    ev.kind = EventKind::AddCart;
  else
    throw ParseError(ParseCode::BadKind, line_no, "unknown kind token '" + std::string(f[3]) + "'");
  return ev;
}

inline std::string serialize_event(const ClickEvent& ev) {
  return ev.user_id + "\t" + ev.item_id + "\t" + std::to_string(ev.timestamp_ms) + "\t" +
         to_token(ev.kind) + "\n";
}

inline std::vector<ClickEvent> load_events(const std::string& path) {
  std::vector<ClickEvent> out;
  for_each_line(path, [&](std::string_view line, size_t no) {
    out.push_back(parse_event_line(line, no));
  });
  return out;
}

/// Groups events per user, sorts by time (stable on ties), assigns dense item
/// indices in first-appearance file order, and collapses consecutive
/// same-item runs within a session to one event. A collapsed run keeps the
/// first timestamp and is marked AddCart when any event in the run was.
inline Corpus build_corpus(const std::vector<ClickEvent>& events) {
  Corpus c;
  for (const auto& ev : events) {
    int item = c.items.add(ev.item_id);
    auto [it, inserted] = c.session_of_user.try_emplace(ev.user_id, static_cast<int>(c.sessions.size()));
    if (inserted) c.sessions.push_back(Session{ev.user_id, {}});
    c.sessions[static_cast<size_t>(it->second)].events.push_back(
        SessionEvent{item, ev.timestamp_ms, ev.kind});
  }
  c.click_counts.assign(static_cast<size_t>(c.items.size()), 0);
  for (auto& s : c.sessions) {
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const SessionEvent& a, const SessionEvent& b) {
                       return a.timestamp_ms < b.timestamp_ms;
                     });
    std::vector<SessionEvent> collapsed;
    collapsed.reserve(s.events.size());
    for (const auto& ev : s.events) {
      if (!collapsed.empty() && collapsed.back().item == ev.item) {
        if (ev.kind == EventKind::AddCart) collapsed.back().kind = EventKind::AddCart;
        continue;
      }
      collapsed.push_back(ev);
    }
    s.events = std::move(collapsed);
    for (const auto& ev : s.events) c.click_counts[static_cast<size_t>(ev.item)]++;
  }
  return c;
}

/// Raw partition by timestamp; input order preserved within each side.
inline std::pair<std::vector<ClickEvent>, std::vector<ClickEvent>> split_events(
    const std::vector<ClickEvent>& events, std::int64_t cutoff_ms) {
  std::pair<std::vector<ClickEvent>, std::vector<ClickEvent>> out;
  for (const auto& ev : events) {
    (ev.timestamp_ms < cutoff_ms ? out.first : out.second).push_back(ev);
  }
  return out;
}

/// Events before the cutoff become the training corpus, the rest the test
/// corpus. Each corpus carries its own item index.
inline std::pair<Corpus, Corpus> temporal_split(const std::vector<ClickEvent>& events,
                                                std::int64_t cutoff_ms) {
  auto [train_ev, test_ev] = split_events(events, cutoff_ms);
  return {build_corpus(train_ev), build_corpus(test_ev)};
}

/// Attribute sets F_v, tokens interned to ints for fast intersection.
/// Missing items read as the empty set.
class AttributeStore {
 public:
  /// File format: item_id<TAB>attr1<TAB>attr2...
  static AttributeStore load(const std::string& path) {
    AttributeStore store;
    for_each_line(path, [&](std::string_view line, size_t no) {
      auto f = split(line, '\t');
      if (f.empty() || f[0].empty())
        throw ParseError(ParseCode::EmptyField, no, "missing item_id");
      store.add(std::string(f[0]), std::vector<std::string_view>(f.begin() + 1, f.end()));
    });
    return store;
  }

  void add(const std::string& item_id, const std::vector<std::string_view>& tokens) {
    auto& set = sets_[item_id];
    for (auto t : tokens) {
      if (t.empty()) continue;
      set.push_back(intern(std::string(t)));
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }

  /// Sorted interned token ids; empty for unknown items.
  const std::vector<int>& tokens(const std::string& item_id) const {
    auto it = sets_.find(item_id);
    return it == sets_.end() ? empty_ : it->second;
  }

  std::set<std::string> attribute_set(const std::string& item_id) const {
    std::set<std::string> out;
    for (int t : tokens(item_id)) out.insert(token_names_[static_cast<size_t>(t)]);
    return out;
  }

  int token_count() const { return static_cast<int>(token_names_.size()); }
  size_t item_count() const { return sets_.size(); }

 private:
  int intern(const std::string& tok) {
    auto [it, inserted] = token_ids_.try_emplace(tok, static_cast<int>(token_names_.size()));
    if (inserted) token_names_.push_back(tok);
    return it->second;
  }

  std::unordered_map<std::string, std::vector<int>> sets_;
  std::unordered_map<std::string, int> token_ids_;
  std::vector<std::string> token_names_;
  std::vector<int> empty_;
};

}  // namespace simrec
