#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simrec/cf.hpp"
#include "simrec/eval.hpp"
#include "simrec/item2vec.hpp"
#include "simrec/personalized.hpp"
#include "simrec/pool.hpp"
#include "simrec/synth.hpp"
#include "simrec/textio.hpp"
#include "simrec/types.hpp"

namespace simrec {

/// Every tunable default in one place, settable from `key = value` files
/// ('#' comments) and overridable by CLI flags. Unknown keys and
/// out-of-range values are rejected at assignment time.
struct RunConfig {
  // split
  std::int64_t cutoff_ms = -1;  // -1: start of the last calendar day in the data

  // cf
  double alpha = 0.9;
  int top_n = 200;
  int shards = 4;
  int max_user_degree = 500;

  // pool
  int pool_size = 200;
  int quota_cf = 150;
  int quota_attribute = 40;
  int quota_fresh = 10;

  // item2vec
  int i2v_window = 2;
  int i2v_negatives = 8;
  int i2v_dim = 64;
  double i2v_learning_rate = 0.025;
  int i2v_epochs = 5;
  bool i2v_unigram = false;

  // personalized
  int pers_window = 8;
  int pers_negatives = 8;
  int pers_dim = 64;
  double pers_learning_rate = 0.025;
  int pers_epochs = 5;
  double omega = 2.0;
  std::string addcart_scope = "session";  // or "event"

  // evaluator
  std::vector<int> eval_ks{5, 10, 20};
  int history_limit = 16;
  bool include_train_history = true;

  // serving
  int serve_k = 30;
  std::string serve_fallback = "cf";
  int latency_budget_ms = 100;
  int session_ttl_minutes = 30;
  std::string host = "127.0.0.1";
  int port = 8080;

  // synth
  int synth_users = 2000;
  int synth_items = 1000;
  int synth_clusters = 8;
  int synth_days = 8;
  int synth_events_per_user = 40;
  double synth_addcart_rate = 0.1;
  double synth_p_in = 0.9;
  double synth_zipf_s = 1.0;
  int synth_cart_items = 0;
  int synth_vector_dim = 16;
  double synth_vector_noise = 0.25;

  // global
  std::uint64_t seed = 42;
  int workers = 1;

  // paths
  std::string events_path;
  std::string attributes_path;
  std::string vectors_path;
  std::string new_items_path;
  std::string outdir = "out";

  void set(const std::string& key, std::string_view raw);
  void apply_file(const std::string& path);
  static const std::vector<std::string>& known_keys();

  CfParams cf_params() const {
    CfParams p;
    p.alpha = alpha;
    p.top_n = top_n;
    p.shards = shards;
    p.max_user_degree = max_user_degree;
    return p;
  }

  PoolQuotas pool_quotas() const { return {quota_cf, quota_attribute, quota_fresh}; }

  TrainConfig i2v_config() const {
    TrainConfig c;
    c.window = i2v_window;
    c.negatives = i2v_negatives;
    c.dim = i2v_dim;
    c.learning_rate = i2v_learning_rate;
    c.epochs = i2v_epochs;
    c.seed = seed;
    c.workers = workers;
    c.unigram_negatives = i2v_unigram;
    return c;
  }

  PersonalizedConfig pers_config() const {
    PersonalizedConfig c;
    c.window = pers_window;
    c.negatives = pers_negatives;
    c.dim = pers_dim;
    c.learning_rate = pers_learning_rate;
    c.epochs = pers_epochs;
    c.omega = omega;
    c.addcart_scope = addcart_scope == "event" ? AddCartScope::Event : AddCartScope::Session;
    c.seed = seed;
    c.workers = workers;
    return c;
  }

  EvalOptions eval_options() const { return {history_limit, include_train_history}; }

  SynthParams synth_params() const {
    SynthParams p;
    p.users = synth_users;
    p.items = synth_items;
    p.clusters = synth_clusters;
    p.days = synth_days;
    p.events_per_user = synth_events_per_user;
    p.addcart_rate = synth_addcart_rate;
    p.p_in = synth_p_in;
    p.zipf_s = synth_zipf_s;
    p.cart_items_per_cluster = synth_cart_items;
    p.vector_dim = synth_vector_dim;
    p.vector_noise = synth_vector_noise;
    p.seed = seed;
    return p;
  }
};

namespace detail {

inline std::int64_t cfg_int(const std::string& key, std::string_view v, std::int64_t lo,
                            std::int64_t hi) {
  std::int64_t x = 0;
  if (!parse_i64(v, x))
    throw ConfigError(key + ": expected an integer, got '" + std::string(v) + "'");
  if (x < lo || x > hi)
    throw ConfigError(key + ": " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  return x;
}

inline double cfg_real(const std::string& key, std::string_view v, double lo, double hi) {
  double x = 0;
  if (!parse_f64(v, x)) throw ConfigError(key + ": expected a number, got '" + std::string(v) + "'");
  if (x < lo || x > hi)
    throw ConfigError(key + ": " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  return x;
}

inline bool cfg_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + std::string(v) + "'");
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, std::string_view raw) {
  using detail::cfg_bool;
  using detail::cfg_int;
  using detail::cfg_real;
  std::string_view v = trim(raw);
  constexpr std::int64_t kI32 = 2147483647;

  if (key == "cutoff_ms") cutoff_ms = cfg_int(key, v, -1, INT64_MAX);
  else if (key == "alpha") alpha = cfg_real(key, v, 0.0, 1.0);
  else if (key == "top_n") top_n = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "shards") shards = static_cast<int>(cfg_int(key, v, 1, 4096));
  else if (key == "max_user_degree") max_user_degree = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "pool_size") pool_size = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "quota_cf") quota_cf = static_cast<int>(cfg_int(key, v, 0, kI32));
  else if (key == "quota_attribute") quota_attribute = static_cast<int>(cfg_int(key, v, 0, kI32));
  else if (key == "quota_fresh") quota_fresh = static_cast<int>(cfg_int(key, v, 0, kI32));
  else if (key == "i2v_window") i2v_window = static_cast<int>(cfg_int(key, v, 1, 1024));
  else if (key == "i2v_negatives") i2v_negatives = static_cast<int>(cfg_int(key, v, 1, 65536));
  else if (key == "i2v_dim") i2v_dim = static_cast<int>(cfg_int(key, v, 1, 65536));
  else if (key == "i2v_learning_rate") i2v_learning_rate = cfg_real(key, v, 1e-12, 1e6);
  else if (key == "i2v_epochs") i2v_epochs = static_cast<int>(cfg_int(key, v, 0, 1000000));
  else if (key == "i2v_unigram") i2v_unigram = cfg_bool(key, v);
  else if (key == "pers_window") pers_window = static_cast<int>(cfg_int(key, v, 1, 1024));
  else if (key == "pers_negatives") pers_negatives = static_cast<int>(cfg_int(key, v, 1, 65536));
  else if (key == "pers_dim") pers_dim = static_cast<int>(cfg_int(key, v, 1, 65536));
  else if (key == "pers_learning_rate") pers_learning_rate = cfg_real(key, v, 1e-12, 1e6);
  else if (key == "pers_epochs") pers_epochs = static_cast<int>(cfg_int(key, v, 0, 1000000));
  else if (key == "omega") omega = cfg_real(key, v, 1.0, 1e6);
  else if (key == "addcart_scope") {
    if (v != "session" && v != "event")
      throw ConfigError("addcart_scope: expected session or event, got '" + std::string(v) + "'");
    addcart_scope = std::string(v);
  } else if (key == "eval_ks") {
    std::vector<int> ks;
    for (auto part : split(v, ','))
      ks.push_back(static_cast<int>(cfg_int(key, trim(part), 1, kI32)));
    if (ks.empty()) throw ConfigError("eval_ks: at least one K required");
    eval_ks = std::move(ks);
  } else if (key == "history_limit") history_limit = static_cast<int>(cfg_int(key, v, 0, kI32));
  else if (key == "include_train_history") include_train_history = cfg_bool(key, v);
  else if (key == "serve_k") serve_k = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "serve_fallback") {
    if (v != "cf")
      throw ConfigError("serve_fallback: only 'cf' is available, got '" + std::string(v) + "'");
    serve_fallback = std::string(v);
  } else if (key == "latency_budget_ms") latency_budget_ms = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "session_ttl_minutes") session_ttl_minutes = static_cast<int>(cfg_int(key, v, 0, kI32));
  else if (key == "host") host = std::string(v);
  else if (key == "port") port = static_cast<int>(cfg_int(key, v, 1, 65535));
  else if (key == "synth_users") synth_users = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "synth_items") synth_items = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "synth_clusters") synth_clusters = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "synth_days") synth_days = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "synth_events_per_user") synth_events_per_user = static_cast<int>(cfg_int(key, v, 1, kI32));
  else if (key == "synth_addcart_rate") synth_addcart_rate = cfg_real(key, v, 0.0, 1.0);
  else if (key == "synth_p_in") synth_p_in = cfg_real(key, v, 0.0, 1.0);
  else if (key == "synth_zipf_s") synth_zipf_s = cfg_real(key, v, 0.0, 100.0);
  else if (key == "synth_cart_items") synth_cart_items = static_cast<int>(cfg_int(key, v, 0, kI32));
  else if (key == "synth_vector_dim") synth_vector_dim = static_cast<int>(cfg_int(key, v, 1, 65536));
  else if (key == "synth_vector_noise") synth_vector_noise = cfg_real(key, v, 0.0, 1e6);
  else if (key == "seed") seed = static_cast<std::uint64_t>(cfg_int(key, v, 0, INT64_MAX));
  else if (key == "workers") workers = static_cast<int>(cfg_int(key, v, 1, 4096));
  else if (key == "events") events_path = std::string(v);
  else if (key == "attributes") attributes_path = std::string(v);
  else if (key == "vectors") vectors_path = std::string(v);
  else if (key == "new_items") new_items_path = std::string(v);
  else if (key == "outdir") outdir = std::string(v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline void RunConfig::apply_file(const std::string& path) {
  for_each_line(path, [&](std::string_view line, size_t no) {
    size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path + ":" + std::to_string(no) + ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(no) + ": empty key");
    try {
      set(key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(no) + ": " + e.what());
    }
  });
}

inline const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "cutoff_ms", "alpha", "top_n", "shards", "max_user_degree",
      "pool_size", "quota_cf", "quota_attribute", "quota_fresh",
      "i2v_window", "i2v_negatives", "i2v_dim", "i2v_learning_rate", "i2v_epochs", "i2v_unigram",
      "pers_window", "pers_negatives", "pers_dim", "pers_learning_rate", "pers_epochs",
      "omega", "addcart_scope",
      "eval_ks", "history_limit", "include_train_history",
      "serve_k", "serve_fallback", "latency_budget_ms", "session_ttl_minutes", "host", "port",
      "synth_users", "synth_items", "synth_clusters", "synth_days", "synth_events_per_user",
      "synth_addcart_rate", "synth_p_in", "synth_zipf_s", "synth_cart_items",
      "synth_vector_dim", "synth_vector_noise",
      "seed", "workers",
      "events", "attributes", "vectors", "new_items", "outdir"};
  return keys;
}

}  // namespace simrec
