#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "simrec/cf.hpp"
#include "simrec/config.hpp"
#include "simrec/eval.hpp"
#include "simrec/ingest.hpp"
#include "simrec/item2vec.hpp"
#include "simrec/personalized.hpp"
#include "simrec/pool.hpp"
#include "simrec/synth.hpp"
#include "simrec/types.hpp"
#include "simrec/vectors.hpp"

namespace simrec {

namespace detail {

/// Re-throws module errors with a stage prefix, preserving the error type so
/// the CLI exit-code mapping still works.
template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(e.code(), e.line(), name + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(name + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(name + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const AbsentItemError& e) {
    throw AbsentItemError(name + ": " + e.what());
  } catch (const EvalError& e) {
    throw EvalError(name + ": " + e.what());
  }
}

}  // namespace detail

constexpr std::int64_t kDayMs = 86400000;

/// Start of the last calendar day present in the stream; the train side is
/// everything before it.
inline std::int64_t auto_cutoff_ms(const std::vector<ClickEvent>& events) {
  std::int64_t max_ts = 0;
  for (const auto& e : events) max_ts = std::max(max_ts, e.timestamp_ms);
  return (max_ts / kDayMs) * kDayMs;
}

struct PipelineResult {
  std::int64_t cutoff_ms = 0;
  std::int64_t train_events = 0;
  std::int64_t test_events = 0;
  std::int64_t cases = 0;
  bool image_skipped = false;
  EvalReport report;
};

/// split -> CF -> pools -> item2vec -> personalized (omega=1 and omega=cfg)
/// -> evaluate. Writes sim_table.tsv, pools.tsv, item2vec.model,
/// personalized.model, personalized_addcart.model, report.csv, report.txt
/// under cfg.outdir. A missing vectors file only skips the image ranker.
inline PipelineResult run_pipeline(const RunConfig& cfg, bool quiet = false) {
  namespace fs = std::filesystem;
  auto log = [&](const std::string& msg) {
    if (!quiet) std::fprintf(stderr, "pipeline: %s\n", msg.c_str());
  };
  if (cfg.events_path.empty()) throw ConfigError("pipeline: events path required");
  fs::create_directories(cfg.outdir);
  auto out = [&](const char* leaf) { return (fs::path(cfg.outdir) / leaf).string(); };

  PipelineResult result;
  auto events = detail::stage("ingest", [&] { return load_events(cfg.events_path); });
  if (events.empty()) throw FormatError("ingest: no events in " + cfg.events_path);
  result.cutoff_ms = cfg.cutoff_ms >= 0 ? cfg.cutoff_ms : auto_cutoff_ms(events);
  auto [train, test] =
      detail::stage("split", [&] { return temporal_split(events, result.cutoff_ms); });
  result.train_events = train.total_events();
  result.test_events = test.total_events();
  log("split at " + std::to_string(result.cutoff_ms) + " ms: " +
      std::to_string(result.train_events) + " train / " + std::to_string(result.test_events) +
      " test events, " + std::to_string(train.items.size()) + " train items");
  if (train.total_events() == 0) throw FormatError("split: no training events before cutoff");

  AttributeStore attrs;
  if (!cfg.attributes_path.empty())
    attrs = detail::stage("attributes", [&] { return AttributeStore::load(cfg.attributes_path); });

  auto table = detail::stage("cf", [&] {
    return compute_similarity_table(train, attrs, cfg.cf_params());
  });
  detail::stage("cf", [&] { save_similarity_table(table, train.items, out("sim_table.tsv")); return 0; });
  log("similarity table written");

  auto pools = detail::stage("pool", [&] {
    auto attr_index = build_attribute_index(train.items, attrs, cfg.top_n);
    std::vector<int> fresh;
    if (!cfg.new_items_path.empty()) {
      std::vector<std::string> skipped;
      fresh = load_new_items(cfg.new_items_path, train.items, &skipped);
      if (!skipped.empty())
        log("new-items: " + std::to_string(skipped.size()) + " ids not in the training corpus");
    }
    return build_pools(table, attr_index, fresh, cfg.pool_quotas(), cfg.pool_size);
  });
  detail::stage("pool", [&] { save_pools(pools, train.items, out("pools.tsv")); return 0; });
  log("pools written");

  TrainStats i2v_stats;
  auto i2v = detail::stage("item2vec", [&] {
    return train_item2vec(train, cfg.i2v_config(), &i2v_stats);
  });
  detail::stage("item2vec", [&] { save_embedding_model(i2v, train.items, out("item2vec.model")); return 0; });
  if (!i2v_stats.epoch_mean_loss.empty())
    log("item2vec: final epoch mean loss " + fmt6(i2v_stats.epoch_mean_loss.back()));

  PersonalizedConfig pers_base = cfg.pers_config();
  pers_base.omega = 1.0;
  TrainStats pers_stats, cart_stats;
  auto pers = detail::stage("personalized", [&] {
    return train_personalized(train, pers_base, &pers_stats);
  });
  detail::stage("personalized", [&] {
    save_personalized_model(pers, train.items, out("personalized.model"));
    return 0;
  });
  auto cart = detail::stage("personalized", [&] {
    return train_personalized(train, cfg.pers_config(), &cart_stats);
  });
  detail::stage("personalized", [&] {
    save_personalized_model(cart, train.items, out("personalized_addcart.model"));
    return 0;
  });
  if (!pers_stats.epoch_mean_loss.empty())
    log("personalized: final epoch mean loss " + fmt6(pers_stats.epoch_mean_loss.back()));

  FeatureVectorStore vectors;
  bool have_vectors = false;
  if (!cfg.vectors_path.empty() && fs::exists(cfg.vectors_path)) {
    vectors = detail::stage("vectors", [&] { return FeatureVectorStore::load(cfg.vectors_path); });
    have_vectors = vectors.size() > 0;
  }
  result.image_skipped = !have_vectors;
  if (!have_vectors) log("vectors file missing or empty, image ranker skipped");

  auto cases = detail::stage("evaluate", [&] { return build_cases(train, test, cfg.eval_options()); });
  result.cases = static_cast<std::int64_t>(cases.size());
  log(std::to_string(cases.size()) + " evaluation cases");

  CfTableRanker cf_ranker(table);
  Item2vecRanker i2v_ranker(i2v);
  ImageRanker image_ranker(vectors, train.items);
  PersonalizedRanker pers_ranker(pers);
  PersonalizedRanker cart_ranker(cart);
  std::vector<RankerEntry> rankers;
  if (have_vectors) rankers.push_back({"image", &image_ranker});
  rankers.push_back({"cf", &cf_ranker});
  rankers.push_back({"item2vec", &i2v_ranker});
  rankers.push_back({"personalized", &pers_ranker});
  rankers.push_back({"addcart-enhanced", &cart_ranker});

  result.report = detail::stage("evaluate", [&] {
    return run_report(cases, pools, rankers, cfg.eval_ks, cfg.workers);
  });
  if (!have_vectors) {
    bool with_addcart = false;
    for (const auto& r : result.report.rows) with_addcart = with_addcart || r.metric == "addcart";
    EvalReport with_image;
    add_skipped_ranker(with_image, "image", cfg.eval_ks, with_addcart);
    for (auto& row : result.report.rows) with_image.rows.push_back(std::move(row));
    result.report = std::move(with_image);
  }
  detail::stage("evaluate", [&] {
    write_file(out("report.csv"), write_report_csv(result.report));
    write_file(out("report.txt"), write_report_text(result.report));
    return 0;
  });
  log("report written to " + out("report.csv"));
  return result;
}

}  // namespace simrec
