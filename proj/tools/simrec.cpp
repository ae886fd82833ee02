// Command-line front end: synth, ingest, train-cf, pool, train-item2vec,
// train-personalized, evaluate, serve, pipeline. Every RunConfig key is
// exposed as a --key flag on every subcommand; flags win over --config.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "simrec/http_server.hpp"
#include "simrec/simrec.hpp"

namespace fs = std::filesystem;
using namespace simrec;

namespace {

struct SubCtx {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;  // flag order preserved
};

void add_config_options(CLI::App* cmd, SubCtx& ctx) {
  cmd->add_option("--config", ctx.config_path, "key = value config file ('#' comments)");
  for (const auto& key : RunConfig::known_keys()) {
    CLI::callback_t cb = [&ctx, key](const std::vector<std::string>& vals) {
      for (const auto& v : vals) ctx.overrides.emplace_back(key, v);
      return true;
    };
    cmd->add_option("--" + key, cb, "set config key " + key)->expected(1);
  }
}

RunConfig make_config(const SubCtx& ctx) {
  RunConfig cfg;
  if (!ctx.config_path.empty()) cfg.apply_file(ctx.config_path);
  for (const auto& [key, value] : ctx.overrides) cfg.set(key, value);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const char* leaf) {
  fs::create_directories(cfg.outdir);
  return (fs::path(cfg.outdir) / leaf).string();
}

std::vector<ClickEvent> load_required_events(const RunConfig& cfg) {
  if (cfg.events_path.empty()) throw ConfigError("events path required (--events or config)");
  auto events = load_events(cfg.events_path);
  if (events.empty()) throw FormatError("no events in " + cfg.events_path);
  return events;
}

/// Training subcommands: an explicit cutoff keeps only events before it;
/// the default (-1) trains on the whole stream.
Corpus load_train_corpus(const RunConfig& cfg) {
  auto events = load_required_events(cfg);
  if (cfg.cutoff_ms < 0) return build_corpus(events);
  auto [train_ev, test_ev] = split_events(events, cfg.cutoff_ms);
  return build_corpus(train_ev);
}

void require_same_items(const ItemIndex& artifact, const ItemIndex& corpus,
                        const std::string& what) {
  if (artifact.size() != corpus.size())
    throw FormatError(what + ": item set differs from the training corpus (" +
                      std::to_string(artifact.size()) + " vs " + std::to_string(corpus.size()) +
                      " items)");
  for (int i = 0; i < corpus.size(); ++i)
    if (artifact.id_of(i) != corpus.id_of(i))
      throw FormatError(what + ": item order differs from the training corpus at row " +
                        std::to_string(i));
}

int cmd_synth(const RunConfig& cfg) {
  SynthOutput out = generate_synth(cfg.synth_params());
  write_file(out_path(cfg, "events.tsv"), serialize_events(out.events));
  write_file(out_path(cfg, "attributes.tsv"), out.attributes_tsv);
  write_file(out_path(cfg, "vectors.tsv"), out.vectors_tsv);
  std::printf("synth: %zu events, %d items, %d users -> %s\n", out.events.size(), cfg.synth_items,
              cfg.synth_users, cfg.outdir.c_str());
  return 0;
}

int cmd_ingest(const RunConfig& cfg) {
  auto events = load_required_events(cfg);
  std::int64_t cutoff = cfg.cutoff_ms >= 0 ? cfg.cutoff_ms : auto_cutoff_ms(events);
  auto [train_ev, test_ev] = split_events(events, cutoff);
  Corpus train = build_corpus(train_ev);
  Corpus test = build_corpus(test_ev);

  std::string train_text, test_text;
  for (const auto& e : train_ev) train_text += serialize_event(e);
  for (const auto& e : test_ev) test_text += serialize_event(e);
  write_file(out_path(cfg, "train_events.tsv"), train_text);
  write_file(out_path(cfg, "test_events.tsv"), test_text);

  std::printf("ingest: %zu events, cutoff %lld ms\n", events.size(),
              static_cast<long long>(cutoff));
  std::printf("  train: %lld events, %zu users, %d items\n",
              static_cast<long long>(train.total_events()), train.sessions.size(),
              train.items.size());
  std::printf("  test:  %lld events, %zu users, %d items\n",
              static_cast<long long>(test.total_events()), test.sessions.size(),
              test.items.size());
  return 0;
}

int cmd_train_cf(const RunConfig& cfg) {
  Corpus train = load_train_corpus(cfg);
  AttributeStore attrs;
  if (!cfg.attributes_path.empty()) attrs = AttributeStore::load(cfg.attributes_path);
  SimilarityTable table = compute_similarity_table(train, attrs, cfg.cf_params());
  std::string path = out_path(cfg, "sim_table.tsv");
  save_similarity_table(table, train.items, path);
  std::printf("train-cf: %d items -> %s\n", train.items.size(), path.c_str());
  return 0;
}

int cmd_pool(const RunConfig& cfg, const std::string& table_path) {
  SimilarityArtifact art = load_similarity_table(table_path);
  AttributeStore attrs;
  if (!cfg.attributes_path.empty()) attrs = AttributeStore::load(cfg.attributes_path);
  AttributeIndex attr_index = build_attribute_index(art.items, attrs, cfg.top_n);
  std::vector<int> fresh;
  if (!cfg.new_items_path.empty()) {
    std::vector<std::string> skipped;
    fresh = load_new_items(cfg.new_items_path, art.items, &skipped);
    for (const auto& id : skipped)
      std::fprintf(stderr, "pool: new item '%s' not in the similarity table, skipped\n",
                   id.c_str());
  }
  CandidatePool pools = build_pools(art.table, attr_index, fresh, cfg.pool_quotas(), cfg.pool_size);
  std::string path = out_path(cfg, "pools.tsv");
  save_pools(pools, art.items, path);
  std::printf("pool: %zu pools -> %s\n", pools.pools.size(), path.c_str());
  return 0;
}

int cmd_train_item2vec(const RunConfig& cfg) {
  Corpus train = load_train_corpus(cfg);
  TrainStats stats;
  EmbeddingModel model = train_item2vec(train, cfg.i2v_config(), &stats);
  std::string path = out_path(cfg, "item2vec.model");
  save_embedding_model(model, train.items, path);
  std::printf("train-item2vec: %d items, %llu cases", train.items.size(),
              static_cast<unsigned long long>(stats.cases));
  if (!stats.epoch_mean_loss.empty())
    std::printf(", final epoch mean loss %s", fmt6(stats.epoch_mean_loss.back()).c_str());
  std::printf(" -> %s\n", path.c_str());
  return 0;
}

int cmd_train_personalized(const RunConfig& cfg) {
  Corpus train = load_train_corpus(cfg);
  TrainStats stats;
  PersonalizedModel model = train_personalized(train, cfg.pers_config(), &stats);
  std::string path = out_path(cfg, "personalized.model");
  save_personalized_model(model, train.items, path);
  std::printf("train-personalized: %d items, omega %s, %llu cases", train.items.size(),
              fmt6(cfg.omega).c_str(), static_cast<unsigned long long>(stats.cases));
  if (!stats.epoch_mean_loss.empty())
    std::printf(", final epoch mean loss %s", fmt6(stats.epoch_mean_loss.back()).c_str());
  std::printf(" -> %s\n", path.c_str());
  return 0;
}

struct EvalPaths {
  std::string pools;
  std::string sim_table;
  std::string item2vec;
  std::string personalized;
  std::string addcart_model;
  bool with_oracle = false;
  bool with_random = true;
};

int cmd_evaluate(const RunConfig& cfg, const EvalPaths& paths) {
  auto events = load_required_events(cfg);
  std::int64_t cutoff = cfg.cutoff_ms >= 0 ? cfg.cutoff_ms : auto_cutoff_ms(events);
  auto [train, test] = temporal_split(events, cutoff);
  if (test.total_events() == 0) throw FormatError("no test events after cutoff");

  PoolArtifact pools = load_pools(paths.pools, cfg.pool_size);
  require_same_items(pools.items, train.items, paths.pools);
  auto cases = build_cases(train, test, cfg.eval_options());

  std::vector<RankerEntry> rankers;
  std::vector<std::unique_ptr<Ranker>> owned;
  FeatureVectorStore vectors;
  if (!cfg.vectors_path.empty()) {
    vectors = FeatureVectorStore::load(cfg.vectors_path);
    owned.push_back(std::make_unique<ImageRanker>(vectors, train.items));
    rankers.push_back({"image", owned.back().get()});
  }
  SimilarityArtifact table;
  if (!paths.sim_table.empty()) {
    table = load_similarity_table(paths.sim_table);
    require_same_items(table.items, train.items, paths.sim_table);
    owned.push_back(std::make_unique<CfTableRanker>(table.table));
    rankers.push_back({"cf", owned.back().get()});
  }
  EmbeddingFile i2v;
  if (!paths.item2vec.empty()) {
    i2v = load_embedding_model(paths.item2vec);
    require_same_items(i2v.items, train.items, paths.item2vec);
    owned.push_back(std::make_unique<Item2vecRanker>(i2v.model));
    rankers.push_back({"item2vec", owned.back().get()});
  }
  PersonalizedFile pers;
  if (!paths.personalized.empty()) {
    pers = load_personalized_model(paths.personalized);
    require_same_items(pers.items, train.items, paths.personalized);
    owned.push_back(std::make_unique<PersonalizedRanker>(pers.model));
    rankers.push_back({"personalized", owned.back().get()});
  }
  PersonalizedFile cart;
  if (!paths.addcart_model.empty()) {
    cart = load_personalized_model(paths.addcart_model);
    require_same_items(cart.items, train.items, paths.addcart_model);
    owned.push_back(std::make_unique<PersonalizedRanker>(cart.model));
    rankers.push_back({"addcart-enhanced", owned.back().get()});
  }
  if (paths.with_random) {
    owned.push_back(std::make_unique<RandomRanker>(cfg.seed));
    rankers.push_back({"random", owned.back().get()});
  }
  if (paths.with_oracle) {
    owned.push_back(std::make_unique<OracleRanker>());
    rankers.push_back({"oracle", owned.back().get()});
  }
  if (rankers.empty()) throw ConfigError("no rankers selected; pass at least one model artifact");

  EvalReport report = run_report(cases, pools.pool, rankers, cfg.eval_ks, cfg.workers);
  write_file(out_path(cfg, "report.csv"), write_report_csv(report));
  write_file(out_path(cfg, "report.txt"), write_report_text(report));
  std::printf("%zu cases, cutoff %lld ms\n\n%s", cases.size(), static_cast<long long>(cutoff),
              write_report_text(report).c_str());
  return 0;
}

struct ServePaths {
  std::string model;
  std::string pools;
  std::string sim_table;
};

int cmd_serve(const RunConfig& cfg, const ServePaths& paths) {
  ServeConfig sc;
  sc.k = cfg.serve_k;
  sc.fallback = cfg.serve_fallback;
  sc.latency_budget_ms = cfg.latency_budget_ms;
  sc.session_ttl_ms = static_cast<std::int64_t>(cfg.session_ttl_minutes) * 60000;
  sc.host = cfg.host;
  sc.port = cfg.port;
  ServingEngine engine = ServingEngine::from_files(paths.model, paths.pools, paths.sim_table, sc);
  httplib::Server server;
  attach_routes(server, engine);
  std::printf("serving %d items (d=%d) on http://%s:%d\n", engine.item_count(), engine.dim(),
              sc.host.c_str(), sc.port);
  std::fflush(stdout);
  if (!server.listen(sc.host, sc.port))
    throw IoError("cannot bind " + sc.host + ":" + std::to_string(sc.port));
  return 0;
}

int cmd_pipeline(const RunConfig& cfg) {
  PipelineResult result = run_pipeline(cfg);
  std::printf("%s", write_report_text(result.report).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"similar-product recommendation toolkit"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<SubCtx>> ctxs;
  auto make_sub = [&](const char* name, const char* desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    ctxs.push_back(std::make_unique<SubCtx>());
    add_config_options(cmd, *ctxs.back());
    return std::make_pair(cmd, ctxs.back().get());
  };

  int rc = 0;

  auto [synth_cmd, synth_ctx] = make_sub("synth", "generate a planted-cluster corpus");
  synth_cmd->callback([&, ctx = synth_ctx] { rc = cmd_synth(make_config(*ctx)); });

  auto [ingest_cmd, ingest_ctx] = make_sub("ingest", "parse, split, and summarize a clickstream");
  ingest_cmd->callback([&, ctx = ingest_ctx] { rc = cmd_ingest(make_config(*ctx)); });

  auto [cf_cmd, cf_ctx] = make_sub("train-cf", "build the blended similarity table");
  cf_cmd->callback([&, ctx = cf_ctx] { rc = cmd_train_cf(make_config(*ctx)); });

  auto [pool_cmd, pool_ctx] = make_sub("pool", "build 200-candidate pools from a similarity table");
  auto pool_table = std::make_shared<std::string>();
  pool_cmd->add_option("--sim-table", *pool_table, "similarity table artifact")->required();
  pool_cmd->callback([&, ctx = pool_ctx] { rc = cmd_pool(make_config(*ctx), *pool_table); });

  auto [i2v_cmd, i2v_ctx] = make_sub("train-item2vec", "train the skip-gram item embedding");
  i2v_cmd->callback([&, ctx = i2v_ctx] { rc = cmd_train_item2vec(make_config(*ctx)); });

  auto [pers_cmd, pers_ctx] = make_sub("train-personalized", "train the windowed personalized model");
  pers_cmd->callback([&, ctx = pers_ctx] { rc = cmd_train_personalized(make_config(*ctx)); });

  auto [eval_cmd, eval_ctx] = make_sub("evaluate", "hit-ratio report for built artifacts");
  auto eval_paths = std::make_shared<EvalPaths>();
  eval_cmd->add_option("--pools", eval_paths->pools, "pool artifact")->required();
  eval_cmd->add_option("--sim-table", eval_paths->sim_table, "similarity table artifact");
  eval_cmd->add_option("--item2vec", eval_paths->item2vec, "item2vec model");
  eval_cmd->add_option("--personalized", eval_paths->personalized, "personalized model");
  eval_cmd->add_option("--addcart-model", eval_paths->addcart_model,
                       "personalized model trained with add-cart weighting");
  eval_cmd->add_flag("--with-oracle", eval_paths->with_oracle, "include the oracle ceiling row");
  eval_cmd->add_flag("!--no-random", eval_paths->with_random, "drop the random baseline row");
  eval_cmd->callback([&, ctx = eval_ctx] { rc = cmd_evaluate(make_config(*ctx), *eval_paths); });

  auto [serve_cmd, serve_ctx] = make_sub("serve", "HTTP service for personalized similar items");
  auto serve_paths = std::make_shared<ServePaths>();
  serve_cmd->add_option("--model", serve_paths->model, "personalized model")->required();
  serve_cmd->add_option("--pools", serve_paths->pools, "pool artifact")->required();
  serve_cmd->add_option("--sim-table", serve_paths->sim_table, "similarity table artifact")
      ->required();
  serve_cmd->callback([&, ctx = serve_ctx] { rc = cmd_serve(make_config(*ctx), *serve_paths); });

  auto [pipe_cmd, pipe_ctx] = make_sub("pipeline", "split, train everything, evaluate");
  pipe_cmd->callback([&, ctx = pipe_ctx] { rc = cmd_pipeline(make_config(*ctx)); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const AbsentItemError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const EvalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return rc;
}
