#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "simrec/synth.hpp"
#include "simrec/vectors.hpp"

using namespace simrec;

namespace {

int item_number(const std::string& id) { return std::stoi(id.substr(1)); }

int cluster_of(int item, const SynthParams& p) {
  return static_cast<int>(((static_cast<std::int64_t>(item) + 1) * p.clusters - 1) / p.items);
}

}  // namespace

TEST(SynthShape, CountsAndTimestamps) {
  SynthParams p;
  p.users = 30;
  p.items = 40;
  p.clusters = 4;
  p.days = 3;
  p.events_per_user = 10;
  SynthOutput out = generate_synth(p);
  EXPECT_EQ(out.events.size(), 300u);
  std::int64_t span = 86400000LL * 3;
  std::string last_user;
  std::int64_t last_ts = -1;
  for (const auto& ev : out.events) {
    EXPECT_GE(ev.timestamp_ms, 0);
    EXPECT_LT(ev.timestamp_ms, span);
    if (ev.user_id == last_user) EXPECT_GE(ev.timestamp_ms, last_ts);
    last_user = ev.user_id;
    last_ts = ev.timestamp_ms;
  }
  // ten events over three days must cross a day boundary for every user
  EXPECT_EQ(out.events[0].timestamp_ms, 0);
  EXPECT_GT(out.events[9].timestamp_ms, 2 * 86400000LL);
}

TEST(SynthShape, DeterministicPerSeed) {
  SynthParams p;
  p.users = 20;
  p.items = 30;
  p.clusters = 3;
  p.events_per_user = 8;
  SynthOutput a = generate_synth(p);
  SynthOutput b = generate_synth(p);
  EXPECT_EQ(serialize_events(a.events), serialize_events(b.events));
  EXPECT_EQ(a.attributes_tsv, b.attributes_tsv);
  EXPECT_EQ(a.vectors_tsv, b.vectors_tsv);
  p.seed = 43;
  SynthOutput c = generate_synth(p);
  EXPECT_NE(serialize_events(a.events), serialize_events(c.events));
}

TEST(SynthEvents, AddcartRateWithinBinomialBand) {
  SynthParams p;
  p.users = 100;
  p.items = 50;
  p.clusters = 5;
  p.events_per_user = 100;
  p.addcart_rate = 0.1;
  SynthOutput out = generate_synth(p);
  double n = static_cast<double>(out.events.size());
  double carts = 0;
  for (const auto& ev : out.events)
    if (ev.kind == EventKind::AddCart) carts += 1;
  double sigma = std::sqrt(n * 0.1 * 0.9);
  EXPECT_NEAR(carts, 0.1 * n, 4 * sigma);

  p.addcart_rate = 0.0;
  for (const auto& ev : generate_synth(p).events) EXPECT_EQ(ev.kind, EventKind::Click);
}

TEST(SynthEvents, UsersStayInTheirCluster) {
  SynthParams p;
  p.users = 40;
  p.items = 80;
  p.clusters = 4;
  p.events_per_user = 50;
  p.p_in = 1.0;  // no escape hatch: every click lands in the user's block
  SynthOutput out = generate_synth(p);
  for (const auto& ev : out.events) {
    int u = std::stoi(ev.user_id.substr(1));
    EXPECT_EQ(cluster_of(item_number(ev.item_id), p), u % p.clusters);
  }

  p.p_in = 0.0;  // now items spread across many clusters
  SynthOutput spread = generate_synth(p);
  std::set<int> clusters_hit;
  for (const auto& ev : spread.events)
    if (ev.user_id == "u0") clusters_hit.insert(cluster_of(item_number(ev.item_id), p));
  EXPECT_GT(clusters_hit.size(), 1u);
}

TEST(SynthEvents, SingleClusterIsNullModel) {
  SynthParams p;
  p.users = 10;
  p.items = 12;
  p.clusters = 1;
  p.events_per_user = 20;
  p.p_in = 0.5;
  SynthOutput out = generate_synth(p);
  for (const auto& ev : out.events) EXPECT_EQ(cluster_of(item_number(ev.item_id), p), 0);
}

TEST(SynthEvents, ZipfSkewsInClusterPopularity) {
  SynthParams p;
  p.users = 60;
  p.items = 60;
  p.clusters = 3;
  p.events_per_user = 60;
  p.p_in = 1.0;
  p.zipf_s = 1.2;
  SynthOutput out = generate_synth(p);
  // block for cluster 0 is items 0..19; item 0 is rank 1, item 19 rank 20
  std::int64_t head = 0, tail = 0;
  for (const auto& ev : out.events) {
    int item = item_number(ev.item_id);
    if (item == 0) ++head;
    if (item == 19) ++tail;
  }
  EXPECT_GT(head, 3 * std::max<std::int64_t>(tail, 1));

  p.zipf_s = 0.0;  // uniform in cluster
  SynthOutput flat = generate_synth(p);
  std::vector<std::int64_t> counts(20, 0);
  for (const auto& ev : flat.events) {
    int item = item_number(ev.item_id);
    if (item < 20) ++counts[static_cast<size_t>(item)];
  }
  double mean = 0;
  for (auto c : counts) mean += static_cast<double>(c) / 20.0;
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), mean, 6 * std::sqrt(mean));
}

TEST(SynthEvents, CartBiasTargetsBlockTail) {
  SynthParams p;
  p.users = 50;
  p.items = 100;
  p.clusters = 5;  // blocks of 20
  p.events_per_user = 60;
  p.addcart_rate = 0.3;
  p.cart_items_per_cluster = 4;  // carts land in the last 4 items of the block
  SynthOutput out = generate_synth(p);
  int carts = 0;
  for (const auto& ev : out.events) {
    if (ev.kind != EventKind::AddCart) continue;
    ++carts;
    int item = item_number(ev.item_id);
    int c = std::stoi(ev.user_id.substr(1)) % p.clusters;
    int hi = (c + 1) * p.items / p.clusters;
    EXPECT_GE(item, hi - 4);
    EXPECT_LT(item, hi);
  }
  EXPECT_GT(carts, 0);
}

TEST(SynthAttributes, ClusterAndBandTokens) {
  SynthParams p;
  p.users = 5;
  p.items = 16;
  p.clusters = 2;
  p.events_per_user = 4;
  SynthOutput out = generate_synth(p);
  auto path = (std::filesystem::temp_directory_path() / "simrec_synth_attrs.tsv").string();
  write_file(path, out.attributes_tsv);
  AttributeStore attrs = AttributeStore::load(path);
  EXPECT_EQ(attrs.attribute_set("i0"), (std::set<std::string>{"c0", "b0_0"}));
  EXPECT_EQ(attrs.attribute_set("i7"), (std::set<std::string>{"c0", "b0_3"}));
  EXPECT_EQ(attrs.attribute_set("i8"), (std::set<std::string>{"c1", "b1_0"}));
  EXPECT_EQ(attrs.attribute_set("i15"), (std::set<std::string>{"c1", "b1_3"}));
  std::filesystem::remove(path);
}

TEST(SynthVectors, ClusterStructureInCosine) {
  SynthParams p;
  p.users = 5;
  p.items = 40;
  p.clusters = 4;
  p.events_per_user = 4;
  p.vector_dim = 12;
  p.vector_noise = 0.2;
  SynthOutput out = generate_synth(p);
  auto path = (std::filesystem::temp_directory_path() / "simrec_synth_vecs.tsv").string();
  write_file(path, out.vectors_tsv);
  FeatureVectorStore store = FeatureVectorStore::load(path);
  EXPECT_EQ(store.size(), 40);
  EXPECT_EQ(store.dim(), 12);
  // normalized rows
  EXPECT_NEAR(norm(store.row("i0")), 1.0, 1e-6);
  // same-cluster pairs sit closer than cross-cluster pairs on average
  double within = 0, across = 0;
  int nw = 0, na = 0;
  for (int i = 0; i < 40; i += 3)
    for (int j = i + 1; j < 40; j += 3) {
      double cs = store.cosine("i" + std::to_string(i), "i" + std::to_string(j));
      if (cluster_of(i, p) == cluster_of(j, p)) within += cs, ++nw;
      else across += cs, ++na;
    }
  ASSERT_GT(nw, 0);
  ASSERT_GT(na, 0);
  EXPECT_GT(within / nw, across / na + 0.3);
  std::filesystem::remove(path);
}

TEST(SynthParamsCheck, Validation) {
  SynthParams p;
  p.clusters = 0;
  EXPECT_THROW(generate_synth(p), ConfigError);
  p = {};
  p.clusters = p.items + 1;
  EXPECT_THROW(generate_synth(p), ConfigError);
  p = {};
  p.addcart_rate = 1.5;
  EXPECT_THROW(generate_synth(p), ConfigError);
  p = {};
  p.events_per_user = 0;
  EXPECT_THROW(generate_synth(p), ConfigError);
}
