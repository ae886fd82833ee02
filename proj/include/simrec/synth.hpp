#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "simrec/ingest.hpp"
#include "simrec/rng.hpp"
#include "simrec/textio.hpp"
#include "simrec/types.hpp"

namespace simrec {

/// Planted-cluster clickstream: items form contiguous cluster blocks, every
/// user belongs to one cluster and clicks inside it with probability p_in.
/// In-cluster popularity is Zipf(zipf_s) so transitions have a learnable
/// head. With cart_items_per_cluster > 0, add-cart events target a fixed
/// tail slice of the block instead, giving add-cart transitions their own
/// distribution.
struct SynthParams {
  int users = 2000;
  int items = 1000;
  int clusters = 8;
  int days = 8;  // the pipeline's auto cutoff makes this a days-1 / 1 split
  int events_per_user = 40;
  double addcart_rate = 0.1;
  double p_in = 0.9;
  double zipf_s = 1.0;
  int cart_items_per_cluster = 0;
  int vector_dim = 16;
  double vector_noise = 0.25;
  std::uint64_t seed = 42;

  void validate() const {
    if (users < 1) throw ConfigError("users must be >= 1");
    if (items < 1) throw ConfigError("items must be >= 1");
    if (clusters < 1 || clusters > items) throw ConfigError("clusters must be in [1, items]");
    if (days < 1) throw ConfigError("days must be >= 1");
    if (events_per_user < 1) throw ConfigError("events_per_user must be >= 1");
    if (addcart_rate < 0 || addcart_rate > 1) throw ConfigError("addcart_rate must be in [0,1]");
    if (p_in < 0 || p_in > 1) throw ConfigError("p_in must be in [0,1]");
    if (zipf_s < 0) throw ConfigError("zipf_s must be >= 0");
    if (cart_items_per_cluster < 0) throw ConfigError("cart_items_per_cluster must be >= 0");
    if (vector_dim < 1) throw ConfigError("vector_dim must be >= 1");
    if (vector_noise < 0) throw ConfigError("vector_noise must be >= 0");
  }
};

struct SynthOutput {
  std::vector<ClickEvent> events;  // user-major, timestamps increasing per user
  std::string attributes_tsv;
  std::string vectors_tsv;
};

namespace detail {

inline double gaussian(Rng& rng) {
  double u1 = 1.0 - rng.uniform_real();  // (0,1], keeps the log finite
  double u2 = rng.uniform_real();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace detail

inline SynthOutput generate_synth(const SynthParams& p) {
  p.validate();
  constexpr std::int64_t kDayMs = 86400000;

  auto block_start = [&](int c) {
    return static_cast<int>(static_cast<std::int64_t>(c) * p.items / p.clusters);
  };
  // Inverse of block_start for near-equal blocks [c*items/n, (c+1)*items/n).
  auto cluster_of = [&](int item) {
    return static_cast<int>(((static_cast<std::int64_t>(item) + 1) * p.clusters - 1) / p.items);
  };

  // Zipf cumulative weights per cluster block, rank order = block order.
  std::vector<std::vector<double>> zipf_cum(static_cast<size_t>(p.clusters));
  for (int c = 0; c < p.clusters; ++c) {
    int lo = block_start(c), hi = block_start(c + 1);
    auto& cum = zipf_cum[static_cast<size_t>(c)];
    double acc = 0.0;
    for (int r = 1; r <= hi - lo; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r), p.zipf_s);
      cum.push_back(acc);
    }
  }
  auto draw_in_cluster = [&](int c, Rng& rng) {
    const auto& cum = zipf_cum[static_cast<size_t>(c)];
    double u = rng.uniform_real() * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    size_t r = std::min(static_cast<size_t>(it - cum.begin()), cum.size() - 1);
    return block_start(c) + static_cast<int>(r);
  };
  auto draw_cart_item = [&](int c, Rng& rng) {
    int lo = block_start(c), hi = block_start(c + 1);
    int span = std::min(p.cart_items_per_cluster, hi - lo);
    return hi - span + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(span)));
  };

  SynthOutput out;
  out.events.reserve(static_cast<size_t>(p.users) * static_cast<size_t>(p.events_per_user));
  Rng ev_rng(mix_seed(p.seed, 2));
  std::int64_t span_ms = kDayMs * p.days;
  for (int u = 0; u < p.users; ++u) {
    int c = u % p.clusters;
    std::string user_id = "u" + std::to_string(u);
    for (int e = 0; e < p.events_per_user; ++e) {
      bool cart = ev_rng.bernoulli(p.addcart_rate);
      int item;
      if (cart && p.cart_items_per_cluster > 0)
        item = draw_cart_item(c, ev_rng);
      else if (ev_rng.bernoulli(p.p_in))
        item = draw_in_cluster(c, ev_rng);
      else
        item = ev_rng.uniform_int(p.items);
      ClickEvent ev;
      ev.user_id = user_id;
      ev.item_id = "i" + std::to_string(item);
      ev.timestamp_ms = span_ms * e / p.events_per_user;
      ev.kind = cart ? EventKind::AddCart : EventKind::Click;
      out.events.push_back(std::move(ev));
    }
  }

  // Attributes: a cluster token plus a quartile band token within the block.
  for (int i = 0; i < p.items; ++i) {
    int c = cluster_of(i);
    int lo = block_start(c), hi = block_start(c + 1);
    int band = hi - lo <= 1 ? 0 : (i - lo) * 4 / (hi - lo);
    out.attributes_tsv += "i" + std::to_string(i) + "\tc" + std::to_string(c) + "\tb" +
                          std::to_string(c) + "_" + std::to_string(band) + "\n";
  }

  // Vectors: noisy copies of a per-cluster base direction, normalized.
  Rng vec_rng(mix_seed(p.seed, 1));
  std::vector<std::vector<double>> base(static_cast<size_t>(p.clusters));
  for (int c = 0; c < p.clusters; ++c) {
    auto& b = base[static_cast<size_t>(c)];
    b.resize(static_cast<size_t>(p.vector_dim));
    double n2 = 0.0;
    for (auto& x : b) {
      x = detail::gaussian(vec_rng);
      n2 += x * x;
    }
    double inv = 1.0 / std::sqrt(n2);
    for (auto& x : b) x *= inv;
  }
  for (int i = 0; i < p.items; ++i) {
    const auto& b = base[static_cast<size_t>(cluster_of(i))];
    std::vector<double> v(static_cast<size_t>(p.vector_dim));
    double n2 = 0.0;
    for (int k = 0; k < p.vector_dim; ++k) {
      v[static_cast<size_t>(k)] = b[static_cast<size_t>(k)] + p.vector_noise * detail::gaussian(vec_rng);
      n2 += v[static_cast<size_t>(k)] * v[static_cast<size_t>(k)];
    }
    double inv = n2 > 0 ? 1.0 / std::sqrt(n2) : 1.0;
    out.vectors_tsv += "i" + std::to_string(i) + "\t";
    for (int k = 0; k < p.vector_dim; ++k) {
      if (k) out.vectors_tsv += ',';
      out.vectors_tsv += fmt9(v[static_cast<size_t>(k)] * inv);
    }
    out.vectors_tsv += '\n';
  }
  return out;
}

inline std::string serialize_events(const std::vector<ClickEvent>& events) {
  std::string out;
  for (const auto& ev : events) out += serialize_event(ev);
  return out;
}

}  // namespace simrec
