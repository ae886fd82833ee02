#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "simrec/item2vec.hpp"
#include "simrec/rng.hpp"
#include "simrec/types.hpp"
#include "simrec/vectors.hpp"

namespace simrec {

enum class AddCartScope { Session, Event };

struct PersonalizedConfig {
  int window = 8;  // total slots, the current item occupies the last one
  int negatives = 8;
  int dim = 64;
  double learning_rate = 0.025;
  int epochs = 5;
  double omega = 2.0;  // loss multiplier for add-cart cases
  AddCartScope addcart_scope = AddCartScope::Session;
  std::uint64_t seed = 42;
  int workers = 1;

  void validate() const {
    if (window < 1) throw ConfigError("window must be >= 1");
    if (negatives < 1) throw ConfigError("negatives must be >= 1");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (omega <= 0) throw ConfigError("omega must be > 0");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }
};

/// Item embeddings plus one learnable weight per window slot. Biases in the
/// underlying tables stay zero; scoring never reads them.
struct PersonalizedModel {
  EmbeddingModel emb;
  std::vector<double> pos_weights;

  int window() const { return static_cast<int>(pos_weights.size()); }
  int vocab() const { return emb.vocab(); }
  int dim() const { return emb.dim; }
};

inline PersonalizedModel init_personalized_model(int vocab, const PersonalizedConfig& config,
                                                 Rng& rng) {
  PersonalizedModel m;
  m.emb = init_embedding_model(vocab, config.dim, rng);
  m.pos_weights.assign(static_cast<size_t>(config.window), 1.0);
  return m;
}

/// Pooled user vector u = (1/n) * sum_j w_j * v_j over the window items.
/// `window_items` holds at most window() valid ids, oldest first; they map to
/// the trailing slots so the current item always lands on the last weight.
inline std::vector<double> user_vector(const PersonalizedModel& model,
                                       std::span<const int> window_items) {
  std::vector<double> u(static_cast<size_t>(model.dim()), 0.0);
  size_t n = window_items.size();
  if (n == 0) return u;
  size_t base = static_cast<size_t>(model.window()) - n;
  for (size_t i = 0; i < n; ++i) {
    double w = model.pos_weights[base + i] / static_cast<double>(n);
    auto v = model.emb.in_row(window_items[i]);
    for (int k = 0; k < model.dim(); ++k) u[static_cast<size_t>(k)] += w * v[static_cast<size_t>(k)];
  }
  return u;
}

/// Interest score of a candidate: dot(u, v_item) on the input table.
inline double interest_score(const PersonalizedModel& model, std::span<const double> u, int item) {
  return dot(u, model.emb.in_row(item));
}

/// -log softmax(z)[0] with the max-shift applied before exponentiation.
/// z[0] is the observed next item, the rest are negatives.
inline double softmax_ce_loss(std::span<const double> z) {
  double mx = z[0];
  for (double x : z) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - mx);
  return -(z[0] - mx - std::log(sum));
}

/// Loss and exact gradients for one training case, already scaled by the
/// case weight. grad_u feeds the input-row and slot-weight updates; each
/// window occurrence carries its coefficient w_slot/n.
struct PersonalizedStep {
  double loss = 0.0;          // unweighted cross entropy
  double weighted_loss = 0.0; // weight * loss, what SGD minimizes
  std::vector<double> u;                       // pooled vector at old params
  std::vector<double> grad_u;                  // weight * dL/du
  std::vector<std::pair<int, double>> window_coeff;  // (item, w_slot/n)
  std::vector<std::pair<size_t, double>> pos_grad;   // (slot, gradient)
  std::vector<std::pair<int, double>> dz;            // (item, weight * dsoftmax), next first
};

inline PersonalizedStep personalized_forward_backward(const PersonalizedModel& model,
                                                      std::span<const int> window_items, int next,
                                                      std::span<const int> negatives,
                                                      double weight) {
  PersonalizedStep step;
  step.u = user_vector(model, window_items);
  int d = model.dim();

  std::vector<double> z;
  z.reserve(negatives.size() + 1);
  z.push_back(dot(step.u, model.emb.w_row(next)));
  for (int neg : negatives) z.push_back(dot(step.u, model.emb.w_row(neg)));
  step.loss = softmax_ce_loss(z);
  step.weighted_loss = weight * step.loss;

  double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - mx);
  step.dz.reserve(z.size());
  step.grad_u.assign(static_cast<size_t>(d), 0.0);
  for (size_t t = 0; t < z.size(); ++t) {
    double p = std::exp(z[t] - mx) / sum;
    double g = weight * (t == 0 ? p - 1.0 : p);
    int item = t == 0 ? next : negatives[t - 1];
    step.dz.emplace_back(item, g);
    auto w = model.emb.w_row(item);
    for (int k = 0; k < d; ++k) step.grad_u[static_cast<size_t>(k)] += g * w[static_cast<size_t>(k)];
  }

  size_t n = window_items.size();
  if (n > 0) {
    size_t base = static_cast<size_t>(model.window()) - n;
    step.window_coeff.reserve(n);
    step.pos_grad.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      int item = window_items[i];
      step.window_coeff.emplace_back(item, model.pos_weights[base + i] / static_cast<double>(n));
      double g = dot(model.emb.in_row(item), step.grad_u) / static_cast<double>(n);
      step.pos_grad.emplace_back(base + i, g);
    }
  }
  return step;
}

/// SGD update from precomputed gradients. Everything was evaluated at the old
/// parameters, so apply order cannot change the result.
inline void personalized_apply(PersonalizedModel& model, const PersonalizedStep& step, double lr) {
  int d = model.dim();
  for (const auto& [item, g] : step.dz) {
    auto w = model.emb.w_row(item);
    for (int k = 0; k < d; ++k) w[static_cast<size_t>(k)] -= lr * g * step.u[static_cast<size_t>(k)];
  }
  for (const auto& [item, coeff] : step.window_coeff) {
    auto v = model.emb.in_row(item);
    for (int k = 0; k < d; ++k)
      v[static_cast<size_t>(k)] -= lr * coeff * step.grad_u[static_cast<size_t>(k)];
  }
  for (const auto& [slot, g] : step.pos_grad) model.pos_weights[slot] -= lr * g;
}

inline double personalized_train_step(PersonalizedModel& model, std::span<const int> window_items,
                                      int next, std::span<const int> negatives, double weight,
                                      double lr) {
  PersonalizedStep step = personalized_forward_backward(model, window_items, next, negatives, weight);
  personalized_apply(model, step, lr);
  return step.weighted_loss;
}

/// One case per consecutive event pair in every session. The window is the
/// last `window` items up to and including the current one; the loss weight
/// is omega when the next item counts as add-cart under the configured scope.
inline PersonalizedModel train_personalized(const Corpus& corpus, const PersonalizedConfig& config,
                                            TrainStats* stats = nullptr) {
  config.validate();
  int vocab = corpus.items.size();
  Rng init_rng(config.seed);
  PersonalizedModel model = init_personalized_model(vocab, config, init_rng);
  if (stats) *stats = TrainStats{};

  struct SessionCase {
    std::vector<int> seq;
    std::vector<bool> addcart_next;  // for position t, whether case (t -> t+1) is weighted
  };
  std::vector<SessionCase> cases(corpus.sessions.size());
  for (size_t s = 0; s < corpus.sessions.size(); ++s) {
    const auto& evs = corpus.sessions[s].events;
    auto& c = cases[s];
    c.seq.reserve(evs.size());
    for (const auto& ev : evs) c.seq.push_back(ev.item);
    if (evs.size() < 2) continue;
    c.addcart_next.assign(evs.size() - 1, false);
    if (config.addcart_scope == AddCartScope::Event) {
      for (size_t t = 0; t + 1 < evs.size(); ++t)
        c.addcart_next[t] = evs[t + 1].kind == EventKind::AddCart;
    } else {
      std::unordered_set<int> carted;
      for (const auto& ev : evs)
        if (ev.kind == EventKind::AddCart) carted.insert(ev.item);
      for (size_t t = 0; t + 1 < evs.size(); ++t)
        c.addcart_next[t] = carted.count(c.seq[t + 1]) > 0;
    }
  }

  std::vector<std::int64_t> exclude_mark(static_cast<size_t>(vocab), -1);
  auto run_range = [&](size_t lo, size_t hi, Rng& rng, std::vector<std::int64_t>& mark,
                       double& loss_sum, std::uint64_t& count, std::uint64_t& skipped) {
    std::vector<int> negatives;
    std::int64_t stamp = 0;
    for (size_t s = lo; s < hi; ++s) {
      const auto& c = cases[s];
      int len = static_cast<int>(c.seq.size());
      for (int t = 0; t + 1 < len; ++t) {
        int lo_idx = std::max(0, t + 1 - config.window);
        std::span<const int> window_items(c.seq.data() + lo_idx,
                                          static_cast<size_t>(t + 1 - lo_idx));
        int next = c.seq[static_cast<size_t>(t) + 1];

        ++stamp;
        int distinct = 0;
        auto mark_item = [&](int it) {
          if (mark[static_cast<size_t>(it)] != stamp) {
            mark[static_cast<size_t>(it)] = stamp;
            ++distinct;
          }
        };
        for (int it : window_items) mark_item(it);
        mark_item(next);
        if (vocab - distinct < 1) {
          ++skipped;
          continue;
        }
        negatives.clear();
        while (static_cast<int>(negatives.size()) < config.negatives) {
          int cand = rng.uniform_int(vocab);
          if (mark[static_cast<size_t>(cand)] != stamp) negatives.push_back(cand);
        }
        double weight = c.addcart_next[static_cast<size_t>(t)] ? config.omega : 1.0;
        loss_sum += personalized_train_step(model, window_items, next, negatives, weight,
                                            config.learning_rate);
        ++count;
      }
    }
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::uint64_t count = 0, skipped = 0;
    if (config.workers == 1) {
      Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
      run_range(0, cases.size(), rng, exclude_mark, loss_sum, count, skipped);
    } else {
      size_t workers = static_cast<size_t>(config.workers);
      std::vector<double> sums(workers, 0.0);
      std::vector<std::uint64_t> counts(workers, 0), skips(workers, 0);
      std::vector<std::thread> threads;
      size_t chunk = (cases.size() + workers - 1) / workers;
      for (size_t w = 0; w < workers; ++w) {
        size_t lo = std::min(cases.size(), w * chunk);
        size_t hi = std::min(cases.size(), (w + 1) * chunk);
        threads.emplace_back([&, w, lo, hi] {
          std::vector<std::int64_t> mark(static_cast<size_t>(vocab), -1);
          Rng rng(mix_seed(config.seed, (static_cast<std::uint64_t>(epoch) + 1) * 1000 + w));
          run_range(lo, hi, rng, mark, sums[w], counts[w], skips[w]);
        });
      }
      for (auto& t : threads) t.join();
      for (size_t w = 0; w < workers; ++w) loss_sum += sums[w], count += counts[w], skipped += skips[w];
    }
    if (stats) {
      stats->epoch_mean_loss.push_back(count ? loss_sum / static_cast<double>(count) : 0.0);
      stats->cases += count;
      stats->skipped += skipped;
    }
  }
  return model;
}

/// Canonical ranking path shared by offline evaluation and serving: append
/// the current item to the recents, keep the trailing window, drop ids the
/// model does not know, pool, then score the pool. Candidates without a
/// model row go after all scored ones in pool order.
inline RankedList rank_candidates(const PersonalizedModel& model, std::span<const int> recents,
                                  int current, std::span<const int> pool, int k) {
  std::vector<int> hist(recents.begin(), recents.end());
  hist.push_back(current);
  size_t window = static_cast<size_t>(model.window());
  if (hist.size() > window) hist.erase(hist.begin(), hist.end() - static_cast<long>(window));
  std::erase_if(hist, [&](int it) { return it < 0 || it >= model.vocab(); });

  std::vector<double> u = user_vector(model, hist);
  RankedList scored;
  RankedList unknown;
  for (int cand : pool) {
    if (cand >= 0 && cand < model.vocab())
      scored.push_back({cand, interest_score(model, u, cand)});
    else
      unknown.push_back({cand, 0.0});
  }
  sort_neighbors(scored);
  for (const auto& e : unknown) scored.push_back(e);
  if (k >= 0 && scored.size() > static_cast<size_t>(k)) scored.resize(static_cast<size_t>(k));
  return scored;
}

inline void save_personalized_model(const PersonalizedModel& model, const ItemIndex& items,
                                    const std::string& path) {
  write_file(path, serialize_embedding(model.emb, items, /*has_bias=*/false, &model.pos_weights));
}

struct PersonalizedFile {
  ItemIndex items;
  PersonalizedModel model;
};

inline PersonalizedFile load_personalized_model(const std::string& path) {
  EmbeddingFile file = load_embedding_file(path);
  if (!file.pos_weights)
    throw FormatError(path + ": model lacks position weights; expected a personalized model");
  PersonalizedFile out;
  out.items = std::move(file.items);
  out.model.emb = std::move(file.model);
  out.model.pos_weights = std::move(*file.pos_weights);
  if (out.model.pos_weights.empty()) throw FormatError(path + ": empty position weight list");
  return out;
}

}  // namespace simrec
