#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "simrec/rng.hpp"
#include "simrec/textio.hpp"
#include "simrec/types.hpp"
#include "simrec/vectors.hpp"

namespace simrec {

/// Two parallel item-vector tables. Only the input table is read at scoring
/// time; the weight table (and biases) exist for training.
struct EmbeddingModel {
  int dim = 0;
  std::vector<double> input;   // V x d
  std::vector<double> weight;  // V x d
  std::vector<double> bias;    // V

  int vocab() const { return dim == 0 ? 0 : static_cast<int>(bias.size()); }

  std::span<double> in_row(int i) {
    return std::span<double>(input).subspan(static_cast<size_t>(i) * dim,
                                            static_cast<size_t>(dim));
  }
  std::span<const double> in_row(int i) const {
    return std::span<const double>(input).subspan(static_cast<size_t>(i) * dim,
                                                  static_cast<size_t>(dim));
  }
  std::span<double> w_row(int i) {
    return std::span<double>(weight).subspan(static_cast<size_t>(i) * dim,
                                             static_cast<size_t>(dim));
  }
  std::span<const double> w_row(int i) const {
    return std::span<const double>(weight).subspan(static_cast<size_t>(i) * dim,
                                                   static_cast<size_t>(dim));
  }
};

struct TrainConfig {
  int window = 2;
  int negatives = 8;
  int dim = 64;
  double learning_rate = 0.025;
  int epochs = 5;
  std::uint64_t seed = 42;
  int workers = 1;
  bool unigram_negatives = false;  // unigram^0.75 instead of uniform

  void validate() const {
    if (window < 1) throw ConfigError("window must be >= 1");
    if (negatives < 1) throw ConfigError("negatives must be >= 1");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }
};

/// Input rows uniform in [-0.5/d, 0.5/d]; weights and biases start at zero.
inline EmbeddingModel init_embedding_model(int vocab, int dim, Rng& rng) {
  EmbeddingModel m;
  m.dim = dim;
  m.input.resize(static_cast<size_t>(vocab) * dim);
  m.weight.assign(static_cast<size_t>(vocab) * dim, 0.0);
  m.bias.assign(static_cast<size_t>(vocab), 0.0);
  double half = 0.5 / dim;
  for (auto& x : m.input) x = rng.uniform_range(-half, half);
  return m;
}

/// Skip-gram pairs: (v_i, v_j) for all j with 0 < |i-j| <= l within one
/// session, offsets enumerated left to right.
inline std::vector<std::pair<int, int>> generate_pairs(std::span<const int> session, int l) {
  std::vector<std::pair<int, int>> pairs;
  int n = static_cast<int>(session.size());
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - l), hi = std::min(n - 1, i + l);
    for (int j = lo; j <= hi; ++j) {
      if (j == i) continue;
      pairs.emplace_back(session[static_cast<size_t>(i)], session[static_cast<size_t>(j)]);
    }
  }
  return pairs;
}

/// Draws negatives uniformly from V (or unigram^0.75 when configured),
/// with replacement, rejecting excluded items.
class NegativeSampler {
 public:
  explicit NegativeSampler(int vocab) : vocab_(vocab) {}

  NegativeSampler(int vocab, std::span<const std::int64_t> counts) : vocab_(vocab) {
    cumulative_.reserve(static_cast<size_t>(vocab));
    double acc = 0.0;
    for (int i = 0; i < vocab; ++i) {
      acc += std::pow(static_cast<double>(std::max<std::int64_t>(counts[static_cast<size_t>(i)], 0)), 0.75);
      cumulative_.push_back(acc);
    }
    if (acc <= 0.0) cumulative_.clear();  // degenerate counts: fall back to uniform
  }

  int vocab() const { return vocab_; }

  int draw(Rng& rng) const {
    if (cumulative_.empty()) return rng.uniform_int(vocab_);
    double u = rng.uniform_real() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(std::min<size_t>(static_cast<size_t>(it - cumulative_.begin()),
                                             cumulative_.size() - 1));
  }

 private:
  int vocab_ = 0;
  std::vector<double> cumulative_;  // empty => uniform
};

inline int count_distinct(std::span<const int> items) {
  std::vector<int> v(items.begin(), items.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return static_cast<int>(v.size());
}

/// n items from V \ exclude, with replacement among the remainder.
inline std::vector<int> sample_negatives(int n, std::span<const int> exclude,
                                         const NegativeSampler& sampler, Rng& rng) {
  if (sampler.vocab() - count_distinct(exclude) < 1)
    throw ConfigError("vocabulary too small to sample negatives");
  std::vector<int> out;
  out.reserve(static_cast<size_t>(n));
  while (static_cast<int>(out.size()) < n) {
    int cand = sampler.draw(rng);
    bool excluded = false;
    for (int e : exclude) {
      if (cand == e) {
        excluded = true;
        break;
      }
    }
    if (!excluded) out.push_back(cand);
  }
  return out;
}

namespace detail {

inline double clamp30(double x) { return x < -30.0 ? -30.0 : (x > 30.0 ? 30.0 : x); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// log(1 + exp(x)), overflow-safe.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace detail

/// Sigmoid cross-entropy with negative sampling:
///   L = -log sigma(v_c.w_ctx + b_ctx) - sum_k log(1 - sigma(v_c.w_k + b_k))
/// Logit arguments are clamped to [-30, 30] before the log.
inline double sgns_loss(int center, int context, std::span<const int> negatives,
                        const EmbeddingModel& model) {
  auto vc = model.in_row(center);
  auto logit = [&](int x) {
    double s = model.bias[static_cast<size_t>(x)];
    auto w = model.w_row(x);
    for (int k = 0; k < model.dim; ++k) s += vc[static_cast<size_t>(k)] * w[static_cast<size_t>(k)];
    return detail::clamp30(s);
  };
  double loss = detail::softplus(-logit(context));  // -log sigma(s)
  for (int neg : negatives) loss += detail::softplus(logit(neg));  // -log(1 - sigma(s))
  return loss;
}

/// Loss plus exact gradients at the current parameters. For each touched
/// context/negative occurrence, grad(weight row) = g * v_center and
/// grad(bias) = g, so only the scalar g is materialized.
struct SgnsStep {
  double loss = 0.0;
  std::vector<double> grad_center;           // d
  std::vector<std::pair<int, double>> g;     // (item, dL/dlogit), context first
};

inline SgnsStep sgns_forward_backward(int center, int context, std::span<const int> negatives,
                                      const EmbeddingModel& model) {
  SgnsStep step;
  step.grad_center.assign(static_cast<size_t>(model.dim), 0.0);
  step.g.reserve(negatives.size() + 1);
  auto vc = model.in_row(center);
  auto touch = [&](int x, bool positive) {
    double s = model.bias[static_cast<size_t>(x)];
    auto w = model.w_row(x);
    for (int k = 0; k < model.dim; ++k) s += vc[static_cast<size_t>(k)] * w[static_cast<size_t>(k)];
    s = detail::clamp30(s);
    step.loss += positive ? detail::softplus(-s) : detail::softplus(s);
    double g = detail::sigmoid(s) - (positive ? 1.0 : 0.0);
    step.g.emplace_back(x, g);
    for (int k = 0; k < model.dim; ++k)
      step.grad_center[static_cast<size_t>(k)] += g * w[static_cast<size_t>(k)];
  };
  touch(context, true);
  for (int neg : negatives) touch(neg, false);
  return step;
}

/// One SGD update from precomputed gradients. Weight/bias rows are updated
/// against the pre-update center row, matching the exact batch gradient.
inline void sgns_apply(EmbeddingModel& model, int center, const SgnsStep& step, double lr) {
  auto vc = model.in_row(center);
  for (const auto& [x, g] : step.g) {
    auto w = model.w_row(x);
    double scale = lr * g;
    for (int k = 0; k < model.dim; ++k) w[static_cast<size_t>(k)] -= scale * vc[static_cast<size_t>(k)];
    model.bias[static_cast<size_t>(x)] -= scale;
  }
  for (int k = 0; k < model.dim; ++k)
    vc[static_cast<size_t>(k)] -= lr * step.grad_center[static_cast<size_t>(k)];
}

inline double train_step(EmbeddingModel& model, int center, int context,
                         std::span<const int> negatives, double lr) {
  SgnsStep step = sgns_forward_backward(center, context, negatives, model);
  sgns_apply(model, center, step, lr);
  return step.loss;
}

struct TrainStats {
  std::vector<double> epoch_mean_loss;
  std::uint64_t cases = 0;
  std::uint64_t skipped = 0;
};

namespace detail {

inline std::vector<std::vector<int>> session_item_sequences(const Corpus& corpus) {
  std::vector<std::vector<int>> out(corpus.sessions.size());
  for (size_t s = 0; s < corpus.sessions.size(); ++s) {
    out[s].reserve(corpus.sessions[s].events.size());
    for (const auto& ev : corpus.sessions[s].events) out[s].push_back(ev.item);
  }
  return out;
}

}  // namespace detail

/// Scans every session with the configured window, one SGD pass per epoch.
/// Single-worker runs are bit-deterministic given the seed; multi-worker
/// training performs unsynchronized sparse updates on the shared tables
/// (hogwild contract), so only quality invariants are guaranteed there.
inline EmbeddingModel train_item2vec(const Corpus& corpus, const TrainConfig& config,
                                     TrainStats* stats = nullptr) {
  config.validate();
  int vocab = corpus.items.size();
  Rng init_rng(config.seed);
  EmbeddingModel model = init_embedding_model(vocab, config.dim, init_rng);
  NegativeSampler sampler = config.unigram_negatives
                                ? NegativeSampler(vocab, corpus.click_counts)
                                : NegativeSampler(vocab);
  auto sequences = detail::session_item_sequences(corpus);
  if (stats) *stats = TrainStats{};

  auto run_range = [&](size_t lo, size_t hi, Rng& rng, double& loss_sum, std::uint64_t& count,
                       std::uint64_t& skipped) {
    std::vector<int> negatives;
    for (size_t s = lo; s < hi; ++s) {
      for (auto [center, context] : generate_pairs(sequences[s], config.window)) {
        int exclude[2] = {center, context};
        int distinct = center == context ? 1 : 2;
        if (vocab - distinct < 1) {
          ++skipped;
          continue;
        }
        negatives.clear();
        while (static_cast<int>(negatives.size()) < config.negatives) {
          int cand = sampler.draw(rng);
          if (cand != exclude[0] && cand != exclude[1]) negatives.push_back(cand);
        }
        loss_sum += train_step(model, center, context, negatives, config.learning_rate);
        ++count;
      }
    }
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::uint64_t count = 0, skipped = 0;
    if (config.workers == 1) {
      Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1));
      run_range(0, sequences.size(), rng, loss_sum, count, skipped);
    } else {
      size_t workers = static_cast<size_t>(config.workers);
      std::vector<double> sums(workers, 0.0);
      std::vector<std::uint64_t> counts(workers, 0), skips(workers, 0);
      std::vector<std::thread> threads;
      size_t chunk = (sequences.size() + workers - 1) / workers;
      for (size_t w = 0; w < workers; ++w) {
        size_t lo = std::min(sequences.size(), w * chunk);
        size_t hi = std::min(sequences.size(), (w + 1) * chunk);
        threads.emplace_back([&, w, lo, hi] {
          Rng rng(mix_seed(config.seed, (static_cast<std::uint64_t>(epoch) + 1) * 1000 + w));
          run_range(lo, hi, rng, sums[w], counts[w], skips[w]);
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

/// Cosine similarity of the two items' input-embedding rows.
inline double score(const EmbeddingModel& model, int i, int j) {
  if (i < 0 || i >= model.vocab() || j < 0 || j >= model.vocab())
    throw AbsentItemError("item index out of range");
  return cosine_similarity(model.in_row(i), model.in_row(j));
}

// ---------------------------------------------------------------------------
// Model file:
//   simrec-emb v1 <V> <d> <has_bias>
//   item_id<TAB>f1,...,fd            (input table)
//   #weights
//   item_id<TAB>f1,...,fd[<TAB>bias] (weight table)
//   [#posweights                     (personalized models only)
//    w1,...,wL]

struct EmbeddingFile {
  ItemIndex items;
  EmbeddingModel model;
  std::optional<std::vector<double>> pos_weights;
};

namespace detail {

inline void append_row(std::string& out, const std::string& id, std::span<const double> row) {
  out += id;
  out += '\t';
  for (size_t k = 0; k < row.size(); ++k) {
    if (k) out += ',';
    out += fmt9(row[k]);
  }
}

}  // namespace detail

inline std::string serialize_embedding(const EmbeddingModel& model, const ItemIndex& items,
                                       bool has_bias,
                                       const std::vector<double>* pos_weights = nullptr) {
  std::string out = "simrec-emb v1 " + std::to_string(model.vocab()) + " " +
                    std::to_string(model.dim) + " " + (has_bias ? "1" : "0") + "\n";
  for (int i = 0; i < model.vocab(); ++i) {
    detail::append_row(out, items.id_of(i), model.in_row(i));
    out += '\n';
  }
  out += "#weights\n";
  for (int i = 0; i < model.vocab(); ++i) {
    detail::append_row(out, items.id_of(i), model.w_row(i));
    if (has_bias) {
      out += '\t';
      out += fmt9(model.bias[static_cast<size_t>(i)]);
    }
    out += '\n';
  }
  if (pos_weights) {
    out += "#posweights\n";
    for (size_t k = 0; k < pos_weights->size(); ++k) {
      if (k) out += ',';
      out += fmt9((*pos_weights)[k]);
    }
    out += '\n';
  }
  return out;
}

inline void save_embedding_model(const EmbeddingModel& model, const ItemIndex& items,
                                 const std::string& path) {
  write_file(path, serialize_embedding(model, items, /*has_bias=*/true));
}

inline EmbeddingFile load_embedding_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty model file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto head = split(line, ' ');
  if (head.size() != 5 || head[0] != "simrec-emb")
    throw FormatError(path + ": not a simrec-emb model file");
  if (head[1] != "v1") throw FormatError(path + ": unsupported model version '" + std::string(head[1]) + "'");
  std::int64_t vocab = 0, dim = 0, has_bias = 0;
  if (!parse_i64(head[2], vocab) || !parse_i64(head[3], dim) || !parse_i64(head[4], has_bias) ||
      vocab < 0 || dim < 1 || (has_bias != 0 && has_bias != 1))
    throw FormatError(path + ": malformed model header");

  EmbeddingFile file;
  file.model.dim = static_cast<int>(dim);
  file.model.input.resize(static_cast<size_t>(vocab) * static_cast<size_t>(dim));
  file.model.weight.resize(static_cast<size_t>(vocab) * static_cast<size_t>(dim));
  file.model.bias.assign(static_cast<size_t>(vocab), 0.0);

  auto read_line = [&](const char* what) {
    if (!std::getline(in, line)) throw FormatError(path + std::string(": truncated before ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  auto parse_floats = [&](std::string_view csv, double* dst, size_t want, const char* what) {
    auto parts = split(csv, ',');
    if (parts.size() != want)
      throw FormatError(path + ": expected " + std::to_string(want) + " " + what + ", got " +
                        std::to_string(parts.size()));
    for (size_t k = 0; k < want; ++k)
      if (!parse_f64(parts[k], dst[k])) throw FormatError(path + ": bad float in " + what);
  };

  for (std::int64_t i = 0; i < vocab; ++i) {
    read_line("input table");
    auto f = split(line, '\t');
    if (f.size() != 2 || f[0].empty()) throw FormatError(path + ": malformed input row");
    if (file.items.add(std::string(f[0])) != static_cast<int>(i))
      throw FormatError(path + ": duplicate item " + std::string(f[0]));
    parse_floats(f[1], &file.model.input[static_cast<size_t>(i) * static_cast<size_t>(dim)],
                 static_cast<size_t>(dim), "input floats");
  }
  read_line("#weights sentinel");
  if (line != "#weights") throw FormatError(path + ": missing #weights sentinel");
  for (std::int64_t i = 0; i < vocab; ++i) {
    read_line("weight table");
    auto f = split(line, '\t');
    size_t want_fields = has_bias ? 3u : 2u;
    if (f.size() != want_fields) throw FormatError(path + ": malformed weight row");
    if (std::string(f[0]) != file.items.id_of(static_cast<int>(i)))
      throw FormatError(path + ": weight table order differs from input table");
    parse_floats(f[1], &file.model.weight[static_cast<size_t>(i) * static_cast<size_t>(dim)],
                 static_cast<size_t>(dim), "weight floats");
    if (has_bias && !parse_f64(f[2], file.model.bias[static_cast<size_t>(i)]))
      throw FormatError(path + ": bad bias value");
  }
  if (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "#posweights") {
      read_line("position weights");
      std::vector<double> w;
      for (auto part : split(line, ',')) {
        double x = 0;
        if (!parse_f64(part, x)) throw FormatError(path + ": bad position weight");
        w.push_back(x);
      }
      file.pos_weights = std::move(w);
    } else if (!line.empty()) {
      throw FormatError(path + ": trailing content after weight table");
    }
  }
  return file;
}

/// Loads a plain item2vec model; rejects files carrying position weights.
inline EmbeddingFile load_embedding_model(const std::string& path) {
  EmbeddingFile file = load_embedding_file(path);
  if (file.pos_weights)
    throw FormatError(path + ": model carries position weights; expected a plain embedding model");
  return file;
}

}  // namespace simrec
