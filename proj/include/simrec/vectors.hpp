#pragma once

#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "simrec/textio.hpp"
#include "simrec/types.hpp"

namespace simrec {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return dot(a, b) / (norm(a) * norm(b));
}

/// Precomputed per-item image feature vectors, all of one dimension.
/// Vectors with zero norm are rejected at load.
class FeatureVectorStore {
 public:
  /// File format: item_id<TAB>f1,f2,...,fD
  static FeatureVectorStore load(const std::string& path) {
    FeatureVectorStore store;
    for_each_line(path, [&](std::string_view line, size_t no) {
      auto f = split(line, '\t');
      if (f.size() != 2 || f[0].empty())
        throw ParseError(ParseCode::FieldCount, no, "expected item_id<TAB>floats");
      std::vector<double> vec;
      for (auto part : split(f[1], ',')) {
        double x = 0;
        if (!parse_f64(part, x))
          throw ParseError(ParseCode::BadNumber, no, "bad float '" + std::string(part) + "'");
        vec.push_back(x);
      }
      store.add(std::string(f[0]), vec, no);
    });
    return store;
  }

  void add(const std::string& item_id, std::span<const double> vec, size_t line_no = 0) {
    if (dim_ == 0) dim_ = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != dim_)
      throw ParseError(ParseCode::DimensionMismatch, line_no,
                       "expected " + std::to_string(dim_) + " floats, got " +
                           std::to_string(vec.size()));
    if (row_of_.count(item_id))
      throw ParseError(ParseCode::DuplicateItem, line_no, "duplicate item " + item_id);
    double n = norm(vec);
    if (n == 0.0 || !std::isfinite(n))
      throw ParseError(ParseCode::ZeroNorm, line_no, "zero-norm vector for " + item_id);
    row_of_.emplace(item_id, static_cast<int>(ids_.size()));
    ids_.push_back(item_id);
    data_.insert(data_.end(), vec.begin(), vec.end());
    norms_.push_back(n);
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(ids_.size()); }
  bool has(const std::string& item_id) const { return row_of_.count(item_id) != 0; }

  std::span<const double> row(const std::string& item_id) const {
    auto it = row_of_.find(item_id);
    if (it == row_of_.end()) return {};
    return std::span<const double>(data_).subspan(static_cast<size_t>(it->second) * dim_,
                                                  static_cast<size_t>(dim_));
  }

  double cosine(const std::string& i, const std::string& j) const {
    auto it_i = row_of_.find(i);
    auto it_j = row_of_.find(j);
    if (it_i == row_of_.end()) throw AbsentItemError("no vector for item " + i);
    if (it_j == row_of_.end()) throw AbsentItemError("no vector for item " + j);
    auto a = std::span<const double>(data_).subspan(static_cast<size_t>(it_i->second) * dim_,
                                                    static_cast<size_t>(dim_));
    auto b = std::span<const double>(data_).subspan(static_cast<size_t>(it_j->second) * dim_,
                                                    static_cast<size_t>(dim_));
    return dot(a, b) / (norms_[static_cast<size_t>(it_i->second)] *
                        norms_[static_cast<size_t>(it_j->second)]);
  }

  std::string serialize() const {
    std::string out;
    for (int r = 0; r < size(); ++r) {
      out += ids_[static_cast<size_t>(r)];
      out += '\t';
      for (int c = 0; c < dim_; ++c) {
        if (c) out += ',';
        out += fmt9(data_[static_cast<size_t>(r) * dim_ + static_cast<size_t>(c)]);
      }
      out += '\n';
    }
    return out;
  }

 private:
  int dim_ = 0;
  std::unordered_map<std::string, int> row_of_;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::vector<double> norms_;
};

/// Top-k pool candidates by image cosine, descending; ties broken by dense
/// index ascending. Candidates without a vector rank after all scored ones,
/// in pool order.
inline RankedList rank_by_image(const FeatureVectorStore& store, const ItemIndex& items,
                                int query, std::span<const int> pool, int k) {
  const std::string& qid = items.id_of(query);
  if (!store.has(qid)) throw AbsentItemError("no vector for query item " + qid);
  RankedList scored;
  std::vector<int> unscored;
  for (int cand : pool) {
    auto row = store.row(items.id_of(cand));
    if (row.empty()) {
      unscored.push_back(cand);
      continue;
    }
    scored.push_back({cand, store.cosine(qid, items.id_of(cand))});
  }
  sort_neighbors(scored);
  for (int cand : unscored) scored.push_back({cand, 0.0});
  if (static_cast<int>(scored.size()) > k) scored.resize(static_cast<size_t>(k));
  return scored;
}

}  // namespace simrec
