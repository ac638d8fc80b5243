#include "goal/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "goal/autodiff.hpp"
#include "goal/error.hpp"
#include "goal/parallel.hpp"

namespace goal {

RetrievalIndex::RetrievalIndex(const EmbeddingSet& e) : ids_(e.ids), dim_(e.dim) {
  if (e.ids.size() * e.dim != e.values.size())
    throw DimensionError("embedding set has " + std::to_string(e.ids.size()) + " ids for " +
                         std::to_string(e.values.size()) + " values of dim " +
                         std::to_string(e.dim));
  rows_ = e.values;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    double* r = rows_.data() + i * dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += r[j] * r[j];
    const double n = std::sqrt(s);
    if (n < kNormFloor) continue;
    for (std::size_t j = 0; j < dim_; ++j) r[j] /= n;
  }
}

std::vector<std::size_t> RetrievalIndex::rank(std::span<const double> query) const {
  if (query.size() != dim_)
    throw DimensionError("query of dim " + std::to_string(query.size()) + " against index of dim " +
                         std::to_string(dim_));
  double qn = 0.0;
  for (double v : query) qn += v * v;
  qn = std::sqrt(qn);
  const double inv = qn < kNormFloor ? 1.0 : 1.0 / qn;
  std::vector<double> scores(size());
  for (std::size_t i = 0; i < size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += rows_[i * dim_ + j] * query[j];
    scores[i] = s * inv;
  }
  std::vector<std::size_t> order(size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids_[a] < ids_[b];
  });
  return order;
}

void validate_judgments(const RetrievalIndex& index, const EmbeddingSet& queries,
                        const RelevanceJudgments& judgments) {
  std::unordered_set<std::string> known(index.ids().begin(), index.ids().end());
  for (const auto& q : queries.ids) {
    auto it = judgments.find(q);
    if (it == judgments.end() || it->second.empty())
      throw ValidationError("query " + q + " has no relevance judgments");
    for (const auto& item : it->second)
      if (!known.count(item))
        throw ValidationError("judgment for " + q + " names unknown item " + item);
  }
}

namespace {

template <class PerQuery>
double mean_over_queries(const RetrievalIndex& index, const EmbeddingSet& queries,
                         const RelevanceJudgments& judgments, std::size_t k, PerQuery per_query) {
  if (k < 1) throw ValidationError("k must be at least 1");
  validate_judgments(index, queries, judgments);
  const std::size_t n = queries.ids.size();
  if (n == 0) return 0.0;
  std::vector<double> scores(n);
  parallel_for(n, [&](std::size_t q) {
    const auto order = index.rank(queries.row(q));
    scores[q] = per_query(order, judgments.at(queries.ids[q]));
  });
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(n);
}

}  // namespace

double recall_at_k(const RetrievalIndex& index, const EmbeddingSet& queries,
                   const RelevanceJudgments& judgments, std::size_t k) {
  return mean_over_queries(index, queries, judgments, k,
                           [&](const std::vector<std::size_t>& order, const std::set<std::string>& rel) {
                             const std::size_t top = std::min(k, order.size());
                             for (std::size_t i = 0; i < top; ++i)
                               if (rel.count(index.ids()[order[i]])) return 1.0;
                             return 0.0;
                           });
}

double map_at_k(const RetrievalIndex& index, const EmbeddingSet& queries,
                const RelevanceJudgments& judgments, std::size_t k) {
  return mean_over_queries(index, queries, judgments, k,
                           [&](const std::vector<std::size_t>& order, const std::set<std::string>& rel) {
                             const std::size_t top = std::min(k, order.size());
                             double hits = 0.0, ap = 0.0;
                             for (std::size_t i = 0; i < top; ++i) {
                               if (!rel.count(index.ids()[order[i]])) continue;
                               hits += 1.0;
                               ap += hits / static_cast<double>(i + 1);
                             }
                             return ap / static_cast<double>(std::min(rel.size(), k));
                           });
}

}  // namespace goal
