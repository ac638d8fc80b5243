#pragma once

// Ranking metrics over cosine similarity. Ranking is by descending cosine,
// ties broken by ascending item id.

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "goal/data.hpp"

namespace goal {

/// Query id → ids of the items that count as correct answers.
using RelevanceJudgments = std::map<std::string, std::set<std::string>>;

/// Item ids with l2-normalized embedding rows.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  /// Normalizes every row of `embeddings`.
  explicit RetrievalIndex(const EmbeddingSet& embeddings);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(rows_).subspan(i * dim_, dim_);
  }

  /// Item positions ordered by descending cosine to `query`, ties by id.
  std::vector<std::size_t> rank(std::span<const double> query) const;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<double> rows_;
};

/// Fraction of queries with at least one relevant item in the top k.
double recall_at_k(const RetrievalIndex& index, const EmbeddingSet& queries,
                   const RelevanceJudgments& judgments, std::size_t k);

/// Mean over queries of AP@k = (1/min(R, k)) Σ_{i≤k} P@i · rel(i).
double map_at_k(const RetrievalIndex& index, const EmbeddingSet& queries,
                const RelevanceJudgments& judgments, std::size_t k);

/// Checks that every query has a non-empty judgment whose ids exist in the index.
void validate_judgments(const RetrievalIndex& index, const EmbeddingSet& queries,
                        const RelevanceJudgments& judgments);

}  // namespace goal
