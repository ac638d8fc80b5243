#pragma once

// Training objective: symmetric contrastive losses on CLS embeddings plus the
// token-similarity term that pulls pooled, projected global tokens toward the
// CLS embeddings of the matching local crop and sentence.

#include <optional>
#include <vector>

#include "goal/autodiff.hpp"
#include "goal/encoders.hpp"

namespace goal {

struct LossWeights {
  double lambda_global = 1.0;
  double lambda_local = 0.5;
  double lambda_tsl = 1.0;

  /// Throws ValidationError on a negative or non-finite weight.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// Patches whose center pixel lies inside the box (inclusive edges). When
/// none does, the single patch whose center is nearest the box center.
std::vector<std::size_t> select_patch_indices(const BBox& box, const EncoderConfig& config);

/// Non-special tokens whose char span overlaps `sentence`. When none does,
/// the nearest non-special token by char distance (lower index on ties),
/// or the <end> token if the text has no words at all.
std::vector<std::size_t> select_token_indices(const CharSpan& sentence,
                                              const std::vector<CharSpan>& token_spans,
                                              const std::vector<int>& token_ids);

/// proj(mean of the selected token rows) for a K×d token matrix; [d] result.
Var pool_and_project(Var tokens, std::span<const std::size_t> indices, Var proj_w, Var proj_b);

/// ½(row-wise + column-wise cross-entropy) of exp(logit_scale)·cos(a, b),
/// targets on the diagonal, scale clamped at 100.
Var contrastive_loss(Var a, Var b, Var logit_scale);

/// MSE(cos(pooled_image, local_image_cls), I) + MSE(cos(pooled_text, local_text_cls), I),
/// each averaged over all n_l² entries.
Var tsl_loss(Var pooled_image, Var local_image_cls, Var pooled_text, Var local_text_cls);

/// One sample's local view within a batch.
struct LocalView {
  std::size_t batch_row = 0;
  std::vector<std::size_t> patch_indices;
  std::vector<std::size_t> token_indices;
};

/// Encoder outputs of a batch, all on one tape.
struct BatchViews {
  Var v_g_cls;                      // n×d
  Var t_g_cls;                      // n×d
  std::vector<Var> patch_tokens;    // per sample, N×d
  std::vector<Var> sequence_tokens; // per sample, M_i×d
  std::optional<Var> v_l_cls;       // n_l×d, rows follow `locals`
  std::optional<Var> t_l_cls;
  std::vector<LocalView> locals;
};

struct Projections {
  Var image_w, image_b, text_w, text_b;
};

/// Unweighted terms; a term whose weight is zero is not computed.
struct LossBreakdown {
  std::optional<double> global;
  std::optional<double> local;
  std::optional<double> tsl;
  double total = 0.0;
};

struct LossResult {
  Var total;
  LossBreakdown breakdown;
};

/// λ_g·L_global + λ_l·L_local + λ_tsl·L_TSL. Local and TSL terms use the
/// sub-batch with local views and are 0 when it is empty.
LossResult total_loss(const BatchViews& batch, const LossWeights& weights, Var logit_scale,
                      const Projections& proj);

}  // namespace goal
