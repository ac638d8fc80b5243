#include "goal/losses.hpp"

#include <cmath>
#include <limits>

#include "goal/error.hpp"

namespace goal {

void LossWeights::validate() const {
  for (double w : {lambda_global, lambda_local, lambda_tsl})
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("loss weights must be finite and ≥ 0");
}

std::vector<std::size_t> select_patch_indices(const BBox& box, const EncoderConfig& config) {
  const std::size_t g = config.grid();
  const double p = static_cast<double>(config.patch_size);
  auto center = [&](std::size_t i, double& cx, double& cy) {
    cx = (static_cast<double>(i % g) + 0.5) * p;
    cy = (static_cast<double>(i / g) + 0.5) * p;
  };
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < g * g; ++i) {
    double cx, cy;
    center(i, cx, cy);
    if (cx >= box.x1 && cx <= box.x2 && cy >= box.y1 && cy <= box.y2) inside.push_back(i);
  }
  if (!inside.empty()) return inside;

  const double bx = 0.5 * (box.x1 + box.x2), by = 0.5 * (box.y1 + box.y2);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g * g; ++i) {
    double cx, cy;
    center(i, cx, cy);
    const double d = (cx - bx) * (cx - bx) + (cy - by) * (cy - by);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {best};
}

std::vector<std::size_t> select_token_indices(const CharSpan& sentence,
                                              const std::vector<CharSpan>& token_spans,
                                              const std::vector<int>& token_ids) {
  if (token_spans.size() != token_ids.size())
    throw ContractError("token spans and ids differ in length");
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (is_special(token_ids[i])) continue;
    const CharSpan& s = token_spans[i];
    if (s.begin < sentence.end && sentence.begin < s.end) hits.push_back(i);
  }
  if (!hits.empty()) return hits;

  std::optional<std::size_t> best;
  std::size_t best_d = 0;
  for (std::size_t i = 0; i < token_ids.size(); ++i) {
    if (is_special(token_ids[i])) continue;
    const CharSpan& s = token_spans[i];
    std::size_t d = 0;
    if (s.end <= sentence.begin) d = sentence.begin - s.end;
    else if (s.begin >= sentence.end) d = s.begin - sentence.end;
    if (!best || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  if (best) return {*best};
  for (std::size_t i = 0; i < token_ids.size(); ++i)
    if (token_ids[i] == kEndId) return {i};
  throw ContractError("token sequence has neither words nor an <end> token");
}

Var pool_and_project(Var tokens, std::span<const std::size_t> indices, Var proj_w, Var proj_b) {
  const Var pooled = mean_rows(tokens, indices);
  return row(linear(stack_rows(std::span<const Var>(&pooled, 1)), proj_w, proj_b), 0);
}

Var contrastive_loss(Var a, Var b, Var logit_scale) {
  const Var sim = matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
  const Var logits = mul(sim, clamp_max(exp(logit_scale), 100.0));
  const Var rows = mean(diag(log_softmax_rows(logits)));
  const Var cols = mean(diag(log_softmax_rows(transpose(logits))));
  return scale(add(rows, cols), -0.5);
}

namespace {

Var identity_mse(Var x, Var y) {
  const Var sim = matmul(l2_normalize_rows(x), transpose(l2_normalize_rows(y)));
  const std::size_t n = sim.value().rows();
  Tensor eye({n, n});
  for (std::size_t i = 0; i < n; ++i) eye.at(i, i) = 1.0;
  const Var diff = sub(sim, x.tape()->constant(std::move(eye)));
  return mean(mul(diff, diff));
}

}  // namespace

Var tsl_loss(Var pooled_image, Var local_image_cls, Var pooled_text, Var local_text_cls) {
  return add(identity_mse(pooled_image, local_image_cls), identity_mse(pooled_text, local_text_cls));
}

LossResult total_loss(const BatchViews& batch, const LossWeights& weights, Var logit_scale,
                      const Projections& proj) {
  weights.validate();
  Tape& tape = *logit_scale.tape();
  const bool has_local = !batch.locals.empty();
  if (has_local && (!batch.v_l_cls || !batch.t_l_cls))
    throw ContractError("local views without local CLS embeddings");

  LossResult result;
  std::optional<Var> total;
  auto accumulate = [&](Var term, double weight) {
    const Var weighted = scale(term, weight);
    total = total ? add(*total, weighted) : weighted;
  };
  auto zero = [&] { return tape.constant(Tensor::scalar(0.0)); };

  if (weights.lambda_global > 0.0) {
    const Var g = contrastive_loss(batch.v_g_cls, batch.t_g_cls, logit_scale);
    result.breakdown.global = g.value().item();
    accumulate(g, weights.lambda_global);
  }
  if (weights.lambda_local > 0.0) {
    const Var l = has_local ? contrastive_loss(*batch.v_l_cls, *batch.t_l_cls, logit_scale) : zero();
    result.breakdown.local = l.value().item();
    accumulate(l, weights.lambda_local);
  }
  if (weights.lambda_tsl > 0.0) {
    Var t = zero();
    if (has_local) {
      std::vector<Var> pooled_image, pooled_text;
      for (const LocalView& lv : batch.locals) {
        pooled_image.push_back(pool_and_project(batch.patch_tokens.at(lv.batch_row),
                                                lv.patch_indices, proj.image_w, proj.image_b));
        pooled_text.push_back(pool_and_project(batch.sequence_tokens.at(lv.batch_row),
                                               lv.token_indices, proj.text_w, proj.text_b));
      }
      t = tsl_loss(stack_rows(pooled_image), *batch.v_l_cls, stack_rows(pooled_text),
                   *batch.t_l_cls);
    }
    result.breakdown.tsl = t.value().item();
    accumulate(t, weights.lambda_tsl);
  }
  result.total = total ? *total : zero();
  result.breakdown.total = result.total.value().item();
  return result;
}

}  // namespace goal
