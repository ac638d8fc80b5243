#include "goal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <unordered_map>

#include "goal/checkpoint.hpp"
#include "goal/error.hpp"
#include "goal/eval.hpp"
#include "goal/io_util.hpp"

namespace goal {

const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> all = {Ablation::global_only, Ablation::local_only,
                                            Ablation::no_tsl, Ablation::goal};
  return all;
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::global_only: return "global_only";
    case Ablation::local_only: return "local_only";
    case Ablation::no_tsl: return "no_tsl";
    case Ablation::goal: return "goal";
  }
  throw ContractError("bad ablation value");
}

Ablation parse_ablation(std::string_view name) {
  for (Ablation a : all_ablations())
    if (ablation_name(a) == name) return a;
  throw ValidationError("unknown ablation '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (!std::isfinite(learning_rate) || learning_rate < 0.0)
    throw ValidationError("learning rate must be finite and ≥ 0");
  weights.validate();
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = weights;
  switch (ablation) {
    case Ablation::global_only: w.lambda_local = w.lambda_tsl = 0.0; break;
    case Ablation::local_only: w.lambda_global = w.lambda_tsl = 0.0; break;
    case Ablation::no_tsl: w.lambda_tsl = 0.0; break;
    case Ablation::goal: break;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Batches

std::vector<PreparedSample> prepare_samples(const Model& model, const Dataset& dataset,
                                            const std::vector<LocalPair>& pairs) {
  if (dataset.records.empty()) throw ValidationError("training needs a non-empty dataset");
  validate_pairs(dataset, pairs);
  std::unordered_map<std::string, const LocalPair*> pair_of;
  for (const auto& p : pairs) pair_of.emplace(p.sample_id, &p);

  const EncoderConfig& c = model.config;
  std::vector<PreparedSample> out;
  out.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    if (r.image_side != c.image_side)
      throw ValidationError("sample " + r.id + " has side " + std::to_string(r.image_side) +
                            ", encoder expects " + std::to_string(c.image_side));
    PreparedSample s;
    s.id = r.id;
    s.image = dataset.load_image(r);
    s.caption = tokenize(r.caption, model.vocab, c.extended_context, false);
    if (auto it = pair_of.find(r.id); it != pair_of.end()) {
      const LocalPair& p = *it->second;
      PreparedSample::Local local;
      local.crop = crop_and_resize(s.image, p.bbox, c.image_side);
      const CharSpan span = p.sentence_char_span;
      local.sentence = tokenize(std::string_view(r.caption).substr(span.begin, span.end - span.begin),
                                model.vocab, c.extended_context, false);
      local.patch_indices = select_patch_indices(p.bbox, c);
      local.token_indices = select_token_indices(span, s.caption.spans, s.caption.ids);
      s.local = std::move(local);
    }
    out.push_back(std::move(s));
  }
  return out;
}

BatchViews build_batch_views(const BoundParams& p, const EncoderConfig& config,
                             std::span<const PreparedSample* const> batch,
                             const LossWeights& weights) {
  Tape& tape = p.tape();
  const bool need_global = weights.lambda_global > 0.0 || weights.lambda_tsl > 0.0;
  const bool need_local = weights.lambda_local > 0.0 || weights.lambda_tsl > 0.0;

  BatchViews views;
  std::vector<Var> v_g, t_g, v_l, t_l;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const PreparedSample& s = *batch[i];
    if (need_global) {
      const EncodedVars img = encode_image(p, config, s.image);
      const EncodedVars txt = encode_text(p, config, s.caption.ids);
      v_g.push_back(img.cls);
      t_g.push_back(txt.cls);
      views.patch_tokens.push_back(img.tokens);
      views.sequence_tokens.push_back(txt.tokens);
    }
    if (need_local && s.local) {
      v_l.push_back(encode_image(p, config, s.local->crop).cls);
      t_l.push_back(encode_text(p, config, s.local->sentence.ids).cls);
      views.locals.push_back({i, s.local->patch_indices, s.local->token_indices});
    }
  }
  if (need_global) {
    views.v_g_cls = stack_rows(v_g);
    views.t_g_cls = stack_rows(t_g);
  } else {
    views.v_g_cls = views.t_g_cls = tape.constant(Tensor({batch.size(), config.d_model}));
  }
  if (!v_l.empty()) {
    views.v_l_cls = stack_rows(v_l);
    views.t_l_cls = stack_rows(t_l);
  }
  return views;
}

StepEvaluation evaluate_batch(const Model& model, std::span<const PreparedSample* const> batch,
                              const LossWeights& weights) {
  if (batch.empty()) throw ContractError("empty batch");
  Tape tape;
  const BoundParams p(tape, model.params, true);
  const BatchViews views = build_batch_views(p, model.config, batch, weights);
  const Projections proj{p["proj.image.w"], p["proj.image.b"], p["proj.text.w"], p["proj.text.b"]};
  const LossResult loss = total_loss(views, weights, p["logit_scale"], proj);
  tape.backward(loss.total);
  return {loss.breakdown, p.gradients()};
}

// ---------------------------------------------------------------------------
// Optimizer

Adam::Adam(const ParamStore& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.at(i).size(), 0.0);
    v_.emplace_back(params.at(i).size(), 0.0);
  }
}

void Adam::step(ParamStore& params, const std::vector<Tensor>& grads, double lr) {
  if (grads.size() != params.size()) throw ContractError("gradient count differs from params");
  ++step_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params.at(i).data();
    auto g = grads[i].data();
    if (g.size() != w.size()) throw DimensionError("gradient shape differs from " + params.name(i));
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + kEps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

// Separate stream from the init RNG, which is seeded with the same value.
constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ull;

}  // namespace

std::string train_log_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = "step,epoch,L_global,L_local,L_TSL,L_total,logit_scale\n";
  for (const auto& r : rows)
    out += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + csv_number(r.loss.global) +
           "," + csv_number(r.loss.local) + "," + csv_number(r.loss.tsl) + "," +
           csv_number(r.loss.total) + "," + csv_number(r.logit_scale) + "\n";
  return out;
}

TrainResult train(const Dataset& dataset, const std::vector<LocalPair>& pairs,
                  const TrainConfig& config, const std::optional<Model>& init,
                  const EncoderConfig& encoder) {
  config.validate();
  if (dataset.records.empty()) throw ValidationError("training needs a non-empty dataset");
  validate_pairs(dataset, pairs);

  TrainResult result;
  if (init) {
    result.model = *init;
  } else {
    std::vector<std::string> captions;
    for (const auto& r : dataset.records) captions.push_back(r.caption);
    result.model = init_model(encoder, Vocabulary::from_corpus(captions), config.seed);
  }
  Model& model = result.model;
  const std::vector<PreparedSample> samples = prepare_samples(model, dataset, pairs);
  const LossWeights weights = config.effective_weights();

  Adam adam(model.params);
  std::mt19937_64 rng(config.seed ^ kShuffleSalt);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<const PreparedSample*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&samples[order[i]]);
      const double scale_before = model.params.get("logit_scale").item();
      StepEvaluation eval = evaluate_batch(model, batch, weights);
      adam.step(model.params, eval.gradients, config.learning_rate);
      result.log.push_back({++step, epoch, eval.breakdown, scale_before});
    }
  }
  return result;
}

void save_training_run(const std::filesystem::path& dir, const TrainResult& result) {
  save_checkpoint(dir, result.model);
  write_file(dir / "train_log.csv", train_log_csv(result.log));
}

// ---------------------------------------------------------------------------
// Ablations

std::vector<AblationRow> run_ablation_suite(const Dataset& dataset,
                                            const std::vector<LocalPair>& pairs,
                                            const TrainConfig& base, const std::optional<Model>& init,
                                            const Dataset& test,
                                            const std::optional<std::vector<LocalPair>>& test_pairs,
                                            const std::filesystem::path& out,
                                            const EncoderConfig& encoder) {
  base.validate();
  validate_pairs(dataset, pairs);
  if (test_pairs) validate_pairs(test, *test_pairs);

  std::vector<AblationRow> rows;
  for (Ablation a : all_ablations()) {
    TrainConfig cfg = base;
    cfg.ablation = a;
    const TrainResult run = train(dataset, pairs, cfg, init, encoder);
    save_training_run(out / ablation_name(a), run);
    AblationRow row{a, evaluate(run.model, test, EvalMode::original).metrics};
    if (test_pairs)
      for (auto& m : evaluate(run.model, test, EvalMode::joint, test_pairs).metrics)
        row.metrics.push_back(std::move(m));
    rows.push_back(std::move(row));
  }
  write_file(out / "comparison.csv", comparison_csv(rows));
  return rows;
}

std::string comparison_csv(const std::vector<AblationRow>& rows) {
  if (rows.empty()) return "method\n";
  std::string out = "method";
  for (const auto& [name, value] : rows.front().metrics) out += "," + name;
  out += "\n";
  for (const auto& r : rows) {
    out += ablation_name(r.ablation);
    for (const auto& [name, value] : r.metrics) out += "," + format_metric(value);
    out += "\n";
  }
  return out;
}

}  // namespace goal
