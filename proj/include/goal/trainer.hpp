#pragma once

// Mini-batch fine-tuning over (global pair, optional local pair) samples
// with Adam, plus the four-way ablation suite.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "goal/data.hpp"
#include "goal/encoders.hpp"
#include "goal/lism.hpp"
#include "goal/losses.hpp"

namespace goal {

enum class Ablation { global_only, local_only, no_tsl, goal };

const std::vector<Ablation>& all_ablations();
std::string ablation_name(Ablation a);
/// Throws ValidationError for an unknown name.
Ablation parse_ablation(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 1e-4;
  LossWeights weights;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::goal;

  void validate() const;
  /// Weights with the terms switched off by the ablation forced to zero.
  LossWeights effective_weights() const;
};

/// A training sample with everything the loss needs precomputed.
struct PreparedSample {
  std::string id;
  Image image;
  TokenizedText caption;  // unpadded
  struct Local {
    Image crop;
    TokenizedText sentence;  // unpadded
    std::vector<std::size_t> patch_indices;
    std::vector<std::size_t> token_indices;
  };
  std::optional<Local> local;
};

/// Validates pairs against the dataset, then tokenizes and crops.
std::vector<PreparedSample> prepare_samples(const Model& model, const Dataset& dataset,
                                            const std::vector<LocalPair>& pairs);

/// Encodes a batch on `p`'s tape. Encoders not needed by `weights` are
/// skipped; their CLS matrices are then zero constants.
BatchViews build_batch_views(const BoundParams& p, const EncoderConfig& config,
                             std::span<const PreparedSample* const> batch,
                             const LossWeights& weights);

struct StepEvaluation {
  LossBreakdown breakdown;
  std::vector<Tensor> gradients;  // manifest order
};

/// Loss and parameter gradients of one batch.
StepEvaluation evaluate_batch(const Model& model, std::span<const PreparedSample* const> batch,
                              const LossWeights& weights);

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(const ParamStore& params);
  void step(ParamStore& params, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const { return step_; }

 private:
  std::vector<std::vector<double>> m_, v_;
  std::size_t step_ = 0;
};

struct TrainLogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossBreakdown loss;
  double logit_scale = 0.0;
};

std::string train_log_csv(const std::vector<TrainLogRow>& rows);

struct TrainResult {
  Model model;
  std::vector<TrainLogRow> log;
};

/// Fine-tunes `init` if given, else a fresh model of `encoder` shape with a
/// vocabulary built from the training captions and init seed config.seed.
TrainResult train(const Dataset& dataset, const std::vector<LocalPair>& pairs,
                  const TrainConfig& config, const std::optional<Model>& init,
                  const EncoderConfig& encoder = {});

/// Checkpoint plus train_log.csv in `dir`.
void save_training_run(const std::filesystem::path& dir, const TrainResult& result);

struct AblationRow {
  Ablation ablation;
  std::vector<std::pair<std::string, double>> metrics;
};

/// Trains all four ablations from the same init and seed into
/// out/<ablation>/ and evaluates each on `test` (original mode, plus joint
/// mode when `test_pairs` is given). Writes out/comparison.csv.
std::vector<AblationRow> run_ablation_suite(const Dataset& dataset,
                                            const std::vector<LocalPair>& pairs,
                                            const TrainConfig& base, const std::optional<Model>& init,
                                            const Dataset& test,
                                            const std::optional<std::vector<LocalPair>>& test_pairs,
                                            const std::filesystem::path& out,
                                            const EncoderConfig& encoder = {});

std::string comparison_csv(const std::vector<AblationRow>& rows);

}  // namespace goal
