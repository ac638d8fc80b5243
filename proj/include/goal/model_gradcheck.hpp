#pragma once

// Finite-difference check of the full training objective on a tiny model:
// every parameter entry of the goal loss over a small synthetic batch.

#include <string>

#include "goal/gradcheck.hpp"
#include "goal/trainer.hpp"

namespace goal {

/// d_model 8, one layer, two heads, 32-pixel images in 8-pixel patches.
EncoderConfig tiny_encoder_config();

struct TinyProblem {
  Model model;
  std::vector<PreparedSample> samples;
  LossWeights weights;
};

/// `n` synthetic samples of which the first `n_local` carry a local pair
/// taken from their ground-truth links.
TinyProblem make_tiny_problem(std::uint64_t seed, std::size_t n = 3, std::size_t n_local = 2);

/// Total loss over all samples of `problem` as a function of the parameters.
LossBuilder total_loss_builder(const TinyProblem& problem);

struct ModelGradcheckReport {
  GradcheckResult result;
  std::string worst_parameter;
  double seconds = 0.0;
};

ModelGradcheckReport check_total_loss_gradients(const TinyProblem& problem,
                                                const GradcheckOptions& options = {});

}  // namespace goal
