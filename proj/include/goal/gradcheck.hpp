#pragma once

// Central finite-difference checks against tape gradients. Only forward
// evaluations feed the numeric side, so it stays independent of every
// backward rule it checks.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "goal/autodiff.hpp"

namespace goal {

/// Builds a scalar loss on `tape` from leaves holding the current inputs.
using LossBuilder = std::function<Var(Tape& tape, std::span<const Var> leaves)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradcheckOptions {
  double step = 1e-5;
  /// Denominator floor: rel = |a − n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

/// Relative error as used by every gradient check in this project.
double relative_error(double analytic, double numeric, double floor = 1e-6);

GradcheckResult gradcheck(const LossBuilder& build, std::vector<Tensor> inputs,
                          const GradcheckOptions& options = {});

/// Analytic gradients only (one backward pass).
std::vector<Tensor> tape_gradients(const LossBuilder& build, const std::vector<Tensor>& inputs);

}  // namespace goal
