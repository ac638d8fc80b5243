#include "goal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace goal {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<Tensor> tape_gradients(const LossBuilder& build, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var loss = build(tape, leaves);
  tape.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Var v : leaves) grads.push_back(tape.grad(v));
  return grads;
}

namespace {

double evaluate(const LossBuilder& build, const std::vector<Tensor>& inputs) {
  Tape tape(false);
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, false));
  return build(tape, leaves).value().item();
}

}  // namespace

GradcheckResult gradcheck(const LossBuilder& build, std::vector<Tensor> inputs,
                          const GradcheckOptions& options) {
  const std::vector<Tensor> analytic = tape_gradients(build, inputs);
  GradcheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + options.step;
      const double up = evaluate(build, inputs);
      inputs[k][i] = saved - options.step;
      const double down = evaluate(build, inputs);
      inputs[k][i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[k][i], numeric, options.floor);
      ++result.entries_checked;
      if (err > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = std::max(err, result.max_rel_error);
        result.worst_input = k;
        result.worst_entry = i;
        result.worst_analytic = analytic[k][i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace goal
