#pragma once

#include <functional>
#include <span>

#include "rulesp/dataset.hpp"
#include "rulesp/params.hpp"

namespace rulesp {

/// Loss and gradient of a batch at the given parameters.
using LossFn = std::function<LossGrad(const ParameterSet&, std::span<const Example>)>;

/// params - lr * grad, with the gradient rescaled to norm `clip_norm` when it
/// is larger (0 disables clipping). Throws NonFiniteGradient.
ParameterSet apply_gradient(const ParameterSet& params, const ParameterSet& grad, double lr, double clip_norm = 0);

/// One plain gradient step on `batch`; never modifies `params`.
ParameterSet sgd_step(const ParameterSet& params, std::span<const Example> batch, double lr, const LossFn& loss,
                      double clip_norm = 0);

}  // namespace rulesp

namespace rulesp {

/// Adam with optional global-norm gradient clipping. Holds its moment
/// estimates; step() returns updated parameters and leaves the input alone.
class Adam {
 public:
  explicit Adam(double lr, double clip_norm = 0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  ParameterSet step(const ParameterSet& params, const ParameterSet& grad);
  double lr() const { return lr_; }

 private:
  double lr_, clip_norm_, beta1_, beta2_, eps_;
  long t_ = 0;
  ParameterSet m_, v_;
};

}  // namespace rulesp
