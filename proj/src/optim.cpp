#include "rulesp/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "rulesp/errors.hpp"

namespace rulesp {

ParameterSet apply_gradient(const ParameterSet& params, const ParameterSet& grad, double lr, double clip_norm) {
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be a finite value >= 0");
  if (!grad.all_finite()) throw NonFiniteGradient("gradient has non-finite entries");
  ParameterSet out = params;
  double scale = lr;
  if (clip_norm > 0) {
    double norm = std::sqrt(grad.squared_norm());
    if (norm > clip_norm) scale *= clip_norm / norm;
  }
  if (scale != 0) out.axpy(-scale, grad);
  return out;
}

ParameterSet sgd_step(const ParameterSet& params, std::span<const Example> batch, double lr, const LossFn& loss,
                      double clip_norm) {
  LossGrad lg = loss(params, batch);
  return apply_gradient(params, lg.grad, lr, clip_norm);
}

}  // namespace rulesp

namespace rulesp {

Adam::Adam(double lr, double clip_norm, double beta1, double beta2, double eps)
    : lr_(lr), clip_norm_(clip_norm), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0)) throw std::invalid_argument("Adam learning rate must be >= 0");
}

ParameterSet Adam::step(const ParameterSet& params, const ParameterSet& grad) {
  if (!grad.all_finite()) throw NonFiniteGradient("gradient has non-finite entries");
  if (m_.num_blocks() == 0) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
  }
  double scale = 1.0;
  if (clip_norm_ > 0) {
    double norm = std::sqrt(grad.squared_norm());
    if (norm > clip_norm_) scale = clip_norm_ / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  ParameterSet out = params;
  for (std::size_t b = 0; b < params.num_blocks(); ++b) {
    auto g = scale * grad[b].array();
    m_[b].array() = beta1_ * m_[b].array() + (1 - beta1_) * g;
    v_[b].array() = beta2_ * v_[b].array() + (1 - beta2_) * g.square();
    out[b].array() -= lr_ * (m_[b].array() / c1) / ((v_[b].array() / c2).sqrt() + eps_);
  }
  return out;
}

}  // namespace rulesp
