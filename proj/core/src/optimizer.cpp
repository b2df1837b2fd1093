#include "cite/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "cite/error.hpp"

namespace cite {

double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return base_lr;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void adamw_step(Matrix& param, const Matrix& grad, AdamMoments& state, std::size_t step, double lr,
                const AdamWConfig& cfg) {
  if (!param.same_shape(grad)) fail(ErrorCode::kShapeMismatch, "adamw_step: gradient shape differs from parameter");
  if (step == 0) fail(ErrorCode::kInvalidArgument, "adamw_step: step index is 1-based");
  if (state.m.empty()) {
    state.m = Matrix(param.rows(), param.cols());
    state.v = Matrix(param.rows(), param.cols());
  }
  if (!state.m.same_shape(param)) fail(ErrorCode::kShapeMismatch, "adamw_step: moment shape differs from parameter");

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  auto p = param.values();
  auto g = grad.values();
  auto m = state.m.values();
  auto v = state.v.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] *= 1.0 - lr * cfg.weight_decay;
    p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

void AdamW::update(std::size_t slot, Matrix& param, const Matrix& grad, std::size_t step) {
  if (slot >= slots_.size()) slots_.resize(slot + 1);
  adamw_step(param, grad, slots_[slot], step, lr_at(step), cfg_);
}

}  // namespace cite
