#pragma once

#include <cstddef>
#include <vector>

#include "cite/matrix.hpp"

namespace cite {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// base * 0.5 * (1 + cos(pi * step / total_steps)); zero at step == total.
double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps);

struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// One decoupled-weight-decay Adam update at 1-based `step` with learning
/// rate `lr`:  p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps).
void adamw_step(Matrix& param, const Matrix& grad, AdamMoments& state, std::size_t step, double lr,
                const AdamWConfig& cfg);

/// AdamW over a fixed, ordered set of parameter slots with a cosine-annealed
/// learning rate.
class AdamW {
 public:
  AdamW(AdamWConfig cfg, double base_lr, std::size_t total_steps)
      : cfg_(cfg), base_lr_(base_lr), total_steps_(total_steps) {}

  double lr_at(std::size_t step) const { return cosine_lr(base_lr_, step, total_steps_); }

  /// Updates `param` in slot `slot`. Slots are created on first use.
  void update(std::size_t slot, Matrix& param, const Matrix& grad, std::size_t step);

 private:
  AdamWConfig cfg_;
  double base_lr_;
  std::size_t total_steps_;
  std::vector<AdamMoments> slots_;
};

}  // namespace cite
