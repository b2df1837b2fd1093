#include "cite/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cite/error.hpp"

namespace cite {

double grad_check(const DifferentiableFn& f, const Matrix& params, double step) {
  if (!(step >= 1e-7 && step <= 1e-3)) fail(ErrorCode::kInvalidArgument, "grad_check step must lie in [1e-7, 1e-3]");

  Matrix analytic(params.rows(), params.cols());
  const double f0 = f(params, &analytic);
  if (!std::isfinite(f0)) fail(ErrorCode::kNonFiniteLoss, "f is not finite at params");
  if (!analytic.same_shape(params)) fail(ErrorCode::kShapeMismatch, "analytic gradient shape");

  double worst = 0.0;
  Matrix probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params.values()[i];
    probe.values()[i] = orig + step;
    const double fp = f(probe, nullptr);
    probe.values()[i] = orig - step;
    const double fm = f(probe, nullptr);
    probe.values()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(ErrorCode::kNonFiniteLoss, "f is not finite at perturbation of entry " + std::to_string(i));
    const double central = (fp - fm) / (2.0 * step);
    const double rel = std::abs(analytic.values()[i] - central) / std::max(1.0, std::abs(central));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace cite
