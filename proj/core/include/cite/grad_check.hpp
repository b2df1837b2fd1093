#pragma once

#include <functional>

#include "cite/matrix.hpp"

namespace cite {

/// Scalar-valued function of one parameter matrix. When `grad` is non-null
/// the function must also write its analytic gradient (same shape as the
/// input) there.
using DifferentiableFn = std::function<double(const Matrix& params, Matrix* grad)>;

/// Max over entries of |analytic - central| / max(1, |central|), where the
/// central difference uses (f(p + h) - f(p - h)) / 2h. Step must be in
/// [1e-7, 1e-3]; a non-finite evaluation throws NonFiniteLoss.
double grad_check(const DifferentiableFn& f, const Matrix& params, double step = 1e-5);

}  // namespace cite
