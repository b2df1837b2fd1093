#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cite/losses.hpp"

namespace cite {

struct GradientSuiteOptions {
  std::size_t instances = 20;
  std::uint64_t seed = 1;
  double step = 1e-5;
  std::size_t max_batch = 8;
  std::size_t max_dim = 16;
  LossConfig loss;
  /// Test hook: scales every analytic gradient by (1 + 1e-2) so the
  /// comparison must fail.
  bool corrupt_analytic = false;
};

struct GradientCheckLine {
  std::string name;
  double max_rel_error = 0.0;
};

/// Central-difference checks of dva, scl, vld and total losses over random
/// seeded instances with batch <= max_batch and embedding dim <= max_dim.
std::vector<GradientCheckLine> run_gradient_suite(const GradientSuiteOptions& opts);

}  // namespace cite
