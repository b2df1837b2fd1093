#pragma once

#include <gtest/gtest.h>

#include <random>

#include "cite/encoders.hpp"
#include "cite/error.hpp"
#include "cite/matrix.hpp"
#include "oracles/oracles.hpp"

namespace testing_support {

inline cite::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  cite::Matrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

inline cite::Matrix random_unit_rows(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  return cite::l2_normalize_rows(random_matrix(r, c, rng));
}

inline oracle::Mat to_oracle(const cite::Matrix& m) {
  oracle::Mat out(m.rows(), oracle::Vec(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline std::vector<oracle::Layer> to_oracle(const cite::EncoderParams& p) {
  std::vector<oracle::Layer> out;
  for (const auto& l : p.layers) out.push_back({to_oracle(l.weight), to_oracle(l.bias)[0]});
  return out;
}

}  // namespace testing_support

/// Asserts that `stmt` throws cite::Error carrying `code`.
#define EXPECT_CITE_ERROR(stmt, expected_code)                                                  \
  do {                                                                                          \
    try {                                                                                       \
      stmt;                                                                                     \
      ADD_FAILURE() << "expected " << cite::to_string(expected_code) << ", nothing was thrown"; \
    } catch (const cite::Error& e) {                                                            \
      EXPECT_EQ(e.code(), expected_code) << e.what();                                           \
    }                                                                                           \
  } while (0)
