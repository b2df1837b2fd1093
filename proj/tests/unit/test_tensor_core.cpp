#include <cmath>

#include "cite/grad_check.hpp"
#include "cite/grad_tape.hpp"
#include "support.hpp"

using namespace cite;
using testing_support::random_matrix;
using testing_support::random_unit_rows;
using testing_support::to_oracle;

TEST(Normalize, ThreeFourFive) {
  const Matrix out = l2_normalize_rows(Matrix{{3.0, 4.0}});
  EXPECT_NEAR(out(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.8, 1e-15);
}

TEST(Normalize, UnitRowIsFixedPoint) {
  std::mt19937_64 rng(3);
  const Matrix u = random_unit_rows(5, 7, rng);
  EXPECT_LT(max_abs_diff(l2_normalize_rows(u), u), 1e-15);
}

TEST(Normalize, ZeroRowRejected) {
  EXPECT_CITE_ERROR(l2_normalize_rows(Matrix{{1.0, 1.0}, {0.0, 1e-13}}), ErrorCode::kZeroRow);
}

TEST(Normalize, RowNormsAreOne) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix n = l2_normalize_rows(random_matrix(6, 9, rng, -50, 50));
    for (std::size_t r = 0; r < n.rows(); ++r) {
      double s = 0;
      for (double v : n.row(r)) s += v * v;
      EXPECT_NEAR(std::sqrt(s), 1.0, 1e-10);
    }
  }
}

TEST(Normalize, GradientOfTwoZeroZero) {
  const Matrix p{{2.0, 0.0, 0.0}};
  const Matrix weights{{0.3, -1.1, 0.7}};
  const DifferentiableFn f = [&](const Matrix& x, Matrix* g) {
    GradTape tape;
    const Var v = tape.parameter(x);
    const Var n = tape.l2_normalize_rows(v);
    const Var loss = tape.matmul_nt(n, tape.constant(weights));
    if (g) {
      tape.backward(loss);
      *g = tape.grad(v);
    }
    return tape.value(loss).item();
  };
  EXPECT_LT(grad_check(f, p), 1e-6);
  GradTape tape;
  const Matrix out = tape.value(tape.l2_normalize_rows(tape.constant(p)));
  EXPECT_EQ(out, (Matrix{{1.0, 0.0, 0.0}}));
}

TEST(Cosine, SelfAndOrthogonal) {
  const Matrix a{{1.0, 0.0}, {0.0, 1.0}};
  const Matrix s = cosine_sim(a, a);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 0.0);
}

TEST(Cosine, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(11);
  const Matrix a = random_unit_rows(4, 8, rng);
  const Matrix b = random_unit_rows(5, 8, rng);
  const Matrix s = cosine_sim(a, b);
  const oracle::Mat ref = oracle::cosine(to_oracle(a), to_oracle(b));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(s(i, j), ref[i][j], 1e-12);
      EXPECT_LE(std::abs(s(i, j)), 1.0 + 1e-9);
    }
}

TEST(Cosine, UnitDiagonal) {
  std::mt19937_64 rng(12);
  const Matrix a = random_unit_rows(10, 16, rng);
  const Matrix s = cosine_sim(a, a);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(s(i, i), 1.0, 1e-10);
}

TEST(Cosine, DimMismatch) { EXPECT_CITE_ERROR(cosine_sim(Matrix(2, 3), Matrix(2, 4)), ErrorCode::kDimMismatch); }

TEST(Softmax, EqualScoresUniform) {
  for (double tau : {0.01, 1.0, 100.0}) {
    const Matrix p = softmax_rows(Matrix(1, 4, 0.3), tau);
    for (double v : p.values()) EXPECT_NEAR(v, 0.25, 1e-15);
  }
}

TEST(Softmax, OneZeroAtUnitTemperature) {
  const Matrix p = softmax_rows(Matrix{{1.0, 0.0}}, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(p(0, 0), e / (e + 1), 1e-15);
  EXPECT_NEAR(p(0, 0), 0.7311, 1e-4);
  EXPECT_NEAR(p(0, 1), 0.2689, 1e-4);
}

TEST(Softmax, SharpensToOneHot) {
  const Matrix p = softmax_rows(Matrix{{0.5, 0.3, 0.1}}, 0.01);
  EXPECT_NEAR(p(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-6);
}

TEST(Softmax, RowsSumToOneAcrossTemperatures) {
  std::mt19937_64 rng(13);
  for (double tau : {1e-3, 1e-2, 0.1, 1.0, 10.0, 1e3}) {
    const Matrix p = softmax_rows(random_matrix(5, 7, rng, -30, 30), tau);
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0;
      for (double v : p.row(r)) s += v;
      EXPECT_NEAR(s, 1.0, 1e-10) << "tau " << tau;
    }
  }
}

TEST(Softmax, MatchesOracle) {
  std::mt19937_64 rng(14);
  const Matrix s = random_matrix(3, 6, rng);
  const Matrix p = softmax_rows(s, 0.3);
  for (std::size_t r = 0; r < 3; ++r) {
    const oracle::Vec ref = oracle::softmax(to_oracle(s)[r], 0.3);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(p(r, j), ref[j], 1e-14);
  }
}

TEST(Softmax, TemperatureMustBePositive) {
  EXPECT_CITE_ERROR(softmax_rows(Matrix(1, 2), 0.0), ErrorCode::kNonPositiveTemperature);
  EXPECT_CITE_ERROR(softmax_rows(Matrix(1, 2), -1.0), ErrorCode::kNonPositiveTemperature);
}

TEST(KL, IdenticalIsZero) {
  const Matrix p{{0.2, 0.3, 0.5}, {0.9, 0.1, 0.0}};
  EXPECT_EQ(kl_divergence_rows(p, p), 0.0);
}

TEST(KL, OneZeroAgainstUniform) {
  EXPECT_NEAR(kl_divergence_rows(Matrix{{1.0, 0.0}}, Matrix{{0.5, 0.5}}), std::log(2.0), 1e-12);
}

TEST(KL, MatchesDirectSummation) {
  std::mt19937_64 rng(15);
  const Matrix p = softmax_rows(random_matrix(3, 4, rng), 0.5);
  const Matrix q = softmax_rows(random_matrix(3, 4, rng), 0.5);
  EXPECT_NEAR(kl_divergence_rows(p, q), oracle::kl(to_oracle(p), to_oracle(q)), 1e-12);
}

TEST(KL, GibbsInequality) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix p = softmax_rows(random_matrix(2, 5, rng, -3, 3), 1.0);
    const Matrix q = softmax_rows(random_matrix(2, 5, rng, -3, 3), 1.0);
    EXPECT_GT(kl_divergence_rows(p, q), 0.0);
  }
}

TEST(KL, Errors) {
  EXPECT_CITE_ERROR(kl_divergence_rows(Matrix(1, 2, 0.5), Matrix(2, 2, 0.5)), ErrorCode::kShapeMismatch);
  EXPECT_CITE_ERROR(kl_divergence_rows(Matrix{{0.7, 0.7}}, Matrix{{0.5, 0.5}}), ErrorCode::kInvalidDistribution);
  EXPECT_CITE_ERROR(kl_divergence_rows(Matrix{{1.5, -0.5}}, Matrix{{0.5, 0.5}}), ErrorCode::kInvalidDistribution);
  EXPECT_CITE_ERROR(kl_divergence_rows(Matrix{{0.5, 0.5}}, Matrix{{1.0, 0.0}}), ErrorCode::kQZeroWherePPositive);
}

TEST(GradCheck, SumOfSquares) {
  std::mt19937_64 rng(17);
  const DifferentiableFn f = [](const Matrix& x, Matrix* g) {
    double s = 0;
    for (double v : x.values()) s += v * v;
    if (g) {
      *g = x;
      for (double& v : g->values()) v *= 2;
    }
    return s;
  };
  EXPECT_LT(grad_check(f, random_matrix(4, 5, rng)), 1e-8);
}

TEST(GradCheck, WrongGradientIsDetected) {
  const DifferentiableFn f = [](const Matrix& x, Matrix* g) {
    if (g) *g = Matrix(x.rows(), x.cols(), 0.0);
    return x(0, 0) * 3.0;
  };
  EXPECT_NEAR(grad_check(f, Matrix(1, 1, 1.0)), 1.0, 1e-8);
}

TEST(GradCheck, StepRangeAndNonFinite) {
  const DifferentiableFn ok = [](const Matrix& x, Matrix* g) {
    if (g) *g = Matrix(x.rows(), x.cols(), 1.0);
    return x(0, 0);
  };
  EXPECT_CITE_ERROR(grad_check(ok, Matrix(1, 1), 1e-2), ErrorCode::kInvalidArgument);
  EXPECT_CITE_ERROR(grad_check(ok, Matrix(1, 1), 1e-9), ErrorCode::kInvalidArgument);
  const DifferentiableFn bad = [](const Matrix& x, Matrix* g) {
    if (g) *g = Matrix(x.rows(), x.cols(), 1.0);
    return std::log(x(0, 0));
  };
  EXPECT_CITE_ERROR(grad_check(bad, Matrix(1, 1, 0.0)), ErrorCode::kNonFiniteLoss);
}

TEST(Tape, ReverseOrderAndAccumulation) {
  // y = sum(a*b^T) + sum(a*b^T) reuses one node twice; gradients must add.
  GradTape tape;
  const Var a = tape.parameter(Matrix{{1.0, 2.0}});
  const Var b = tape.parameter(Matrix{{3.0, -1.0}});
  const Var ab = tape.matmul_nt(a, b);
  const Var y = tape.add(ab, ab);
  tape.backward(y);
  EXPECT_EQ(tape.grad(a), (Matrix{{6.0, -2.0}}));
  EXPECT_EQ(tape.grad(b), (Matrix{{2.0, 4.0}}));
}

TEST(Tape, ConstantsReceiveNoGradient) {
  GradTape tape;
  const Var a = tape.parameter(Matrix{{1.0, 2.0}});
  const Var c = tape.constant(Matrix{{5.0, 7.0}});
  const Var y = tape.matmul_nt(a, c);
  tape.backward(y);
  EXPECT_FALSE(tape.requires_grad(c));
  EXPECT_EQ(tape.grad(c), Matrix(1, 2, 0.0));
}

TEST(Tape, BackwardOnlyOnceAndOnScalars) {
  GradTape tape;
  const Var a = tape.parameter(Matrix{{1.0, 2.0}});
  EXPECT_CITE_ERROR(tape.backward(a), ErrorCode::kShapeMismatch);
  const Var y = tape.matmul_nt(a, a);
  tape.backward(y);
  EXPECT_CITE_ERROR(tape.backward(y), ErrorCode::kInvalidArgument);
}

TEST(Tape, EveryPrimitivePassesGradCheck) {
  std::mt19937_64 rng(21);
  const Matrix x0 = random_matrix(3, 4, rng);
  const Matrix w = random_matrix(4, 5, rng);
  const Matrix bias = random_matrix(1, 5, rng);
  const Matrix q = random_matrix(3, 5, rng);
  const std::vector<std::size_t> targets{0, 3, 1};
  RowMask mask{3, 5, std::vector<std::uint8_t>(15, 1)};
  mask.keep[1] = 0;
  mask.keep[7] = 0;

  const DifferentiableFn f = [&](const Matrix& x, Matrix* g) {
    GradTape tape;
    const Var v = tape.parameter(x);
    const Var h = tape.tanh(tape.add_row_bias(tape.matmul(v, tape.constant(w)), tape.constant(bias)));
    const Var n = tape.l2_normalize_rows(tape.scale(h, 3.0));
    const Var t = tape.transpose(tape.transpose(n));
    const Var ce = tape.masked_cross_entropy(tape.scale(t, 4.0), targets, &mask);
    const Var klv = tape.kl_from_logits(tape.scale(n, 2.0), q);
    const Var loss = tape.add(ce, klv);
    if (g) {
      tape.backward(loss);
      *g = tape.grad(v);
    }
    return tape.value(loss).item();
  };
  EXPECT_LT(grad_check(f, x0), 1e-6);
}

TEST(Determinism, BitIdenticalRepeats) {
  std::mt19937_64 rng(22);
  const Matrix a = random_matrix(6, 8, rng);
  const Matrix b = random_matrix(5, 8, rng);
  const Matrix s1 = softmax_rows(cosine_sim(l2_normalize_rows(a), l2_normalize_rows(b)), 0.07);
  const Matrix s2 = softmax_rows(cosine_sim(l2_normalize_rows(a), l2_normalize_rows(b)), 0.07);
  EXPECT_TRUE(bit_equal(s1, s2));
}
