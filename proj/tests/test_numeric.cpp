#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "sslkit/errors.hpp"
#include "sslkit/numeric.hpp"
#include "test_util.hpp"

using namespace sslkit;

TEST(Softmax, UniformOnEqualLogits) {
  const auto p = softmax(std::vector<double>{0, 0, 0});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  const auto p = softmax(std::vector<double>{1000, 0});
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_GE(p[1], 0.0);
  EXPECT_LT(p[1], 1e-300);
}

TEST(Softmax, HandValues) {
  // e^1, e^2, e^3 over their sum.
  const double s = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const auto p = softmax(std::vector<double>{1, 2, 3});
  EXPECT_NEAR(p[0], std::exp(1.0) / s, 1e-15);
  EXPECT_NEAR(p[1], std::exp(2.0) / s, 1e-15);
  EXPECT_NEAR(p[2], std::exp(3.0) / s, 1e-15);
  EXPECT_NEAR(p[0], 0.09003, 5e-6);
  EXPECT_NEAR(p[1], 0.24473, 5e-6);
  EXPECT_NEAR(p[2], 0.66524, 5e-6);
}

TEST(Softmax, EmptyInputThrows) {
  try {
    softmax(std::vector<double>{});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "empty logits");
  }
}

TEST(Softmax, NonFiniteThrows) {
  EXPECT_THROW(softmax(std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()}), NumericalError);
}

TEST(Softmax, SumsToOneAndPositive) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto m = testutil::random_matrix(1, 1 + t % 17, rng, -50, 50);
    const auto p = softmax(m.row(0));
    double s = 0.0;
    for (double v : p) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Softmax, ShiftInvariance) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> grid(-1 << 20, 1 << 20);
  std::uniform_int_distribution<int> shift(-1000000, 1000000);
  for (int t = 0; t < 200; ++t) {
    // Dyadic logits plus an integer shift add without rounding, so the
    // max-subtracted logits and hence the outputs are bit-identical.
    std::vector<double> x(6), y(6);
    const double c = shift(rng);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::ldexp(static_cast<double>(grid(rng)), -16);
      y[i] = x[i] + c;
    }
    EXPECT_EQ(softmax(x), softmax(y));
  }
  // Arbitrary reals: x + c itself rounds, so agreement is to that rounding.
  for (int t = 0; t < 200; ++t) {
    const auto m = testutil::random_matrix(1, 5, rng, -10, 10);
    const double c = std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    std::vector<double> y(m.row(0).begin(), m.row(0).end());
    for (auto& v : y) v += c;
    const auto p = softmax(m.row(0));
    const auto q = softmax(y);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-8);
  }
}

TEST(SoftmaxRows, TemperatureScalesLogits) {
  const Matrix m{{1, 2}, {0, 4}};
  const Matrix s = softmax_rows(m, 0.5);
  const auto r0 = softmax(std::vector<double>{2, 4});
  EXPECT_DOUBLE_EQ(s(0, 0), r0[0]);
  EXPECT_DOUBLE_EQ(s(0, 1), r0[1]);
}

TEST(L2Normalize, Examples) {
  EXPECT_EQ(l2_normalize(std::vector<double>{1, 0, 0}), (std::vector<double>{1, 0, 0}));
  const auto u = l2_normalize(std::vector<double>{3, 4});
  EXPECT_NEAR(u[0], 0.6, 1e-15);
  EXPECT_NEAR(u[1], 0.8, 1e-15);
  try {
    l2_normalize(std::vector<double>{0, 0});
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_STREQ(e.what(), "degenerate vector");
  }
}

TEST(L2Normalize, UnitNormSameDirectionIdempotent) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto m = testutil::random_matrix(1, 1 + t % 9, rng, -100, 100);
    const auto u = l2_normalize(m.row(0));
    EXPECT_NEAR(l2_norm(u), 1.0, 1e-12);
    const double n = l2_norm(m.row(0));
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(u[i] * n, m(0, i), 1e-12 * n);
    const auto uu = l2_normalize(u);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(uu[i], u[i], 1e-12);
  }
}

TEST(L2Normalize, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto r = testutil::random_matrix(1, 6, rng);
    const auto g = testutil::random_matrix(1, 6, rng);
    // L = g . normalize(r)
    auto f = [&](std::span<const double> x) { return dot(g.row(0), l2_normalize(x)); };
    const auto analytic = l2_normalize_backward(l2_normalize(r.row(0)), l2_norm(r.row(0)), g.row(0));
    EXPECT_LT(finite_diff_check(f, analytic, r.row(0)).max_rel_error, 1e-7);
  }
}

TEST(Matmul, AgreesWithTripleLoop) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto a = testutil::random_matrix(10, 10, rng);
    const auto b = testutil::random_matrix(10, 10, rng);
    const Matrix c = matmul(a, b);
    const Matrix ct = matmul_transposed(a, transpose(b));
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = 0; j < 10; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 10; ++k) s += a(i, k) * b(k, j);
        EXPECT_NEAR(c(i, j), s, 1e-12);
        EXPECT_NEAR(ct(i, j), s, 1e-12);
      }
    }
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>(3)), std::invalid_argument);
}

TEST(Matrix, InvariantsAndHelpers) {
  const Matrix m(3, 4, 1.5);
  EXPECT_EQ(m.size(), 12u);
  EXPECT_TRUE(m.all_finite());
  Matrix bad(1, 1);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(bad.all_finite());
  const Matrix s = vstack(Matrix{{1, 2}}, Matrix{{3, 4}, {5, 6}});
  EXPECT_EQ(s.rows(), 3u);
  EXPECT_EQ(s(2, 1), 6.0);
  EXPECT_NEAR(log_sum_exp(std::vector<double>{1000, 1000}), 1000 + std::log(2.0), 1e-12);
}

TEST(FiniteDiff, QuadraticIsExact) {
  auto f = [](std::span<const double> x) { return dot(x, x); };
  const std::vector<double> point{1, 2};
  const auto report = finite_diff_check(f, std::vector<double>{2, 4}, point);
  EXPECT_LT(report.max_rel_error, 1e-8);
  EXPECT_GE(report.max_rel_error, 0.0);
  EXPECT_EQ(report.step, 1e-5);
}

TEST(FiniteDiff, DetectsScaledGradient) {
  auto f = [](std::span<const double> x) { return dot(x, x); };
  const std::vector<double> point{1, 2};
  const auto report = finite_diff_check(f, std::vector<double>{4, 8}, point);
  // |2n - n| / max(2n, n) = 0.5
  EXPECT_NEAR(report.max_rel_error, 0.5, 1e-6);
}

TEST(FiniteDiff, CrossEntropyOfSoftmax) {
  std::mt19937_64 rng(6);
  const auto z = testutil::random_matrix(1, 5, rng, -3, 3);
  const std::size_t target = 2;
  auto f = [&](std::span<const double> x) { return -std::log(softmax(x)[target]); };
  auto g = softmax(z.row(0));
  g[target] -= 1.0;
  EXPECT_LT(finite_diff_check(f, g, z.row(0)).max_rel_error, 1e-6);
}

TEST(FiniteDiff, ReportsWorstCoordinateAsPair) {
  auto f = [](std::span<const double> x) { return x[0] + 3 * x[3]; };
  const std::vector<double> point{0, 0, 0, 0};
  const auto report = finite_diff_check(f, std::vector<double>{1, 0, 0, 0}, point, 1e-5, 2);
  EXPECT_EQ(report.worst_coordinate, (std::pair<std::size_t, std::size_t>{1, 1}));
}

TEST(FiniteDiff, NonFiniteNamesCoordinate) {
  auto f = [](std::span<const double> x) { return x[1] > 0.5 ? std::log(-1.0) : x[0]; };
  const std::vector<double> point{0, 0.5};
  try {
    finite_diff_check(f, std::vector<double>{1, 0}, point);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("coordinate 1"), std::string::npos);
  }
}
