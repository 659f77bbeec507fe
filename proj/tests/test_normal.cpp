#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "qlse/normal.hpp"

using namespace qlse;

TEST_CASE("cdf/pdf basics") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(norm_cdf(kInf) == 1.0);
  CHECK(norm_cdf(-kInf) == 0.0);
  CHECK(norm_q(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(norm_pdf(0.0) == doctest::Approx(0.39894228040143268).epsilon(1e-15));
  CHECK(norm_pdf(kInf) == 0.0);
  // Deep tail keeps relative accuracy via erfc.
  CHECK(norm_q(30.0) == doctest::Approx(4.906713927148187e-198).epsilon(1e-12));
}

TEST_CASE("mills ratio agrees with direct evaluation and asymptotics") {
  for (double x : {0.0, 0.5, 1.0, 3.0, 7.0, 7.999}) {
    CHECK(mills_ratio(x) == doctest::Approx(norm_q(x) / norm_pdf(x)).epsilon(1e-13));
  }
  // Continuity across the branch switch at 8.
  CHECK(mills_ratio(8.0001) == doctest::Approx(norm_q(8.0001) / norm_pdf(8.0001)).epsilon(1e-12));
  // Large-x asymptotic series m(x) ~ 1/x - 1/x^3 + 3/x^5 - 15/x^7; the
  // truncation error of this reference is ~105/x^8, so only probe x >= 50.
  for (double x : {50.0, 300.0, 1e4}) {
    const double x2 = x * x;
    const double series = (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)) / x;
    CHECK(mills_ratio(x) == doctest::Approx(series).epsilon(1e-10));
  }
  CHECK_THROWS(mills_ratio(-1.0));
}

TEST_CASE("truncated moments: whole line and symmetric cells") {
  const auto whole = std_trunc_moments(-kInf, kInf);
  CHECK(whole.r == 0.0);
  CHECK(whole.var_u == 1.0);
  CHECK(whole.lambda_term == 0.0);

  // Symmetric cell: zero mean, known variance.
  const auto sym = std_trunc_moments(-1.0, 1.0);
  CHECK(sym.r == doctest::Approx(0.0).epsilon(1e-15));
  const double z = std::erf(1.0 / std::sqrt(2.0));
  const double expect_var = 1.0 - 2.0 * norm_pdf(1.0) / z;
  CHECK(sym.var_u == doctest::Approx(expect_var).epsilon(1e-13));
}

TEST_CASE("truncated moments: direct vs branch values at moderate depth") {
  // Compare central-branch outputs with a long-double direct evaluation. The
  // erf-difference reference cancels catastrophically beyond |edge| ~ 6, so
  // the probe range stays inside that; deeper cells are covered by the mirror
  // and tail-identity cases plus the quadrature oracle in the denoiser tests.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ua(-5.5, 5.0);
  std::uniform_real_distribution<double> uw(0.1, 4.0);
  for (int i = 0; i < 500; ++i) {
    const double a = ua(rng);
    const double b = a + uw(rng);
    const auto m = std_trunc_moments(a, b);
    const long double pa = std::exp(-0.5L * (long double)a * a) * 0.39894228040143267794L;
    const long double pb = std::exp(-0.5L * (long double)b * b) * 0.39894228040143267794L;
    const long double zz =
        0.5L * (std::erfl(b * 0.70710678118654752440L) - std::erfl(a * 0.70710678118654752440L));
    const long double r = (pa - pb) / zz;
    const long double d = ((long double)a * pa - (long double)b * pb) / zz;
    CHECK(m.r == doctest::Approx((double)r).epsilon(1e-9));
    CHECK(m.var_u == doctest::Approx((double)(1.0L + d - r * r)).epsilon(1e-7));
    CHECK(m.lambda_term == doctest::Approx((double)((pa - pb) * (pa - pb) / zz)).epsilon(1e-9));
  }
}

TEST_CASE("truncated moments: tail branch continuity at the switch") {
  // Values just below and above the branch threshold must agree closely.
  for (double w : {0.3, 1.5, 10.0}) {
    const auto lo = std_trunc_moments(7.9999, 7.9999 + w);
    const auto hi = std_trunc_moments(8.0001, 8.0001 + w);
    CHECK(lo.r == doctest::Approx(hi.r).epsilon(5e-3));
    CHECK(lo.var_u == doctest::Approx(hi.var_u).epsilon(5e-3));
    // And the tail branch satisfies the half-infinite identity r = 1/m(alpha).
    const auto half = std_trunc_moments(12.0, kInf);
    CHECK(half.r == doctest::Approx(1.0 / mills_ratio(12.0)).epsilon(1e-13));
    CHECK(half.d == doctest::Approx(12.0 / mills_ratio(12.0)).epsilon(1e-13));
  }
}

TEST_CASE("truncated moments: mirror symmetry") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ua(8.5, 25.0);
  std::uniform_real_distribution<double> uw(0.1, 6.0);
  for (int i = 0; i < 200; ++i) {
    const double a = ua(rng);
    const double b = a + uw(rng);
    const auto up = std_trunc_moments(a, b);
    const auto dn = std_trunc_moments(-b, -a);
    CHECK(dn.r == doctest::Approx(-up.r).epsilon(1e-14));
    CHECK(dn.var_u == doctest::Approx(up.var_u).epsilon(1e-12));
    CHECK(dn.lambda_term == doctest::Approx(up.lambda_term).epsilon(1e-12));
  }
}

TEST_CASE("truncated moments: mean inside cell, variance in (0, 1]") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ua(-20.0, 19.0);
  std::uniform_real_distribution<double> uw(1e-5, 8.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = ua(rng);
    const double b = a + uw(rng);
    const auto m = std_trunc_moments(a, b);
    CHECK(m.r >= a);
    CHECK(m.r <= b);
    CHECK(m.var_u >= 0.0);
    CHECK(m.var_u <= 1.0);
    CHECK(m.lambda_term >= 0.0);
  }
  CHECK_THROWS(std_trunc_moments(1.0, 1.0));
  CHECK_THROWS(std_trunc_moments(2.0, 1.0));
}
