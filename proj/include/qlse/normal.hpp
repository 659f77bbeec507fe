#pragma once

#include <limits>

namespace qlse {

// Standard normal density and distribution functions, stable in both tails.
double norm_pdf(double x);
double norm_cdf(double x);          // P(X <= x)
double norm_q(double x);            // P(X > x)
// Mills ratio Q(x)/pdf(x); accurate for all x >= 0 (continued fraction in the tail).
double mills_ratio(double x);

// Moments of a standard normal truncated to [alpha, beta] (either end may be
// infinite), written so deep-tail and narrow-cell cases stay finite:
//   r        = (pdf(alpha) - pdf(beta)) / Z   = E[u | u in cell]
//   d        = (alpha*pdf(alpha) - beta*pdf(beta)) / Z
//   var_u    = 1 + d - r^2                    = Var[u | u in cell], clamped to [0, 1]
//   lambda_term = (pdf(alpha) - pdf(beta))^2 / Z
// with Z = cdf(beta) - cdf(alpha).
struct StdTruncMoments {
  double r = 0;
  double d = 0;
  double var_u = 1;
  double lambda_term = 0;
};

StdTruncMoments std_trunc_moments(double alpha, double beta);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace qlse
