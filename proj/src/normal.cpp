#include "qlse/normal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qlse {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490393;
// Beyond this the standardized cell is treated as a point mass at its midpoint.
constexpr double kNarrowCell = 1e-6;
// Both-ends-in-one-tail switch to Mills-ratio forms.
constexpr double kTailCut = 8.0;
}  // namespace

double norm_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double norm_q(double x) {
  if (x == kInf) return 0.0;
  if (x == -kInf) return 1.0;
  return 0.5 * std::erfc(x * kInvSqrt2);
}

double mills_ratio(double x) {
  if (x < 0) throw std::invalid_argument("mills_ratio: requires x >= 0");
  if (x < kTailCut) {
    return norm_q(x) / norm_pdf(x);
  }
  // Continued fraction 1/(x + 1/(x + 2/(x + 3/(...)))) via modified Lentz.
  const double tiny = 1e-300;
  double f = x > tiny ? x : tiny;
  double c = f;
  double d = 0.0;
  for (int i = 1; i <= 200; ++i) {
    double a = static_cast<double>(i);
    d = x + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

namespace {

// Cell entirely in the upper tail: alpha >= kTailCut, beta may be +inf.
StdTruncMoments upper_tail_moments(double alpha, double beta) {
  StdTruncMoments out;
  const double ma = mills_ratio(alpha);
  double e, mb;
  if (beta == kInf) {
    e = 0.0;
    mb = 0.0;
  } else {
    e = std::exp(0.5 * (alpha - beta) * (alpha + beta));  // pdf(beta)/pdf(alpha)
    mb = mills_ratio(beta);
  }
  const double denom = ma - e * mb;
  out.r = (1.0 - e) / denom;
  out.d = (alpha - (beta == kInf ? 0.0 : beta * e)) / denom;
  out.var_u = std::clamp(1.0 + out.d - out.r * out.r, 0.0, 1.0);
  const double pa = norm_pdf(alpha);
  const double ome = 1.0 - e;
  out.lambda_term = pa * ome * ome / denom;
  return out;
}

}  // namespace

StdTruncMoments std_trunc_moments(double alpha, double beta) {
  if (!(alpha < beta)) throw std::invalid_argument("std_trunc_moments: need alpha < beta");
  StdTruncMoments out;
  if (alpha == -kInf && beta == kInf) {
    return out;  // whole line: mean 0, variance 1, no information
  }
  if (std::isfinite(alpha) && std::isfinite(beta) && beta - alpha < kNarrowCell) {
    const double c = 0.5 * (alpha + beta);
    const double w = beta - alpha;
    out.var_u = w * w / 12.0;
    out.r = c * (1.0 - out.var_u);
    out.d = out.var_u + out.r * out.r - 1.0;
    out.lambda_term = norm_pdf(c) * w * out.r * out.r;
    return out;
  }
  if (alpha >= kTailCut) {
    return upper_tail_moments(alpha, beta);
  }
  if (beta <= -kTailCut) {
    // Mirror: u -> -u maps the cell to [-beta, -alpha] in the upper tail.
    StdTruncMoments mir = upper_tail_moments(-beta, -alpha);
    mir.r = -mir.r;
    return mir;
  }
  // Central/mixed regime: direct evaluation.
  const double pa = norm_pdf(alpha);
  const double pb = norm_pdf(beta);
  double z;
  if (alpha >= 0) {
    z = norm_q(alpha) - norm_q(beta);
  } else if (beta <= 0) {
    z = norm_cdf(beta) - norm_cdf(alpha);
  } else {
    z = 0.5 * (std::erf(beta * kInvSqrt2) - std::erf(alpha * kInvSqrt2));
  }
  if (z <= 0) {
    // Rounding collapsed the cell: fall back to a point mass at the midpoint.
    double c = std::isfinite(alpha) && std::isfinite(beta) ? 0.5 * (alpha + beta)
               : std::isfinite(alpha)                      ? alpha
                                                           : beta;
    out.r = c;
    out.var_u = 0.0;
    out.d = out.r * out.r - 1.0;
    out.lambda_term = 0.0;
    return out;
  }
  const double dp = pa - pb;
  out.r = dp / z;
  const double apa = std::isfinite(alpha) ? alpha * pa : 0.0;
  const double bpb = std::isfinite(beta) ? beta * pb : 0.0;
  out.d = (apa - bpb) / z;
  out.var_u = std::clamp(1.0 + out.d - out.r * out.r, 0.0, 1.0);
  out.lambda_term = dp * dp / z;
  return out;
}

}  // namespace qlse
