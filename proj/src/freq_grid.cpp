#include "qlse/freq_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace qlse {

namespace {
// FFTW planning (and plan destruction) is not thread-safe; execution of
// distinct plans on distinct buffers is.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

constexpr double kKappaCap = 1e8;

double bessel_ratio_asymptotic(double kappa) {
  const double z = 1.0 / (8.0 * kappa);
  const double num = 1.0 - 3.0 * z - 15.0 / 2.0 * z * z - 105.0 / 2.0 * z * z * z;
  const double den = 1.0 + z + 9.0 / 2.0 * z * z + 75.0 / 2.0 * z * z * z;
  return num / den;
}
}  // namespace

double bessel_ratio(double kappa) {
  if (kappa < 0) throw std::invalid_argument("bessel_ratio: negative concentration");
  if (kappa == 0) return 0.0;
  if (kappa > 500.0) return bessel_ratio_asymptotic(kappa);
  return std::cyl_bessel_i(1.0, kappa) / std::cyl_bessel_i(0.0, kappa);
}

double invert_bessel_ratio(double r) {
  if (!(r > 0)) return 0.0;
  if (r >= bessel_ratio(kKappaCap)) return kKappaCap;
  // Starting guess (Best/Fisher approximations), then safeguarded Newton.
  double kappa;
  if (r < 0.53)
    kappa = 2.0 * r + r * r * r + 5.0 * r * r * r * r * r / 6.0;
  else if (r < 0.85)
    kappa = -0.4 + 1.39 * r + 0.43 / (1.0 - r);
  else
    kappa = 1.0 / (r * r * r - 4.0 * r * r + 3.0 * r);
  double lo = 0.0, hi = kKappaCap;
  kappa = std::clamp(kappa, 1e-12, kKappaCap);
  for (int it = 0; it < 200; ++it) {
    const double ratio = bessel_ratio(kappa);
    const double f = ratio - r;
    if (std::abs(f) <= 1e-10) break;
    if (f > 0)
      hi = kappa;
    else
      lo = kappa;
    const double deriv =
        kappa < 1e-8 ? 0.5 : 1.0 - ratio / kappa - ratio * ratio;
    double next = deriv > 0 ? kappa - f / deriv : kappa;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    kappa = next;
  }
  return kappa;
}

FreqGrid::FreqGrid(int n) : n_(n) {
  if (n < 2) throw std::invalid_argument("FreqGrid: aperture must be >= 2");
  int g = 1;
  while (g < 32 * n) g <<= 1;
  g_ = g;
  buf_ = static_cast<Complex*>(fftw_malloc(sizeof(fftw_complex) * g_));
  if (!buf_) throw std::bad_alloc();
  std::lock_guard<std::mutex> lock(fftw_mutex());
  plan_bwd_ = fftw_plan_dft_1d(g_, reinterpret_cast<fftw_complex*>(buf_),
                               reinterpret_cast<fftw_complex*>(buf_),
                               FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!plan_bwd_) {
    fftw_free(buf_);
    throw std::runtime_error("FreqGrid: FFTW plan creation failed");
  }
}

FreqGrid::~FreqGrid() {
  std::lock_guard<std::mutex> lock(fftw_mutex());
  if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
  if (buf_) fftw_free(buf_);
}

CVec FreqGrid::moments_of_density() {
  // buf_ holds the (unnormalized, nonnegative) density; the backward DFT bin q
  // gives sum_g p_g e^{+j 2 pi q g / G}. The grid starts at -pi, contributing
  // the (-1)^q twist: E[e^{j q theta}] = (-1)^q * bin_q / bin_0.
  fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_),
                   reinterpret_cast<fftw_complex*>(buf_),
                   reinterpret_cast<fftw_complex*>(buf_));
  const double z = buf_[0].real();
  if (!(z > 0)) throw std::runtime_error("FreqGrid: density normalization failed");
  CVec mom(n_);
  mom(0) = Complex(1.0, 0.0);
  double sign = -1.0;
  for (int q = 1; q < n_; ++q) {
    Complex v = sign * buf_[q] / z;
    const double mag = std::abs(v);
    if (mag > 1.0) v /= mag;
    mom(q) = v;
    sign = -sign;
  }
  return mom;
}

CVec FreqGrid::moments_from_log_coeffs(
    const std::vector<std::pair<int, Complex>>& coeffs) {
  for (int i = 0; i < g_; ++i) buf_[i] = Complex(0, 0);
  for (const auto& [h, c] : coeffs) {
    if (h < 0 || h >= n_)
      throw std::invalid_argument("FreqGrid: harmonic index out of range");
    const double tw = (h & 1) ? -1.0 : 1.0;
    buf_[h] += tw * c;
  }
  fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_),
                   reinterpret_cast<fftw_complex*>(buf_),
                   reinterpret_cast<fftw_complex*>(buf_));
  double mx = buf_[0].real();
  for (int i = 1; i < g_; ++i) mx = std::max(mx, buf_[i].real());
  for (int i = 0; i < g_; ++i)
    buf_[i] = Complex(std::exp(buf_[i].real() - mx), 0.0);
  return moments_of_density();
}

CVec FreqGrid::moments_from_log_density(const Vec& logf) {
  if (logf.size() != g_)
    throw std::invalid_argument("FreqGrid: log density must match grid size");
  const double mx = logf.maxCoeff();
  for (int i = 0; i < g_; ++i) buf_[i] = Complex(std::exp(logf(i) - mx), 0.0);
  return moments_of_density();
}

FreqPosterior FreqGrid::posterior_from_moments(CVec moments) {
  FreqPosterior post;
  post.moments = std::move(moments);
  if (post.moments.size() < 2) throw std::invalid_argument("posterior: too few moments");
  const Complex m1 = post.moments(1);
  const double mag = std::abs(m1);
  if (mag > 0) {
    post.mu = std::arg(m1);
    post.kappa = invert_bessel_ratio(mag);
  }
  return post;
}

}  // namespace qlse
