#include "qlse/model.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>

namespace qlse {

CVec steering(const RowSet& rows, double theta) {
  CVec a(rows.m());
  for (int i = 0; i < rows.m(); ++i) {
    const double ph = rows.rows[i] * theta;
    a(i) = Complex(std::cos(ph), std::sin(ph));
  }
  return a;
}

CVec steering_full(int n, double theta) {
  CVec a(n);
  for (int i = 0; i < n; ++i) {
    const double ph = i * theta;
    a(i) = Complex(std::cos(ph), std::sin(ph));
  }
  return a;
}

CMat assemble_line_spectrum(const Vec& theta, const CMat& w, const RowSet& rows) {
  rows.validate();
  if (theta.size() != w.rows())
    throw std::invalid_argument("assemble_line_spectrum: theta/w size mismatch");
  CMat a(rows.m(), theta.size());
  for (int k = 0; k < theta.size(); ++k) a.col(k) = steering(rows, theta(k));
  return a * w;
}

CMat assemble_full(const Vec& theta, const CMat& w, int n) {
  if (theta.size() != w.rows())
    throw std::invalid_argument("assemble_full: theta/w size mismatch");
  CMat a(n, theta.size());
  for (int k = 0; k < theta.size(); ++k) a.col(k) = steering_full(n, theta(k));
  return a * w;
}

double doa_to_freq(double angle_deg) {
  return kPi * std::sin(angle_deg * kPi / 180.0);
}

double freq_to_doa(double theta) {
  double s = std::clamp(theta / kPi, -1.0, 1.0);
  return std::asin(s) * 180.0 / kPi;
}

double min_wrap_separation(const Vec& theta) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < theta.size(); ++i)
    for (int j = i + 1; j < theta.size(); ++j)
      best = std::min(best, std::abs(wrap_angle(theta(i) - theta(j))));
  return best;
}

Truth generate_truth(const TruthOptions& opt, std::mt19937_64& rng) {
  if (opt.n <= 0 || opt.m <= 0 || opt.k <= 0 || opt.l <= 0)
    throw std::invalid_argument("generate_truth: dimensions must be positive");
  if (opt.m > opt.n)
    throw std::invalid_argument("generate_truth: m cannot exceed n");

  Truth t;
  t.rows.n = opt.n;
  if (opt.prefix_rows || opt.m == opt.n) {
    t.rows.rows.resize(opt.m);
    std::iota(t.rows.rows.begin(), t.rows.rows.end(), 0);
  } else {
    IVec all(opt.n);
    std::iota(all.begin(), all.end(), 0);
    IVec pick;
    std::sample(all.begin(), all.end(), std::back_inserter(pick), opt.m, rng);
    std::sort(pick.begin(), pick.end());
    t.rows.rows = pick;
  }
  t.rows.validate();

  if (opt.fixed_theta.size() > 0) {
    if (opt.fixed_theta.size() != opt.k)
      throw std::invalid_argument("generate_truth: fixed_theta size mismatch");
    t.theta = opt.fixed_theta;
  } else {
    const double min_sep = opt.min_sep_factor * 2.0 * kPi / opt.n;
    std::uniform_real_distribution<double> uang(-kPi, kPi);
    bool ok = false;
    for (int attempt = 0; attempt < opt.rejection_budget; ++attempt) {
      Vec cand(opt.k);
      for (int i = 0; i < opt.k; ++i) cand(i) = uang(rng);
      if (opt.k == 1 || min_wrap_separation(cand) > min_sep) {
        t.theta = cand;
        ok = true;
        break;
      }
    }
    if (!ok)
      throw std::runtime_error(
          "generate_truth: frequency rejection budget exhausted (separation "
          "constraint too tight for k and n)");
  }

  std::normal_distribution<double> mag(1.0, 0.2);
  std::uniform_real_distribution<double> uph(-kPi, kPi);
  t.w.resize(opt.k, opt.l);
  for (int c = 0; c < opt.l; ++c)
    for (int r = 0; r < opt.k; ++r) {
      const double g = std::abs(mag(rng));
      const double ph = uph(rng);
      t.w(r, c) = g * Complex(std::cos(ph), std::sin(ph));
    }

  t.z = assemble_line_spectrum(t.theta, t.w, t.rows);

  std::normal_distribution<double> gauss(0.0, 1.0);
  CMat unit_noise(opt.m, opt.l);
  const double half = std::sqrt(0.5);
  for (int c = 0; c < opt.l; ++c)
    for (int r = 0; r < opt.m; ++r)
      unit_noise(r, c) = Complex(half * gauss(rng), half * gauss(rng));

  const double zn = t.z.norm();
  const double nn = unit_noise.norm();
  if (!(zn > 0) || !(nn > 0))
    throw std::runtime_error("generate_truth: degenerate signal or noise draw");
  const double sigma = zn / (nn * std::pow(10.0, opt.snr_db / 20.0));
  t.sigma2 = sigma * sigma;
  t.noisy = t.z + sigma * unit_noise;
  return t;
}

}  // namespace qlse
