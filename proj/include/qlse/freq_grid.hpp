#pragma once

#include <utility>
#include <vector>

#include "qlse/types.hpp"

namespace qlse {

// Ratio I1(kappa)/I0(kappa) of modified Bessel functions.
double bessel_ratio(double kappa);
// Inverse of bessel_ratio, solved by safeguarded Newton to |R(kappa)-r|<=1e-10.
// r <= 0 maps to 0; r beyond the representable range maps to the kappa cap.
double invert_bessel_ratio(double r);

// Circular posterior of one frequency: mean direction, concentration of the
// matched von Mises, and the trigonometric moments E[e^{j*q*theta}], q=0..n-1.
struct FreqPosterior {
  double mu = 0;
  double kappa = 0;
  CVec moments;  // length n; moments[0] = 1; uniform posterior has all others 0

  bool is_uniform() const { return kappa == 0.0; }
};

// Dense periodic grid used to turn exponential-family log densities
// log f(theta) = Re{ sum_i c_i e^{j m_i theta} } into trigonometric moments.
// Grid size is the smallest power of two >= 32*n; moments are extracted with a
// forward DFT of the gridded density.
class FreqGrid {
 public:
  explicit FreqGrid(int n);
  ~FreqGrid();
  FreqGrid(const FreqGrid&) = delete;
  FreqGrid& operator=(const FreqGrid&) = delete;

  int n() const { return n_; }
  int grid_size() const { return g_; }
  double theta_at(int idx) const { return -kPi + 2.0 * kPi * idx / g_; }

  // coeffs: (harmonic index in [0, n), complex coefficient) pairs; repeated
  // indices accumulate. Returns moments of the normalized gridded density.
  CVec moments_from_log_coeffs(const std::vector<std::pair<int, Complex>>& coeffs);

  // Moments of exp(logf - max(logf)) for an explicit log density sampled on
  // the grid (theta_at(0..g-1)). Used by tests and the noncoherent initializer.
  CVec moments_from_log_density(const Vec& logf);

  // Builds the full posterior record from moments.
  static FreqPosterior posterior_from_moments(CVec moments);

 private:
  CVec density_from_spectrum();  // runs bwd plan on buf_, exponentiates in place
  CVec moments_of_density();     // runs bwd plan on buf_ holding the density

  int n_ = 0;
  int g_ = 0;
  void* plan_bwd_ = nullptr;  // fftw_plan hidden behind void* to keep fftw out of the header
  Complex* buf_ = nullptr;    // in-place transform buffer, length g_
};

}  // namespace qlse
