#pragma once

#include "qlse/types.hpp"

namespace qlse {

// Uniform mid-rise quantizer acting separately on real and imaginary parts.
// bits=1 has the single threshold 0; bits>1 has 2^bits - 1 equispaced finite
// thresholds spanning [-half_range, +half_range]; outermost cells are unbounded.
struct QuantizerSpec {
  int bits = 1;
  double half_range = 0.0;
  std::vector<double> thresholds;  // ascending finite knots, size 2^bits - 1

  int num_cells() const { return 1 << bits; }
  // Lower/upper edge of a cell; +-inf for the outer cells.
  double cell_lo(int cell) const;
  double cell_hi(int cell) const;

  static QuantizerSpec make(int bits, double half_range);
  // Half-range rule used by the experiment harness: 3*sqrt(k/2) for k sources
  // of near-unit magnitude.
  static double auto_half_range(int k);
};

// Scalar cell index; values equal to a threshold map to the upper cell.
int quantize_value(double x, const QuantizerSpec& spec);

struct QuantizedData {
  QuantizerSpec spec;
  Eigen::MatrixXi re_idx;
  Eigen::MatrixXi im_idx;
};

// Elementwise quantization of a complex matrix (noisy measurements).
QuantizedData quantize_matrix(const CMat& noisy, const QuantizerSpec& spec);

struct Moments1D {
  double mean = 0;
  double var = 0;
};

// Posterior mean/variance of x with prior N(prior_mean, prior_var) given that
// x + n landed in `cell`, n ~ N(0, noise_var). All quantities are per real
// component. Posterior variance is exact: (v0*nv + v0^2*VarU)/(v0+nv),
// guaranteed in (0, prior_var].
Moments1D mmse_denoise_real(double prior_mean, double prior_var, int cell,
                            const QuantizerSpec& spec, double noise_var);

struct CMoments {
  Complex mean{0, 0};
  double var = 0;  // complex variance E|z - mean|^2
};

// Complex denoiser for one entry: independent real/imag components with
// complex prior variance prior_var and complex noise variance sigma2 (each
// component gets half of either).
CMoments mmse_denoise_complex(Complex prior_mean, double prior_var, int re_cell,
                              int im_cell, const QuantizerSpec& spec, double sigma2);

// Analog counterpart: exact Gaussian combination with observation y.
CMoments mmse_denoise_analog(Complex prior_mean, double prior_var, Complex y,
                             double sigma2);

// Elementwise denoising of the whole measurement matrix. Runs the entries in
// an OpenMP parallel loop when parallel=true; output is bit-identical either
// way because entries are independent.
void denoise_matrix(const QuantizedData& data, const CMat& prior_mean,
                    const Mat& prior_var, double sigma2, CMat& post_mean,
                    Mat& post_var, bool parallel);

}  // namespace qlse
