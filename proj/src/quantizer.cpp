#include "qlse/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "qlse/normal.hpp"

namespace qlse {

double QuantizerSpec::cell_lo(int cell) const {
  if (cell < 0 || cell >= num_cells())
    throw std::invalid_argument("QuantizerSpec: cell index out of range");
  return cell == 0 ? -kInf : thresholds[cell - 1];
}

double QuantizerSpec::cell_hi(int cell) const {
  if (cell < 0 || cell >= num_cells())
    throw std::invalid_argument("QuantizerSpec: cell index out of range");
  return cell == num_cells() - 1 ? kInf : thresholds[cell];
}

QuantizerSpec QuantizerSpec::make(int bits, double half_range) {
  if (bits < 1 || bits > 12)
    throw std::invalid_argument("QuantizerSpec: bits must be in [1, 12]");
  QuantizerSpec spec;
  spec.bits = bits;
  spec.half_range = half_range;
  if (bits == 1) {
    spec.thresholds = {0.0};
    return spec;
  }
  if (!(half_range > 0))
    throw std::invalid_argument("QuantizerSpec: half_range must be positive for bits > 1");
  const int nt = (1 << bits) - 1;
  spec.thresholds.resize(nt);
  const double step = 2.0 * half_range / static_cast<double>(nt - 1);
  for (int i = 0; i < nt; ++i) spec.thresholds[i] = -half_range + step * i;
  spec.thresholds.front() = -half_range;
  spec.thresholds.back() = half_range;
  return spec;
}

double QuantizerSpec::auto_half_range(int k) {
  if (k < 1) throw std::invalid_argument("auto_half_range: k must be >= 1");
  return 3.0 * std::sqrt(0.5 * static_cast<double>(k));
}

int quantize_value(double x, const QuantizerSpec& spec) {
  if (std::isnan(x)) throw std::invalid_argument("quantize_value: NaN input");
  // Cell index = number of thresholds <= x, so a value equal to a threshold
  // lands in the upper cell.
  auto it = std::upper_bound(spec.thresholds.begin(), spec.thresholds.end(), x);
  return static_cast<int>(it - spec.thresholds.begin());
}

QuantizedData quantize_matrix(const CMat& noisy, const QuantizerSpec& spec) {
  QuantizedData out;
  out.spec = spec;
  out.re_idx.resize(noisy.rows(), noisy.cols());
  out.im_idx.resize(noisy.rows(), noisy.cols());
  for (Eigen::Index c = 0; c < noisy.cols(); ++c) {
    for (Eigen::Index r = 0; r < noisy.rows(); ++r) {
      out.re_idx(r, c) = quantize_value(noisy(r, c).real(), spec);
      out.im_idx(r, c) = quantize_value(noisy(r, c).imag(), spec);
    }
  }
  return out;
}

Moments1D mmse_denoise_real(double prior_mean, double prior_var, int cell,
                            const QuantizerSpec& spec, double noise_var) {
  if (!(prior_var > 0)) throw std::invalid_argument("mmse_denoise_real: prior_var <= 0");
  if (!(noise_var > 0)) throw std::invalid_argument("mmse_denoise_real: noise_var <= 0");
  const double lo = spec.cell_lo(cell);
  const double hi = spec.cell_hi(cell);
  const double s2 = prior_var + noise_var;
  const double s = std::sqrt(s2);
  const double alpha = lo == -kInf ? -kInf : (lo - prior_mean) / s;
  const double beta = hi == kInf ? kInf : (hi - prior_mean) / s;
  const StdTruncMoments tm = std_trunc_moments(alpha, beta);
  Moments1D out;
  out.mean = prior_mean + prior_var / s * tm.r;
  out.var = (prior_var * noise_var + prior_var * prior_var * tm.var_u) / s2;
  return out;
}

CMoments mmse_denoise_complex(Complex prior_mean, double prior_var, int re_cell,
                              int im_cell, const QuantizerSpec& spec, double sigma2) {
  const double v0 = 0.5 * prior_var;
  const double nv = 0.5 * sigma2;
  const Moments1D re = mmse_denoise_real(prior_mean.real(), v0, re_cell, spec, nv);
  const Moments1D im = mmse_denoise_real(prior_mean.imag(), v0, im_cell, spec, nv);
  CMoments out;
  out.mean = Complex(re.mean, im.mean);
  out.var = re.var + im.var;
  return out;
}

CMoments mmse_denoise_analog(Complex prior_mean, double prior_var, Complex y,
                             double sigma2) {
  if (!(prior_var > 0) || !(sigma2 > 0))
    throw std::invalid_argument("mmse_denoise_analog: variances must be positive");
  CMoments out;
  out.var = 1.0 / (1.0 / prior_var + 1.0 / sigma2);
  out.mean = out.var * (prior_mean / prior_var + y / sigma2);
  return out;
}

void denoise_matrix(const QuantizedData& data, const CMat& prior_mean,
                    const Mat& prior_var, double sigma2, CMat& post_mean,
                    Mat& post_var, bool parallel) {
  const Eigen::Index m = data.re_idx.rows();
  const Eigen::Index l = data.re_idx.cols();
  if (prior_mean.rows() != m || prior_mean.cols() != l || prior_var.rows() != m ||
      prior_var.cols() != l)
    throw std::invalid_argument("denoise_matrix: dimension mismatch");
  post_mean.resize(m, l);
  post_var.resize(m, l);
  const Eigen::Index total = m * l;
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index idx = 0; idx < total; ++idx) {
    const Eigen::Index r = idx % m;
    const Eigen::Index c = idx / m;
    const CMoments cm =
        mmse_denoise_complex(prior_mean(r, c), prior_var(r, c), data.re_idx(r, c),
                             data.im_idx(r, c), data.spec, sigma2);
    post_mean(r, c) = cm.mean;
    post_var(r, c) = cm.var;
  }
}

}  // namespace qlse
