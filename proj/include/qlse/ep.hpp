#pragma once

#include <utility>

#include "qlse/mvalse.hpp"
#include "qlse/quantizer.hpp"
#include "qlse/types.hpp"

namespace qlse {

struct EpOptions {
  int t_outer = 120;           // outer iteration cap
  int inner_iters = 500;       // sweep cap for the initial cold solve
  int warm_sweeps = 1;         // sweep cap per subsequent warm-started outer iteration
  double tol = 1e-6;           // relative reconstruction-change stop
  double damping = 1.0;        // 1 = undamped extrinsic updates
  // Initial prior variance handed to the quantization denoiser. Keep it within
  // roughly an order of magnitude of the per-sample signal power: a far larger
  // value makes the first pseudo observations overshoot the true scale, which
  // one-bit data (scale-blind except through sign-flip rates) cannot pull back.
  double init_var = 10.0;
  bool parallel_denoise = false;
  MvalseOptions inner;
};

struct EstimateResult {
  int k_hat = 0;
  Vec theta;                      // estimated frequencies, ascending slot order
  CMat w;                         // k_hat x l posterior-mean amplitudes
  std::vector<CMat> cov;          // per-snapshot weight covariance
  CMat z_full;                    // n x l reconstructed line spectrum
  std::vector<FreqPosterior> posteriors;
  double rho = 0;
  double tau = 0;
  int outer_iters = 0;
  Vec trace;                      // relative change per outer iteration
  CMat pseudo_mean_first;         // pseudo observations after outer iteration 1
  Mat pseudo_var_first;
};

// Extrinsic (cavity-removed) Gaussian of a posterior (mean, var) given the
// cavity (mean, var). Nonpositive precision differences clamp the variance to
// the cap; results are kept inside [var_floor, var_cap] and the mean is formed
// with the clamped variance.
std::pair<Complex, double> extrinsic(Complex post_mean, double post_var,
                                     Complex cav_mean, double cav_var);

// Quantized measurements: expectation-propagation outer loop around the
// variational line-spectrum solver.
EstimateResult run_mvalse_ep(const QuantizedData& data, double sigma2,
                             const RowSet& rows, const EpOptions& opt = {});

// Analog (infinite-resolution) measurements: the componentwise denoiser
// reduces exactly to the identity, so the pseudo observations are (y, sigma2)
// at every outer iteration.
EstimateResult run_mvalse_ep(const CMat& analog_y, double sigma2,
                             const RowSet& rows, const EpOptions& opt = {});

// Standalone solver on unquantized data; identical trajectory to the analog
// overload above (shared driver, no quantization bookkeeping).
EstimateResult run_mvalse(const CMat& y, double sigma2, const RowSet& rows,
                          const EpOptions& opt = {});

}  // namespace qlse
