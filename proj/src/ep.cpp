#include "qlse/ep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qlse {

namespace {

double clip_var(double v) { return std::clamp(v, kVarFloor, kVarCap); }

EstimateResult assemble_result(const MvalseSolver& solver, int outer_iters,
                               std::vector<double> trace, CMat pseudo_mean_first,
                               Mat pseudo_var_first) {
  EstimateResult res;
  const IVec& act = solver.active();
  const int s = static_cast<int>(act.size());
  const int nl = solver.l();
  res.k_hat = s;
  res.theta.resize(s);
  res.w.resize(s, nl);
  res.posteriors.resize(s);
  for (int i = 0; i < s; ++i) {
    res.posteriors[i] = solver.posterior(act[i]);
    res.theta(i) = res.posteriors[i].mu;
  }
  res.cov.resize(nl);
  for (int c = 0; c < nl; ++c) {
    res.cov[c] = solver.weight_cov(c);
    for (int i = 0; i < s; ++i) res.w(i, c) = solver.weights(c)(i);
  }
  res.z_full = solver.reconstruct_full();
  res.rho = solver.rho();
  res.tau = solver.tau();
  res.outer_iters = outer_iters;
  res.trace = Eigen::Map<Vec>(trace.data(), static_cast<Eigen::Index>(trace.size()));
  res.pseudo_mean_first = std::move(pseudo_mean_first);
  res.pseudo_var_first = std::move(pseudo_var_first);
  return res;
}

// Shared outer loop. produce_pseudo(t, pm, pv, za_mean, za_var, prev_pm,
// prev_pv) fills the module-B output for outer iteration t given the signal
// posterior and pseudo observations of the previous iteration (empty at t=1).
template <typename PseudoFn>
EstimateResult outer_loop(PseudoFn&& produce_pseudo, double sigma2,
                          const RowSet& rows, int nl, const EpOptions& opt) {
  if (!(sigma2 > 0)) throw std::invalid_argument("estimator: sigma2 must be positive");
  if (opt.t_outer < 1 || opt.inner_iters < 1 || opt.warm_sweeps < 1)
    throw std::invalid_argument("estimator: iteration caps must be >= 1");
  if (!(opt.damping > 0) || opt.damping > 1)
    throw std::invalid_argument("estimator: damping must be in (0, 1]");
  if (!(opt.init_var > 0))
    throw std::invalid_argument("estimator: init_var must be positive");

  MvalseOptions inner = opt.inner;
  inner.max_sweeps = std::max(inner.max_sweeps, opt.inner_iters);
  MvalseSolver solver(rows, inner);

  const int m = rows.m();
  CMat pseudo_mean(m, nl), prev_pseudo_mean;
  Mat pseudo_var(m, nl), prev_pseudo_var;
  CMat za_mean;  // signal posterior of the previous outer iteration
  Mat za_var;
  CMat pseudo_mean_first;
  Mat pseudo_var_first;
  CMat z_prev = CMat::Zero(rows.n, nl);
  std::vector<double> trace;
  int outer_done = 0;

  for (int t = 1; t <= opt.t_outer; ++t) {
    produce_pseudo(t, pseudo_mean, pseudo_var, za_mean, za_var,
                   prev_pseudo_mean, prev_pseudo_var);
    for (int c = 0; c < nl; ++c)
      for (int i = 0; i < m; ++i) pseudo_var(i, c) = clip_var(pseudo_var(i, c));
    if (t > 1 && opt.damping < 1.0) {
      pseudo_mean = opt.damping * pseudo_mean + (1.0 - opt.damping) * prev_pseudo_mean;
      pseudo_var = opt.damping * pseudo_var + (1.0 - opt.damping) * prev_pseudo_var;
    }
    prev_pseudo_mean = pseudo_mean;
    prev_pseudo_var = pseudo_var;
    if (t == 1) {
      pseudo_mean_first = pseudo_mean;
      pseudo_var_first = pseudo_var;
    }

    solver.set_data(pseudo_mean, pseudo_var);
    if (t == 1) solver.init_noncoherent();
    // The cold start solves to the inner stopping criterion; warm restarts
    // take a bounded number of sweeps so the support tracks the slowly
    // refining pseudo observations instead of overfitting each intermediate
    // set.
    solver.run(t == 1 ? opt.inner_iters : opt.warm_sweeps);

    solver.signal_posterior(za_mean, za_var);
    for (int c = 0; c < nl; ++c)
      for (int i = 0; i < m; ++i) za_var(i, c) = clip_var(za_var(i, c));

    const CMat z_full = solver.reconstruct_full();
    const double denom = std::max(z_prev.norm(), 1e-300);
    const double rel = (z_full - z_prev).norm() / denom;
    trace.push_back(rel);
    z_prev = z_full;
    outer_done = t;
    if (t >= 2 && rel < opt.tol) break;
  }
  return assemble_result(solver, outer_done, std::move(trace),
                         std::move(pseudo_mean_first), std::move(pseudo_var_first));
}

}  // namespace

std::pair<Complex, double> extrinsic(Complex post_mean, double post_var,
                                     Complex cav_mean, double cav_var) {
  if (!(post_var > 0) || !(cav_var > 0))
    throw std::invalid_argument("extrinsic: variances must be positive");
  const double prec = 1.0 / post_var - 1.0 / cav_var;
  double v = prec > 0 ? 1.0 / prec : kVarCap;
  v = clip_var(v);
  const Complex mean = v * (post_mean / post_var - cav_mean / cav_var);
  return {mean, v};
}

EstimateResult run_mvalse_ep(const QuantizedData& data, double sigma2,
                             const RowSet& rows, const EpOptions& opt) {
  const int m = static_cast<int>(data.re_idx.rows());
  const int nl = static_cast<int>(data.re_idx.cols());
  if (m != rows.m())
    throw std::invalid_argument("run_mvalse_ep: data rows do not match observation set");
  if (data.im_idx.rows() != m || data.im_idx.cols() != nl)
    throw std::invalid_argument("run_mvalse_ep: real/imag index shape mismatch");

  // Solver-side extrinsic, the denoiser prior at the first iteration.
  CMat ext_mean = CMat::Zero(m, nl);
  Mat ext_var = Mat::Constant(m, nl, opt.init_var);

  auto produce = [&](int t, CMat& pm, Mat& pv, const CMat& za_mean,
                     const Mat& za_var, const CMat& prev_pm, const Mat& prev_pv) {
    if (t > 1) {
      // Refresh the solver-side extrinsic: posterior divided by the pseudo
      // observations it was produced from.
      for (int c = 0; c < nl; ++c)
        for (int i = 0; i < m; ++i) {
          auto [mean, var] = extrinsic(za_mean(i, c), za_var(i, c),
                                       prev_pm(i, c), prev_pv(i, c));
          if (opt.damping < 1.0) {
            mean = opt.damping * mean + (1.0 - opt.damping) * ext_mean(i, c);
            var = opt.damping * var + (1.0 - opt.damping) * ext_var(i, c);
          }
          ext_mean(i, c) = mean;
          ext_var(i, c) = var;
        }
    }
    CMat post_mean;
    Mat post_var;
    denoise_matrix(data, ext_mean, ext_var, sigma2, post_mean, post_var,
                   opt.parallel_denoise);
    pm.resize(m, nl);
    pv.resize(m, nl);
    for (int c = 0; c < nl; ++c)
      for (int i = 0; i < m; ++i) {
        const double pvar = clip_var(post_var(i, c));
        auto [mean, var] =
            extrinsic(post_mean(i, c), pvar, ext_mean(i, c), ext_var(i, c));
        pm(i, c) = mean;
        pv(i, c) = var;
      }
  };
  return outer_loop(produce, sigma2, rows, nl, opt);
}

EstimateResult run_mvalse_ep(const CMat& analog_y, double sigma2,
                             const RowSet& rows, const EpOptions& opt) {
  // Infinite resolution: the denoiser posterior is the exact Gaussian product,
  // whose extrinsic against the solver-side message is (y, sigma2) identically.
  return run_mvalse(analog_y, sigma2, rows, opt);
}

EstimateResult run_mvalse(const CMat& y, double sigma2, const RowSet& rows,
                          const EpOptions& opt) {
  if (y.rows() != rows.m())
    throw std::invalid_argument("run_mvalse: data rows do not match observation set");
  const int nl = static_cast<int>(y.cols());
  if (nl < 1) throw std::invalid_argument("run_mvalse: need at least one snapshot");
  auto produce = [&](int, CMat& pm, Mat& pv, const CMat&, const Mat&,
                     const CMat&, const Mat&) {
    pm = y;
    pv.setConstant(sigma2);
  };
  return outer_loop(produce, sigma2, rows, nl, opt);
}

}  // namespace qlse
