#pragma once

#include <memory>

#include "qlse/freq_grid.hpp"
#include "qlse/types.hpp"

namespace qlse {

struct MvalseOptions {
  int max_sweeps = 500;        // cap on inner coordinate-ascent sweeps
  double weight_tol = 1e-6;    // relative weight-norm change for early stop
  int flip_budget_factor = 4;  // per-sweep support flips <= factor * n
  double tau_floor = 1e-12;
};

// Variational solver for the pseudo unquantized model
//   y_l = A(theta) w_l + noise_l,  noise_l ~ CN(0, diag(pseudo_var(:,l))),
// with a Bernoulli-Gaussian prior (rho, tau) on the weights and independent
// frequency posteriors held as trigonometric moment vectors. The support is
// grown/shrunk greedily by exact rank-one updates of the weight posterior.
//
// All state persists across run() calls so an outer loop can warm-start the
// solver on refreshed data via set_data().
class MvalseSolver {
 public:
  MvalseSolver(const RowSet& rows, MvalseOptions opt = {});

  // Installs pseudo observations (m x l). Variances must be strictly positive.
  void set_data(const CMat& pseudo_mean, const Mat& pseudo_var);

  // Spectral initialization from the current data: sequentially peels
  // ceil(n/2) candidate components off autocorrelation lag estimates. The
  // support starts empty; rho = 1/2; tau from the per-entry data power.
  void init_noncoherent();

  // Runs coordinate-ascent sweeps until the support is stable and the weight
  // norm has converged, or max_sweeps is hit. Returns sweeps executed.
  int run(int max_sweeps);

  // --- individual steps, public so tests can drive them directly ---
  void refresh_weights();          // rebuild J/h caches and the weight posterior
  double delta_activate(int k) const;    // log-evidence gain of adding slot k
  double delta_deactivate(int k) const;  // log-evidence gain of removing slot k
  void apply_flip(int k);                // rank-one support toggle
  int greedy_support_pass();             // budgeted best-first flips
  void update_hyperparams();             // rho (clamped), tau (floored)
  void update_frequency(int k);          // refresh posterior of active slot k
  void frequency_pass();                 // all active slots, ascending
  // Full n x n matched-filter matrices and right-hand sides, one per snapshot
  // (diagonal entries carry the exact second moment tr(Sigma_l^{-1})).
  void compute_J_h(std::vector<CMat>& j_full, std::vector<CVec>& h_full) const;

  // --- outputs ---
  // Posterior mean/variance of the noiseless signal over the observed rows.
  void signal_posterior(CMat& mean, Mat& var) const;
  CMat reconstruct_full() const;  // n x l from active posteriors

  int n() const { return rows_.n; }
  int m() const { return rows_.m(); }
  int l() const { return static_cast<int>(inv_var_.cols()); }
  const IVec& active() const { return active_; }
  bool is_active(int k) const;
  const FreqPosterior& posterior(int k) const { return post_[k]; }
  const CVec& weights(int snapshot) const { return w_[snapshot]; }
  const CMat& weight_cov(int snapshot) const { return c_[snapshot]; }
  double rho() const { return rho_; }
  double tau() const { return tau_; }
  double weight_norm() const;
  int sweeps_done() const { return sweeps_done_; }

 private:
  int active_pos(int k) const;  // position of slot k inside active_, or -1
  void rebuild_jrow_row(int pos);

  RowSet rows_;
  MvalseOptions opt_;
  std::shared_ptr<FreqGrid> grid_;

  CMat y_;        // pseudo means, m x l
  Mat inv_var_;   // 1 / pseudo variances, m x l
  Vec tr_inv_;    // column sums of inv_var_
  bool has_data_ = false;
  bool has_state_ = false;

  std::vector<FreqPosterior> post_;  // length n
  CMat a_obs_;                       // m x n moment-steering cache
  IVec active_;                      // ascending slot indices
  std::vector<CVec> w_;              // per snapshot, |S|
  std::vector<CMat> c_;              // per snapshot, |S| x |S|
  std::vector<CMat> jrow_;           // per snapshot, |S| x n slice of J
  CMat h_;                           // n x l right-hand sides
  double rho_ = 0.5;
  double tau_ = 1.0;
  int sweeps_done_ = 0;
};

}  // namespace qlse
