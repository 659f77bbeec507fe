#include "qlse/mvalse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qlse {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTiny = 1e-300;
}  // namespace

MvalseSolver::MvalseSolver(const RowSet& rows, MvalseOptions opt)
    : rows_(rows), opt_(opt) {
  rows_.validate();
  grid_ = std::make_shared<FreqGrid>(rows_.n);
}

void MvalseSolver::set_data(const CMat& pseudo_mean, const Mat& pseudo_var) {
  if (pseudo_mean.rows() != rows_.m() || pseudo_var.rows() != rows_.m() ||
      pseudo_mean.cols() != pseudo_var.cols() || pseudo_mean.cols() < 1)
    throw std::invalid_argument("MvalseSolver: pseudo observation shape mismatch");
  if (!(pseudo_var.minCoeff() > 0))
    throw std::invalid_argument("MvalseSolver: pseudo variances must be positive");
  y_ = pseudo_mean;
  inv_var_ = pseudo_var.cwiseInverse();
  tr_inv_ = inv_var_.colwise().sum();
  has_data_ = true;
}

void MvalseSolver::init_noncoherent() {
  if (!has_data_) throw std::logic_error("MvalseSolver: set_data before init");
  const int n = rows_.n;
  const int m = rows_.m();
  const int nl = l();

  post_.assign(n, FreqPosterior{});
  for (auto& p : post_) {
    p.moments = CVec::Zero(n);
    p.moments(0) = Complex(1, 0);
  }
  active_.clear();
  w_.assign(nl, CVec());
  c_.assign(nl, CMat());
  jrow_.assign(nl, CMat());
  rho_ = 0.5;
  const double power = y_.squaredNorm() / (m * nl);
  tau_ = std::max(power / (rho_ * n), opt_.tau_floor);
  sweeps_done_ = 0;

  // Sequentially peel candidates off tapered autocorrelation lag estimates.
  const int n_init = (n + 1) / 2;
  CMat resid = y_;
  std::vector<int> lag_count(n, 0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const int lag = rows_.rows[i] - rows_.rows[j];
      if (lag >= 1 && lag < n) ++lag_count[lag];
    }
  for (int cand = 0; cand < n_init; ++cand) {
    CVec lag_sum = CVec::Zero(n);
    for (int c = 0; c < nl; ++c)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          const int lag = rows_.rows[i] - rows_.rows[j];
          if (lag >= 1 && lag < n) lag_sum(lag) += resid(i, c) * std::conj(resid(j, c));
        }
    std::vector<std::pair<int, Complex>> coeffs;
    for (int q = 1; q < n; ++q)
      if (lag_count[q] > 0)
        coeffs.emplace_back(q, std::conj(lag_sum(q)) / (double(nl) * lag_count[q]));
    post_[cand] = FreqGrid::posterior_from_moments(grid_->moments_from_log_coeffs(coeffs));
    // Weighted least-squares amplitude per snapshot, then peel.
    CVec a(m);
    for (int i = 0; i < m; ++i) a(i) = post_[cand].moments(rows_.rows[i]);
    for (int c = 0; c < nl; ++c) {
      double den = 0;
      Complex num(0, 0);
      for (int i = 0; i < m; ++i) {
        den += inv_var_(i, c) * std::norm(a(i));
        num += inv_var_(i, c) * std::conj(a(i)) * resid(i, c);
      }
      const Complex wls = den > kTiny ? num / den : Complex(0, 0);
      resid.col(c) -= a * wls;
    }
  }

  a_obs_.resize(m, n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < m; ++i) a_obs_(i, k) = post_[k].moments(rows_.rows[i]);
  h_.resize(n, nl);
  has_state_ = true;
}

bool MvalseSolver::is_active(int k) const { return active_pos(k) >= 0; }

int MvalseSolver::active_pos(int k) const {
  auto it = std::lower_bound(active_.begin(), active_.end(), k);
  if (it != active_.end() && *it == k) return static_cast<int>(it - active_.begin());
  return -1;
}

void MvalseSolver::refresh_weights() {
  if (!has_state_) throw std::logic_error("MvalseSolver: not initialized");
  const int nl = l();
  const int s = static_cast<int>(active_.size());
  for (int c = 0; c < nl; ++c) {
    // Right-hand sides over all slots (candidates included).
    const CVec iv = inv_var_.col(c).cast<Complex>();
    h_.col(c) = a_obs_.adjoint() * iv.cwiseProduct(y_.col(c));
    if (s == 0) {
      jrow_[c].resize(0, rows_.n);
      c_[c].resize(0, 0);
      w_[c].resize(0);
      continue;
    }
    CMat a_act(rows_.m(), s);
    for (int i = 0; i < s; ++i)
      a_act.col(i) = iv.cwiseProduct(a_obs_.col(active_[i]));
    jrow_[c] = a_act.adjoint() * a_obs_;
    for (int i = 0; i < s; ++i) jrow_[c](i, active_[i]) = tr_inv_(c);
    CMat j_act(s, s);
    for (int i = 0; i < s; ++i) j_act.col(i) = jrow_[c].col(active_[i]);
    j_act.diagonal().array() += 1.0 / tau_;
    j_act = 0.5 * (j_act + j_act.adjoint()).eval();
    Eigen::LDLT<CMat> ldlt(j_act);
    c_[c] = ldlt.solve(CMat::Identity(s, s));
    c_[c] = 0.5 * (c_[c] + c_[c].adjoint()).eval();
    CVec h_act(s);
    for (int i = 0; i < s; ++i) h_act(i) = h_(active_[i], c);
    w_[c] = c_[c] * h_act;
  }
}

double MvalseSolver::delta_activate(int k) const {
  if (is_active(k)) throw std::logic_error("delta_activate: slot already active");
  const int nl = l();
  const int s = static_cast<int>(active_.size());
  double total = std::log(rho_ / (1.0 - rho_));
  for (int c = 0; c < nl; ++c) {
    double quad = 0;
    Complex cross(0, 0);
    if (s > 0) {
      const CVec j = jrow_[c].col(k);
      const CVec cj = c_[c] * j;
      quad = std::real(j.dot(cj));  // j^H C j
      cross = j.dot(w_[c]);         // j^H w
    }
    const double denom = tr_inv_(c) + 1.0 / tau_ - quad;
    if (!(denom > kTiny)) return kNegInf;
    const double v = 1.0 / denom;
    const Complex u = v * (h_(k, c) - cross);
    total += std::log(v / tau_) + std::norm(u) / v;
  }
  return total;
}

double MvalseSolver::delta_deactivate(int k) const {
  const int p = active_pos(k);
  if (p < 0) throw std::logic_error("delta_deactivate: slot not active");
  const int nl = l();
  double total = -std::log(rho_ / (1.0 - rho_));
  for (int c = 0; c < nl; ++c) {
    const double cpp = std::max(std::real(c_[c](p, p)), kTiny);
    total += -std::log(cpp / tau_) - std::norm(w_[c](p)) / cpp;
  }
  return total;
}

void MvalseSolver::rebuild_jrow_row(int pos) {
  const int k = active_[pos];
  const int nl = l();
  for (int c = 0; c < nl; ++c) {
    const CVec da =
        inv_var_.col(c).cast<Complex>().cwiseProduct(a_obs_.col(k));
    jrow_[c].row(pos) = da.adjoint() * a_obs_;
    jrow_[c](pos, k) = tr_inv_(c);
  }
}

void MvalseSolver::apply_flip(int k) {
  const int nl = l();
  const int p = active_pos(k);
  if (p < 0) {
    // Activate: exact rank-one growth of the weight posterior.
    const int s = static_cast<int>(active_.size());
    const int ins = static_cast<int>(
        std::lower_bound(active_.begin(), active_.end(), k) - active_.begin());
    for (int c = 0; c < nl; ++c) {
      CVec j(s), cj(s);
      double quad = 0;
      Complex cross(0, 0);
      if (s > 0) {
        j = jrow_[c].col(k);
        cj = c_[c] * j;
        quad = std::real(j.dot(cj));
        cross = j.dot(w_[c]);
      }
      const double denom = tr_inv_(c) + 1.0 / tau_ - quad;
      const double v = denom > kTiny ? 1.0 / denom : 1.0 / kTiny;
      const Complex u = v * (h_(k, c) - cross);

      CMat cnew(s + 1, s + 1);
      CVec wnew(s + 1);
      for (int i = 0; i < s; ++i) {
        const int ii = i < ins ? i : i + 1;
        wnew(ii) = w_[c](i) - u * cj(i);
        for (int q = 0; q < s; ++q) {
          const int qq = q < ins ? q : q + 1;
          cnew(ii, qq) = c_[c](i, q) + v * cj(i) * std::conj(cj(q));
        }
        cnew(ii, ins) = -v * cj(i);
        cnew(ins, ii) = -v * std::conj(cj(i));
      }
      cnew(ins, ins) = v;
      wnew(ins) = u;
      c_[c] = 0.5 * (cnew + cnew.adjoint()).eval();
      w_[c] = wnew;
      // Grow the J slice: insert the row for the new slot.
      CMat jr(s + 1, rows_.n);
      for (int i = 0; i < s; ++i) jr.row(i < ins ? i : i + 1) = jrow_[c].row(i);
      jrow_[c] = jr;
    }
    active_.insert(active_.begin() + ins, k);
    rebuild_jrow_row(ins);
  } else {
    // Deactivate: Schur-complement shrink.
    const int s = static_cast<int>(active_.size());
    for (int c = 0; c < nl; ++c) {
      const double cpp = std::max(std::real(c_[c](p, p)), kTiny);
      CVec col(s - 1);
      CVec wm(s - 1);
      CMat cm(s - 1, s - 1);
      for (int i = 0, ii = 0; i < s; ++i) {
        if (i == p) continue;
        col(ii) = c_[c](i, p);
        wm(ii) = w_[c](i);
        ++ii;
      }
      for (int i = 0, ii = 0; i < s; ++i) {
        if (i == p) continue;
        for (int q = 0, qq = 0; q < s; ++q) {
          if (q == p) continue;
          cm(ii, qq) = c_[c](i, q) - col(ii) * std::conj(col(qq)) / cpp;
          ++qq;
        }
        ++ii;
      }
      const Complex wp = w_[c](p);
      for (int i = 0; i < s - 1; ++i) wm(i) -= wp / cpp * col(i);
      c_[c] = 0.5 * (cm + cm.adjoint()).eval();
      w_[c] = wm;
      CMat jr(s - 1, rows_.n);
      for (int i = 0, ii = 0; i < s; ++i) {
        if (i == p) continue;
        jr.row(ii++) = jrow_[c].row(i);
      }
      jrow_[c] = jr;
    }
    active_.erase(active_.begin() + p);
  }
}

int MvalseSolver::greedy_support_pass() {
  const int n = rows_.n;
  const int budget = opt_.flip_budget_factor * n;
  int flips = 0;
  while (flips < budget) {
    double best = 0;
    int best_k = -1;
    for (int k = 0; k < n; ++k) {
      const double d = is_active(k) ? delta_deactivate(k) : delta_activate(k);
      // Strict > keeps the lowest index on ties; best starts at 0 so only
      // strictly improving flips are considered.
      if (d > best) {
        best = d;
        best_k = k;
      }
    }
    if (best_k < 0) break;
    apply_flip(best_k);
    ++flips;
  }
  return flips;
}

void MvalseSolver::update_hyperparams() {
  const int n = rows_.n;
  const int nl = l();
  const int s = static_cast<int>(active_.size());
  rho_ = std::clamp(static_cast<double>(s) / n, 1.0 / n, 1.0 - 1.0 / n);
  if (s > 0) {
    double acc = 0;
    for (int c = 0; c < nl; ++c)
      acc += w_[c].squaredNorm() + std::real(c_[c].trace());
    tau_ = std::max(acc / (static_cast<double>(nl) * s), opt_.tau_floor);
  }
}

void MvalseSolver::update_frequency(int k) {
  const int p = active_pos(k);
  if (p < 0) throw std::logic_error("update_frequency: slot not active");
  const int m = rows_.m();
  const int nl = l();
  const int s = static_cast<int>(active_.size());
  CMat a_act(m, s);
  for (int i = 0; i < s; ++i) a_act.col(i) = a_obs_.col(active_[i]);
  CVec eta = CVec::Zero(m);
  for (int c = 0; c < nl; ++c) {
    const CVec resid = y_.col(c) - a_act * w_[c];
    const CVec ccol = a_act * c_[c].col(p);
    const Complex wk = w_[c](p);
    const double cpp = std::real(c_[c](p, p));
    for (int i = 0; i < m; ++i) {
      const Complex self = a_obs_(i, k);
      const Complex term =
          (resid(i) + self * wk) * std::conj(wk) - (ccol(i) - self * cpp);
      eta(i) += 2.0 * inv_var_(i, c) * term;
    }
  }
  // Overflowed residual statistics would poison the angular density; keep the
  // previous posterior for this component instead of propagating non-finite
  // coefficients into the grid transform.
  if (!eta.allFinite()) return;
  std::vector<std::pair<int, Complex>> coeffs;
  coeffs.reserve(m);
  for (int i = 0; i < m; ++i)
    coeffs.emplace_back(rows_.rows[i], std::conj(eta(i)));
  post_[k] = FreqGrid::posterior_from_moments(grid_->moments_from_log_coeffs(coeffs));
  for (int i = 0; i < m; ++i) a_obs_(i, k) = post_[k].moments(rows_.rows[i]);
}

void MvalseSolver::frequency_pass() {
  const IVec snapshot = active_;
  for (int k : snapshot) update_frequency(k);
}

void MvalseSolver::compute_J_h(std::vector<CMat>& j_full, std::vector<CVec>& h_full) const {
  if (!has_state_) throw std::logic_error("MvalseSolver: not initialized");
  const int n = rows_.n;
  const int nl = l();
  j_full.assign(nl, CMat());
  h_full.assign(nl, CVec());
  for (int c = 0; c < nl; ++c) {
    const CVec iv = inv_var_.col(c).cast<Complex>();
    CMat scaled(rows_.m(), n);
    for (int k = 0; k < n; ++k) scaled.col(k) = iv.cwiseProduct(a_obs_.col(k));
    j_full[c] = a_obs_.adjoint() * scaled;
    for (int k = 0; k < n; ++k) j_full[c](k, k) = tr_inv_(c);
    h_full[c] = a_obs_.adjoint() * iv.cwiseProduct(y_.col(c));
  }
}

double MvalseSolver::weight_norm() const {
  double acc = 0;
  for (const auto& w : w_) acc += w.norm();
  return acc;
}

int MvalseSolver::run(int max_sweeps) {
  if (!has_state_) throw std::logic_error("MvalseSolver: initialize before run");
  const int cap = std::min(max_sweeps, opt_.max_sweeps);
  double prev_norm = weight_norm();
  int done = 0;
  for (int sweep = 0; sweep < cap; ++sweep) {
    const IVec support_before = active_;
    refresh_weights();
    greedy_support_pass();
    update_hyperparams();
    frequency_pass();
    ++sweeps_done_;
    ++done;
    const double nw = weight_norm();
    const double rel = std::abs(nw - prev_norm) / std::max(prev_norm, kTiny);
    const bool support_stable = support_before == active_;
    prev_norm = nw;
    if (support_stable && rel < opt_.weight_tol) break;
  }
  return done;
}

void MvalseSolver::signal_posterior(CMat& mean, Mat& var) const {
  const int m = rows_.m();
  const int nl = l();
  const int s = static_cast<int>(active_.size());
  mean.resize(m, nl);
  var.resize(m, nl);
  if (s == 0) {
    mean.setZero();
    var.setZero();
    return;
  }
  CMat a_act(m, s);
  for (int i = 0; i < s; ++i) a_act.col(i) = a_obs_.col(active_[i]);
  for (int c = 0; c < nl; ++c) {
    mean.col(c) = a_act * w_[c];
    const CMat ac = a_act * c_[c];
    for (int i = 0; i < m; ++i) {
      // (A C A^H)_{ii} = sum_q (AC)_{iq} conj(A_{iq}), real for Hermitian C.
      double v = std::real(ac.row(i).dot(a_act.row(i)));
      // Add the moment-deficit term for each component.
      for (int q = 0; q < s; ++q) {
        const double gap = 1.0 - std::norm(a_act(i, q));
        v += gap * (std::norm(w_[c](q)) + std::real(c_[c](q, q)));
      }
      var(i, c) = std::max(v, 0.0);
    }
  }
}

CMat MvalseSolver::reconstruct_full() const {
  const int n = rows_.n;
  const int nl = l();
  const int s = static_cast<int>(active_.size());
  CMat z = CMat::Zero(n, nl);
  if (s == 0) return z;
  CMat a_full(n, s);
  for (int i = 0; i < s; ++i) a_full.col(i) = post_[active_[i]].moments.head(n);
  for (int c = 0; c < nl; ++c) z.col(c) = a_full * w_[c];
  return z;
}

}  // namespace qlse
