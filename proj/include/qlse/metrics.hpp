#pragma once

#include "qlse/types.hpp"

namespace qlse {

// 20*log10(||z_hat - z_ref||_F / ||z_ref||_F), clamped below at -300 dB.
// Throws if the reference is identically zero.
double nmse_db(const CMat& z_hat, const CMat& z_ref);

// Debiased reconstruction error on the amplitude scale:
// 10*log10(min_c ||z_ref - c*z_hat||_F / ||z_ref||_F), with a single complex
// scalar c (or one scalar per row when per_row is set). A zero z_hat gives
// 0 dB. Clamped below at -300 dB.
double dnmse_db(const CMat& z_hat, const CMat& z_ref, bool per_row = false);

// Minimal-total-cost assignment (square cost matrix); returns perm with
// row i matched to column perm[i]. O(n^3) shortest augmenting path method.
std::vector<int> min_cost_assignment(const Mat& cost);

struct FreqMatch {
  std::vector<int> perm;  // perm[j] = index in theta_hat matched to truth j
  Vec residual;           // wrap-around residuals theta_hat[perm[j]] - theta_ref[j]
  double mse_db = 0;      // 20*log10(||residual||_2), clamped at -300
};

// Matches equal-length frequency sets by minimal total wrap-around distance
// (exhaustive for k <= 6, assignment solver beyond) and reports residuals.
FreqMatch match_frequencies(const Vec& theta_hat, const Vec& theta_ref);

}  // namespace qlse
