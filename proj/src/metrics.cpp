#include "qlse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qlse {

namespace {
constexpr double kDbFloor = -300.0;

double ratio_db(double num, double den, double scale) {
  if (num <= 0) return kDbFloor;
  return std::max(scale * std::log10(num / den), kDbFloor);
}
}  // namespace

double nmse_db(const CMat& z_hat, const CMat& z_ref) {
  if (z_hat.rows() != z_ref.rows() || z_hat.cols() != z_ref.cols())
    throw std::invalid_argument("nmse_db: shape mismatch");
  const double den = z_ref.norm();
  if (!(den > 0)) throw std::invalid_argument("nmse_db: zero reference");
  return ratio_db((z_hat - z_ref).norm(), den, 20.0);
}

double dnmse_db(const CMat& z_hat, const CMat& z_ref, bool per_row) {
  if (z_hat.rows() != z_ref.rows() || z_hat.cols() != z_ref.cols())
    throw std::invalid_argument("dnmse_db: shape mismatch");
  const double den = z_ref.norm();
  if (!(den > 0)) throw std::invalid_argument("dnmse_db: zero reference");
  CMat scaled = z_hat;
  if (per_row) {
    for (Eigen::Index r = 0; r < z_hat.rows(); ++r) {
      const double hn = z_hat.row(r).squaredNorm();
      const Complex c = hn > 0 ? Complex(z_hat.row(r).conjugate().cwiseProduct(z_ref.row(r)).sum()) / hn
                               : Complex(0, 0);
      scaled.row(r) = c * z_hat.row(r);
    }
  } else {
    const double hn = z_hat.squaredNorm();
    const Complex c = hn > 0 ? Complex(z_hat.conjugate().cwiseProduct(z_ref).sum()) / hn
                             : Complex(0, 0);
    scaled = c * z_hat;
  }
  return ratio_db((z_ref - scaled).norm(), den, 10.0);
}

std::vector<int> min_cost_assignment(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n || n == 0)
    throw std::invalid_argument("min_cost_assignment: square nonempty cost required");
  // Shortest-augmenting-path assignment with potentials (1-based scratch).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> perm(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) perm[p[j] - 1] = j - 1;
  return perm;
}

FreqMatch match_frequencies(const Vec& theta_hat, const Vec& theta_ref) {
  const int k = static_cast<int>(theta_ref.size());
  if (theta_hat.size() != k || k == 0)
    throw std::invalid_argument("match_frequencies: equal nonzero sizes required");
  Mat cost(k, k);  // cost(j, i): truth j against estimate i
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      cost(j, i) = std::abs(wrap_angle(theta_hat(i) - theta_ref(j)));

  FreqMatch out;
  out.perm.assign(k, -1);
  if (k <= 6) {
    std::vector<int> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_perm = idx;
    do {
      double total = 0;
      for (int j = 0; j < k; ++j) total += cost(j, idx[j]);
      if (total < best) {
        best = total;
        best_perm = idx;
      }
    } while (std::next_permutation(idx.begin(), idx.end()));
    out.perm = best_perm;
  } else {
    out.perm = min_cost_assignment(cost);
  }
  out.residual.resize(k);
  for (int j = 0; j < k; ++j)
    out.residual(j) = wrap_angle(theta_hat(out.perm[j]) - theta_ref(j));
  const double norm = out.residual.norm();
  out.mse_db = norm > 0 ? std::max(20.0 * std::log10(norm), kDbFloor) : kDbFloor;
  return out;
}

}  // namespace qlse
