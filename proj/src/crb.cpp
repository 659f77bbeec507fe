#include "qlse/crb.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qlse/normal.hpp"

namespace qlse {

void FisherParams::validate() const {
  if (theta.size() < 1) throw std::invalid_argument("FisherParams: empty theta");
  if (g.rows() != theta.size() || phi.rows() != theta.size() || g.cols() != phi.cols() ||
      g.cols() < 1)
    throw std::invalid_argument("FisherParams: shape mismatch");
  if (!(g.minCoeff() > 0))
    throw std::invalid_argument("FisherParams: magnitudes must be positive");
}

Complex z_entry(const FisherParams& p, int m_value, int snapshot) {
  Complex z(0, 0);
  for (int k = 0; k < p.k(); ++k) {
    const double ph = m_value * p.theta(k) + p.phi(k, snapshot);
    z += p.g(k, snapshot) * Complex(std::cos(ph), std::sin(ph));
  }
  return z;
}

void z_partials(const FisherParams& p, int m_value, int snapshot, Vec& d_re,
                Vec& d_im) {
  const int k = p.k();
  const int l = p.l();
  d_re = Vec::Zero(p.dim());
  d_im = Vec::Zero(p.dim());
  for (int q = 0; q < k; ++q) {
    const double ph = m_value * p.theta(q) + p.phi(q, snapshot);
    const double c = std::cos(ph);
    const double s = std::sin(ph);
    const double g = p.g(q, snapshot);
    d_re(q) = -m_value * s * g;
    d_im(q) = m_value * c * g;
    const int gi = k + snapshot * k + q;
    d_re(gi) = c;
    d_im(gi) = s;
    const int pi = k + l * k + snapshot * k + q;
    d_re(pi) = -s * g;
    d_im(pi) = c * g;
  }
}

std::pair<double, double> lambda_chi(Complex z, double sigma2,
                                     const QuantizerSpec& spec) {
  if (!(sigma2 > 0)) throw std::invalid_argument("lambda_chi: sigma2 must be positive");
  const double scale = std::sqrt(2.0) / std::sqrt(sigma2);  // 1/(sigma/sqrt(2))
  auto accum = [&](double part) {
    double acc = 0;
    for (int cell = 0; cell < spec.num_cells(); ++cell) {
      const double lo = spec.cell_lo(cell);
      const double hi = spec.cell_hi(cell);
      const double a = lo == -kInf ? -kInf : (lo - part) * scale;
      const double b = hi == kInf ? kInf : (hi - part) * scale;
      acc += std_trunc_moments(a, b).lambda_term;
    }
    return 2.0 / sigma2 * acc;
  };
  return {accum(z.real()), accum(z.imag())};
}

namespace {

template <typename WeightFn>
Mat fim_accumulate(const FisherParams& p, const RowSet& rows, WeightFn&& weights,
                   bool parallel) {
  p.validate();
  rows.validate();
  const int dim = p.dim();
  const int m = rows.m();
  const int l = p.l();
  std::vector<Mat> slot(m);
  // Per-row contributions are independent; the final reduction below runs in
  // row order so parallel and serial paths produce identical bits.
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < m; ++i) {
    const int mv = rows.rows[i];
    Mat acc = Mat::Zero(dim, dim);
    Vec d_re, d_im;
    for (int c = 0; c < l; ++c) {
      const Complex z = z_entry(p, mv, c);
      const auto [lam, chi] = weights(z);
      z_partials(p, mv, c, d_re, d_im);
      acc.noalias() += lam * (d_re * d_re.transpose());
      acc.noalias() += chi * (d_im * d_im.transpose());
    }
    slot[i] = std::move(acc);
  }
  Mat fim = Mat::Zero(dim, dim);
  for (int i = 0; i < m; ++i) fim += slot[i];
  return fim;
}

}  // namespace

Mat fim_quantized(const FisherParams& p, const RowSet& rows, double sigma2,
                  const QuantizerSpec& spec, bool parallel) {
  return fim_accumulate(
      p, rows, [&](Complex z) { return lambda_chi(z, sigma2, spec); }, parallel);
}

Mat fim_unquantized(const FisherParams& p, const RowSet& rows, double sigma2,
                    bool parallel) {
  if (!(sigma2 > 0)) throw std::invalid_argument("fim_unquantized: sigma2 must be positive");
  const double w = 2.0 / sigma2;
  return fim_accumulate(
      p, rows, [&](Complex) { return std::pair<double, double>{w, w}; }, parallel);
}

CrbResult crb_frequencies(const Mat& fim, int k) {
  if (fim.rows() != fim.cols() || fim.rows() < k || k < 1)
    throw std::invalid_argument("crb_frequencies: bad dimensions");
  const Mat sym = 0.5 * (fim + fim.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("crb_frequencies: eigendecomposition failed");
  const Vec& ev = eig.eigenvalues();
  const double emax = ev(ev.size() - 1);
  const double emin = ev(0);
  if (!(emax > 0) || emin <= emax * 1e-14) {
    std::ostringstream msg;
    msg << "crb_frequencies: singular Fisher information (eigenvalue range ["
        << emin << ", " << emax << "], condition estimate "
        << (emin > 0 ? emax / emin : kInf) << ")";
    throw std::runtime_error(msg.str());
  }
  CrbResult out;
  out.condition = emax / emin;
  Vec inv_ev = ev.cwiseInverse();
  if (out.condition > 1e12) {
    out.ill_conditioned = true;
  }
  const Mat inv = eig.eigenvectors() * inv_ev.asDiagonal() *
                  eig.eigenvectors().transpose();
  out.freq_block = inv.topLeftCorner(k, k);
  return out;
}

double crb_trace_db(const Mat& freq_block) {
  const double tr = freq_block.trace();
  if (!(tr > 0)) throw std::runtime_error("crb_trace_db: nonpositive trace");
  return 10.0 * std::log10(tr);
}

}  // namespace qlse
