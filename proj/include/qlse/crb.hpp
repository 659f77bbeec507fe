#pragma once

#include "qlse/quantizer.hpp"
#include "qlse/types.hpp"

namespace qlse {

// Deterministic-parameter view of the scene: frequencies plus per-snapshot
// magnitudes and phases. Parameter vector ordering (dimension (2l+1)*k):
//   [theta_0..theta_{k-1},
//    g(:,0), g(:,1), ..., g(:,l-1),
//    phi(:,0), ..., phi(:,l-1)].
struct FisherParams {
  Vec theta;  // k
  Mat g;      // k x l, magnitudes
  Mat phi;    // k x l, phases

  int k() const { return static_cast<int>(theta.size()); }
  int l() const { return static_cast<int>(g.cols()); }
  int dim() const { return (2 * l() + 1) * k(); }
  void validate() const;
};

// Noiseless measurement sum_k g_{kl} e^{j(m*theta_k + phi_{kl})}.
Complex z_entry(const FisherParams& p, int m_value, int snapshot);

// Analytic partial derivatives of Re/Im of z_entry with respect to the full
// parameter vector (length dim()).
void z_partials(const FisherParams& p, int m_value, int snapshot, Vec& d_re,
                Vec& d_im);

// Per-entry Fisher weights for quantized observation of z + CN(0, sigma2):
// lambda weighs the real-part gradient outer product, chi the imaginary part.
std::pair<double, double> lambda_chi(Complex z, double sigma2,
                                     const QuantizerSpec& spec);

// Fisher information matrices. The parallel path splits over observed rows
// with per-row accumulation slots and an ordered serial reduction, so results
// are bit-identical to the serial path.
Mat fim_quantized(const FisherParams& p, const RowSet& rows, double sigma2,
                  const QuantizerSpec& spec, bool parallel = false);
Mat fim_unquantized(const FisherParams& p, const RowSet& rows, double sigma2,
                    bool parallel = false);

struct CrbResult {
  Mat freq_block;         // k x k frequency block of the inverse FIM
  bool ill_conditioned = false;
  double condition = 0;   // eigenvalue condition estimate of the FIM
};

// Frequency CRB: top-left k x k block of the full FIM inverse, computed by
// eigendecomposition. A structurally singular FIM (smallest eigenvalue at
// machine zero relative to the largest) throws std::runtime_error carrying
// the eigenvalue range; condition numbers above 1e12 set the warning flag.
CrbResult crb_frequencies(const Mat& fim, int k);

// 10*log10 of the trace of the frequency block.
double crb_trace_db(const Mat& freq_block);

}  // namespace qlse
