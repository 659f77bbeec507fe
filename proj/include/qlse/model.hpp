#pragma once

#include <random>

#include "qlse/types.hpp"

namespace qlse {

// Steering vector entries e^{j*m*theta} over the observed elements.
CVec steering(const RowSet& rows, double theta);
// Full-aperture steering vector of length n.
CVec steering_full(int n, double theta);

// Z = A(theta) * W restricted to the observed rows (m x l).
CMat assemble_line_spectrum(const Vec& theta, const CMat& w, const RowSet& rows);
// Full-aperture version (n x l).
CMat assemble_full(const Vec& theta, const CMat& w, int n);

// DOA <-> spatial frequency for a half-wavelength array.
double doa_to_freq(double angle_deg);
double freq_to_doa(double theta);

struct Truth {
  RowSet rows;
  Vec theta;     // k frequencies in (-pi, pi]
  CMat w;        // k x l amplitudes
  CMat z;        // m x l noiseless measurements over observed rows
  CMat noisy;    // z + noise
  double sigma2 = 0;  // complex noise variance actually realized
};

struct TruthOptions {
  int n = 0;
  int m = 0;
  int k = 0;
  int l = 1;
  double snr_db = 10.0;
  bool prefix_rows = false;        // observed rows 0..m-1 instead of random subset
  Vec fixed_theta;                 // when nonempty, use these frequencies (size k)
  double min_sep_factor = 1.0;     // minimum wrap distance = factor * 2*pi/n
  int rejection_budget = 10000;
};

// Draws one synthetic scene. Frequency sets violating the minimum wrap-around
// separation are rejected wholesale; exceeding the rejection budget throws.
// Noise is scaled so the realized SNR matches snr_db exactly.
Truth generate_truth(const TruthOptions& opt, std::mt19937_64& rng);

// Minimum pairwise wrap-around distance of a frequency set.
double min_wrap_separation(const Vec& theta);

}  // namespace qlse
