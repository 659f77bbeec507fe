// Benchmark of the data-parallel kernels against their serial reference
// paths: the componentwise measurement denoiser and the Fisher-information
// accumulation. Both parallel paths are required to be bit-identical to the
// serial ones; this tool asserts that while timing them.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qlse/crb.hpp"
#include "qlse/model.hpp"
#include "qlse/quantizer.hpp"

using namespace qlse;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    f();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

void bench_denoiser(int m, int l, std::mt19937_64& rng) {
  const QuantizerSpec spec = QuantizerSpec::make(3, 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CMat y(m, l);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < l; ++c) y(i, c) = Complex(gauss(rng), gauss(rng));
  const QuantizedData data = quantize_matrix(y, spec);
  CMat prior = CMat::Zero(m, l);
  Mat prior_var = Mat::Constant(m, l, 2.0);
  const double sigma2 = 0.1;

  CMat mean_s(m, l), mean_p(m, l);
  Mat var_s(m, l), var_p(m, l);
  const int reps = 5;
  const double ts = time_best_of(reps, [&] {
    denoise_matrix(data, prior, prior_var, sigma2, mean_s, var_s, false);
  });
  const double tp = time_best_of(reps, [&] {
    denoise_matrix(data, prior, prior_var, sigma2, mean_p, var_p, true);
  });
  if (mean_s != mean_p || var_s != var_p) {
    std::fprintf(stderr, "FATAL: denoiser parallel path is not bit-identical\n");
    std::exit(1);
  }
  std::printf("denoise   m=%-5d l=%-3d serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n",
              m, l, ts * 1e3, tp * 1e3, ts / tp);
}

void bench_fim(int n, int k, int l, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  FisherParams p;
  p.theta.resize(k);
  for (int i = 0; i < k; ++i) p.theta(i) = uni(rng) * 0.9;
  p.g = Mat::Constant(k, l, 1.0) + 0.2 * Mat::Random(k, l);
  p.phi = Mat::Random(k, l) * kPi;
  RowSet rows;
  rows.n = n;
  rows.rows.resize(n);
  for (int i = 0; i < n; ++i) rows.rows[i] = i;
  const QuantizerSpec spec = QuantizerSpec::make(2, 3.0);
  const double sigma2 = 0.2;

  Mat fs, fp;
  const int reps = 5;
  const double ts = time_best_of(
      reps, [&] { fs = fim_quantized(p, rows, sigma2, spec, false); });
  const double tp = time_best_of(
      reps, [&] { fp = fim_quantized(p, rows, sigma2, spec, true); });
  if (fs != fp) {
    std::fprintf(stderr, "FATAL: FIM parallel path is not bit-identical\n");
    std::exit(1);
  }
  std::printf("fim       n=%-5d k=%-3d l=%-3d serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n",
              n, k, l, ts * 1e3, tp * 1e3, ts / tp);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads available: %d\n", omp_get_max_threads());
#else
  std::printf("threads available: 1 (built without OpenMP)\n");
#endif
  std::mt19937_64 rng(20240717);
  for (int m : {256, 1024, 4096}) bench_denoiser(m, 16, rng);
  for (int n : {128, 512, 2048}) bench_fim(n, 4, 4, rng);
  std::printf("all parallel kernels bit-identical to the serial reference\n");
  return 0;
}
