#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "qlse/ep.hpp"
#include "qlse/types.hpp"

namespace qlse {

// Raised for invalid configuration (missing/unknown keys, bad values).
// The command-line tool maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  int n = 0;
  int m = 0;
  int k = 0;
  int l = 1;
  std::vector<double> snr_db{10.0};
  std::vector<int> bits{-1};          // -1 = analog
  int trials = 50;
  std::uint64_t seed = 0;
  std::string row_policy = "random";  // "random" | "prefix"
  bool doa_mode = false;
  std::vector<double> doa_angles_deg;
  double half_range = 0;              // 0 = automatic 3*sqrt(k/2)
  bool dnmse_per_row = false;
  int threads = 1;
  EpOptions ep;

  void validate() const;  // throws ConfigError
};

// Parses a flat JSON object; unknown keys and malformed values raise
// ConfigError with an exhaustive list of problems.
ExperimentConfig parse_config(const std::string& json_text);

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  int k_hat = 0;
  bool order_correct = false;  // k_hat == k and nmse <= -10 dB
  double nmse_db = 0;
  double dnmse_db = 0;
  std::optional<double> freq_mse_db;  // only when order-correct
  double crb_freq_db = 0;             // matched to the configured bit depth
  double runtime_ms = 0;
  // Extra diagnostics (not part of the CSV schema):
  double crb_freq_unq_db = 0;
  std::optional<double> mean_kappa_matched;  // when k_hat == k
  std::optional<double> doa_mse_deg_db;      // DOA runs, order-correct trials
  int outer_iters = 0;
};

struct SweepPoint {
  int bits = -1;  // -1 = analog
  double snr_db = 10;
  std::string tag;
};

struct SweepSummary {
  int trials = 0;
  double p_correct = 0;
  double mean_nmse_db = 0;
  double mean_dnmse_db = 0;
  std::optional<double> mean_freq_mse_db;
  int n_order_correct = 0;
  double mean_crb_freq_db = 0;
  double mean_crb_freq_unq_db = 0;
  std::optional<double> mean_kappa_matched;
  std::optional<double> mean_doa_mse_deg_db;
  double mean_runtime_ms = 0;
  double mean_outer_iters = 0;
};

struct SweepResult {
  SweepPoint point;
  std::vector<TrialRecord> records;
  SweepSummary summary;
};

// Deterministic per-trial seed derived from the base seed; identical across
// bit-depth configurations so comparisons are paired on the same scenes.
std::uint64_t trial_seed(std::uint64_t base, std::uint64_t trial);

// Cartesian sweep grid (bits outer, snr inner) with stable tags.
std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg);

// Runs all trials of one sweep point. Trials are independent; with
// cfg.threads > 1 they run under OpenMP, writing into per-trial slots so the
// output is identical to the serial order.
SweepResult run_sweep_point(const ExperimentConfig& cfg, const SweepPoint& point);

// Full experiment across the sweep grid.
std::vector<SweepResult> run_monte_carlo(const ExperimentConfig& cfg);

// Logging level from the QLSE_LOG environment variable: 0 quiet, 1 info,
// 2 debug. Messages go to stderr.
int log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace qlse
