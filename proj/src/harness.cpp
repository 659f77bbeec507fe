#include "qlse/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "qlse/crb.hpp"
#include "qlse/metrics.hpp"
#include "qlse/model.hpp"

namespace qlse {

using nlohmann::json;

void ExperimentConfig::validate() const {
  std::vector<std::string> errs;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  need(n >= 2, "n must be >= 2");
  need(m >= 1 && m <= n, "m must be in [1, n]");
  need(k >= 1 && k < n, "k must be in [1, n)");
  need(l >= 1, "l must be >= 1");
  need(!snr_db.empty(), "snr_db must have at least one value");
  need(!bits.empty(), "bits must have at least one value");
  for (int b : bits)
    need(b == -1 || (b >= 1 && b <= 12), "bits entries must be 1..12 or \"analog\"");
  need(trials >= 1, "trials must be >= 1");
  need(row_policy == "random" || row_policy == "prefix",
       "row_policy must be \"random\" or \"prefix\"");
  if (doa_mode) {
    need(static_cast<int>(doa_angles_deg.size()) == k,
         "doa_angles_deg must list exactly k angles");
    for (double a : doa_angles_deg)
      need(a > -90.0 && a < 90.0, "doa angles must lie in (-90, 90) degrees");
  }
  need(half_range >= 0, "half_range must be nonnegative (0 = automatic)");
  need(threads >= 1, "threads must be >= 1");
  need(ep.t_outer >= 1, "t_outer must be >= 1");
  need(ep.inner_iters >= 1, "inner_iters must be >= 1");
  need(ep.warm_sweeps >= 1, "warm_sweeps must be >= 1");
  need(ep.tol > 0, "convergence_tol must be positive");
  need(ep.damping > 0 && ep.damping <= 1, "damping must be in (0, 1]");
  need(ep.init_var > 0, "init_var must be positive");
  if (!errs.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration:";
    for (const auto& e : errs) msg << "\n  - " << e;
    throw ConfigError(msg.str());
  }
}

namespace {

std::vector<int> parse_bits_value(const json& v) {
  auto one = [](const json& b) -> int {
    if (b.is_string()) {
      if (b.get<std::string>() == "analog") return -1;
      throw ConfigError("bits: string values must be \"analog\"");
    }
    if (b.is_number_integer()) return b.get<int>();
    throw ConfigError("bits: entries must be integers or \"analog\"");
  };
  std::vector<int> out;
  if (v.is_array())
    for (const auto& b : v) out.push_back(one(b));
  else
    out.push_back(one(v));
  return out;
}

std::vector<double> parse_number_list(const json& v, const std::string& key) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(key + ": entries must be numbers");
      out.push_back(x.get<double>());
    }
  } else if (v.is_number()) {
    out.push_back(v.get<double>());
  } else {
    throw ConfigError(key + ": must be a number or an array of numbers");
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");

  ExperimentConfig cfg;
  std::vector<std::string> errs;
  std::vector<std::string> seen_required;
  auto get_int = [&](const json& v, const char* key) {
    if (!v.is_number_integer()) throw ConfigError(std::string(key) + ": must be an integer");
    return v.get<int>();
  };

  for (const auto& [key, value] : root.items()) {
    try {
      if (key == "n") cfg.n = get_int(value, "n");
      else if (key == "m") cfg.m = get_int(value, "m");
      else if (key == "k") cfg.k = get_int(value, "k");
      else if (key == "l") cfg.l = get_int(value, "l");
      else if (key == "snr_db") cfg.snr_db = parse_number_list(value, "snr_db");
      else if (key == "bits") cfg.bits = parse_bits_value(value);
      else if (key == "trials") cfg.trials = get_int(value, "trials");
      else if (key == "seed") {
        if (!value.is_number_unsigned() && !value.is_number_integer())
          throw ConfigError("seed: must be a nonnegative integer");
        cfg.seed = value.get<std::uint64_t>();
      } else if (key == "row_policy") {
        if (!value.is_string()) throw ConfigError("row_policy: must be a string");
        cfg.row_policy = value.get<std::string>();
      } else if (key == "doa_mode") {
        if (!value.is_boolean()) throw ConfigError("doa_mode: must be a boolean");
        cfg.doa_mode = value.get<bool>();
      } else if (key == "doa_angles_deg") {
        cfg.doa_angles_deg = parse_number_list(value, "doa_angles_deg");
      } else if (key == "half_range") {
        if (value.is_string() && value.get<std::string>() == "auto") cfg.half_range = 0;
        else if (value.is_number()) cfg.half_range = value.get<double>();
        else throw ConfigError("half_range: must be a number or \"auto\"");
      } else if (key == "dnmse_per_row") {
        if (!value.is_boolean()) throw ConfigError("dnmse_per_row: must be a boolean");
        cfg.dnmse_per_row = value.get<bool>();
      } else if (key == "threads") {
        cfg.threads = get_int(value, "threads");
      } else if (key == "t_outer") {
        cfg.ep.t_outer = get_int(value, "t_outer");
      } else if (key == "inner_iters") {
        cfg.ep.inner_iters = get_int(value, "inner_iters");
      } else if (key == "warm_sweeps") {
        cfg.ep.warm_sweeps = get_int(value, "warm_sweeps");
      } else if (key == "convergence_tol") {
        if (!value.is_number()) throw ConfigError("convergence_tol: must be a number");
        cfg.ep.tol = value.get<double>();
      } else if (key == "damping") {
        if (!value.is_number()) throw ConfigError("damping: must be a number");
        cfg.ep.damping = value.get<double>();
      } else if (key == "init_var") {
        if (!value.is_number()) throw ConfigError("init_var: must be a number");
        cfg.ep.init_var = value.get<double>();
      } else {
        errs.push_back("unknown key: \"" + key + "\"");
      }
    } catch (const ConfigError& e) {
      errs.push_back(e.what());
    }
  }
  for (const char* req : {"n", "m", "k", "l", "seed"})
    if (!root.contains(req)) errs.push_back(std::string("missing required key: \"") + req + "\"");

  if (!errs.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration:";
    for (const auto& e : errs) msg << "\n  - " << e;
    throw ConfigError(msg.str());
  }
  cfg.validate();
  return cfg;
}

std::uint64_t trial_seed(std::uint64_t base, std::uint64_t trial) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (trial + 1);
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> pts;
  for (int b : cfg.bits)
    for (double s : cfg.snr_db) {
      SweepPoint p;
      p.bits = b;
      p.snr_db = s;
      std::ostringstream tag;
      tag << (b == -1 ? std::string("analog") : "bits" + std::to_string(b));
      tag << "_snr" << s;
      p.tag = tag.str();
      pts.push_back(p);
    }
  return pts;
}

namespace {

TrialRecord run_one_trial(const ExperimentConfig& cfg, const SweepPoint& point,
                          int trial) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = trial_seed(cfg.seed, trial);
  std::mt19937_64 rng(rec.seed);

  TruthOptions topt;
  topt.n = cfg.n;
  topt.m = cfg.m;
  topt.k = cfg.k;
  topt.l = cfg.l;
  topt.snr_db = point.snr_db;
  topt.prefix_rows = cfg.row_policy == "prefix";
  if (cfg.doa_mode) {
    topt.fixed_theta.resize(cfg.k);
    for (int i = 0; i < cfg.k; ++i)
      topt.fixed_theta(i) = doa_to_freq(cfg.doa_angles_deg[i]);
  }
  const Truth truth = generate_truth(topt, rng);

  const bool analog = point.bits == -1;
  const double hr = cfg.half_range > 0 ? cfg.half_range
                                       : QuantizerSpec::auto_half_range(cfg.k);
  EstimateResult est;
  QuantizerSpec spec;
  const auto tic = std::chrono::steady_clock::now();
  if (analog) {
    est = run_mvalse(truth.noisy, truth.sigma2, truth.rows, cfg.ep);
  } else {
    spec = QuantizerSpec::make(point.bits, hr);
    const QuantizedData qd = quantize_matrix(truth.noisy, spec);
    est = run_mvalse_ep(qd, truth.sigma2, truth.rows, cfg.ep);
  }
  const auto toc = std::chrono::steady_clock::now();
  rec.runtime_ms = std::chrono::duration<double, std::milli>(toc - tic).count();
  rec.outer_iters = est.outer_iters;

  const CMat truth_full = assemble_full(truth.theta, truth.w, cfg.n);
  rec.k_hat = est.k_hat;
  rec.nmse_db = nmse_db(est.z_full, truth_full);
  rec.dnmse_db = dnmse_db(est.z_full, truth_full, cfg.dnmse_per_row);
  rec.order_correct = (est.k_hat == cfg.k) && rec.nmse_db <= -10.0;

  if (est.k_hat == cfg.k) {
    const FreqMatch match = match_frequencies(est.theta, truth.theta);
    if (rec.order_correct) rec.freq_mse_db = match.mse_db;
    double ksum = 0;
    for (int j = 0; j < cfg.k; ++j) ksum += est.posteriors[match.perm[j]].kappa;
    rec.mean_kappa_matched = ksum / cfg.k;
    if (cfg.doa_mode && rec.order_correct) {
      Vec deg_res(cfg.k);
      for (int j = 0; j < cfg.k; ++j)
        deg_res(j) = freq_to_doa(est.theta(match.perm[j])) - cfg.doa_angles_deg[j];
      const double nrm = deg_res.norm();
      rec.doa_mse_deg_db = nrm > 0 ? std::max(20.0 * std::log10(nrm), -300.0) : -300.0;
    }
  }

  // Bounds for the drawn scene (frequencies + per-snapshot amplitudes).
  FisherParams fp;
  fp.theta = truth.theta;
  fp.g = truth.w.cwiseAbs();
  fp.phi = truth.w.array().arg().matrix();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    const Mat fim_u = fim_unquantized(fp, truth.rows, truth.sigma2);
    rec.crb_freq_unq_db = crb_trace_db(crb_frequencies(fim_u, cfg.k).freq_block);
  } catch (const std::exception&) {
    rec.crb_freq_unq_db = nan;
  }
  if (analog) {
    rec.crb_freq_db = rec.crb_freq_unq_db;
  } else {
    try {
      const Mat fim_q = fim_quantized(fp, truth.rows, truth.sigma2, spec);
      rec.crb_freq_db = crb_trace_db(crb_frequencies(fim_q, cfg.k).freq_block);
    } catch (const std::exception&) {
      rec.crb_freq_db = nan;
    }
  }
  return rec;
}

double finite_mean(const std::vector<double>& xs) {
  double acc = 0;
  int cnt = 0;
  for (double x : xs)
    if (std::isfinite(x)) {
      acc += x;
      ++cnt;
    }
  return cnt > 0 ? acc / cnt : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

SweepResult run_sweep_point(const ExperimentConfig& cfg, const SweepPoint& point) {
  cfg.validate();
  SweepResult res;
  res.point = point;
  res.records.resize(cfg.trials);

  const bool parallel = cfg.threads > 1;
  // Exceptions may not escape an OpenMP worker; capture the first one and
  // rethrow serially so callers see a regular error instead of a process abort.
  std::string trial_error;
#pragma omp parallel for schedule(dynamic) num_threads(cfg.threads) if (parallel)
  for (int t = 0; t < cfg.trials; ++t) {
    try {
      res.records[t] = run_one_trial(cfg, point, t);
      if (log_level() >= 2) {
        std::ostringstream msg;
        msg << "trial " << t << " [" << point.tag << "] k_hat=" << res.records[t].k_hat
            << " nmse=" << res.records[t].nmse_db << " dB";
        log_debug(msg.str());
      }
    } catch (const std::exception& e) {
#pragma omp critical(qlse_trial_error)
      if (trial_error.empty()) {
        std::ostringstream msg;
        msg << "trial " << t << " [" << point.tag << "] failed: " << e.what();
        trial_error = msg.str();
      }
    } catch (...) {
#pragma omp critical(qlse_trial_error)
      if (trial_error.empty()) {
        std::ostringstream msg;
        msg << "trial " << t << " [" << point.tag << "] failed: unknown error";
        trial_error = msg.str();
      }
    }
  }
  if (!trial_error.empty()) throw std::runtime_error(trial_error);

  SweepSummary& s = res.summary;
  s.trials = cfg.trials;
  std::vector<double> nm, dn, fm, cq, cu, kp, dm, rt, oi;
  for (const auto& r : res.records) {
    if (r.order_correct) ++s.n_order_correct;
    nm.push_back(r.nmse_db);
    dn.push_back(r.dnmse_db);
    if (r.freq_mse_db) fm.push_back(*r.freq_mse_db);
    cq.push_back(r.crb_freq_db);
    cu.push_back(r.crb_freq_unq_db);
    if (r.mean_kappa_matched) kp.push_back(*r.mean_kappa_matched);
    if (r.doa_mse_deg_db) dm.push_back(*r.doa_mse_deg_db);
    rt.push_back(r.runtime_ms);
    oi.push_back(static_cast<double>(r.outer_iters));
  }
  s.p_correct = static_cast<double>(s.n_order_correct) / cfg.trials;
  s.mean_nmse_db = finite_mean(nm);
  s.mean_dnmse_db = finite_mean(dn);
  if (!fm.empty()) s.mean_freq_mse_db = finite_mean(fm);
  s.mean_crb_freq_db = finite_mean(cq);
  s.mean_crb_freq_unq_db = finite_mean(cu);
  if (!kp.empty()) s.mean_kappa_matched = finite_mean(kp);
  if (!dm.empty()) s.mean_doa_mse_deg_db = finite_mean(dm);
  s.mean_runtime_ms = finite_mean(rt);
  s.mean_outer_iters = finite_mean(oi);
  return res;
}

std::vector<SweepResult> run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<SweepResult> out;
  for (const SweepPoint& p : sweep_points(cfg)) {
    if (log_level() >= 1) log_info("running sweep point " + p.tag);
    out.push_back(run_sweep_point(cfg, p));
  }
  return out;
}

int log_level() {
  static const int level = [] {
    const char* env = std::getenv("QLSE_LOG");
    if (!env) return 0;
    const std::string v(env);
    if (v == "debug") return 2;
    if (v == "info") return 1;
    return 0;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[qlse] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "[qlse] %s\n", msg.c_str());
}

}  // namespace qlse
