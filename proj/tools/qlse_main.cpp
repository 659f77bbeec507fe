// Command-line front end: Monte-Carlo experiments (`run`), single-shot
// estimation from measurement files (`estimate`), and bound tables (`crb`).
//
// Exit codes: 0 success, 2 configuration/input error, 3 runtime or numerical
// error. Deterministic artifacts (trials CSV, summary JSON) contain no timing
// data; wall-clock information lives in the timestamped manifest.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "qlse/crb.hpp"
#include "qlse/ep.hpp"
#include "qlse/harness.hpp"
#include "qlse/model.hpp"
#include "qlse/quantizer.hpp"

namespace {

using nlohmann::json;
using namespace qlse;

constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Small utilities
// ---------------------------------------------------------------------------

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
  if (!out) throw ConfigError("failed while writing file: " + path);
}

// Writes JSON to a file, or to stdout when path is "-" or empty.
void emit_json(const json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_text_file(path, text);
}

int default_threads() {
#ifdef _OPENMP
  return std::max(1, omp_get_max_threads());
#else
  return 1;
#endif
}

json bits_to_json(int b) {
  if (b == -1) return json("analog");
  return json(b);
}

// Config echo in the same schema the parser accepts.
json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["n"] = cfg.n;
  j["m"] = cfg.m;
  j["k"] = cfg.k;
  j["l"] = cfg.l;
  j["snr_db"] = cfg.snr_db;
  json bits = json::array();
  for (int b : cfg.bits) bits.push_back(bits_to_json(b));
  j["bits"] = bits;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["row_policy"] = cfg.row_policy;
  j["doa_mode"] = cfg.doa_mode;
  if (cfg.doa_mode) j["doa_angles_deg"] = cfg.doa_angles_deg;
  if (cfg.half_range > 0)
    j["half_range"] = cfg.half_range;
  else
    j["half_range"] = "auto";
  j["dnmse_per_row"] = cfg.dnmse_per_row;
  j["threads"] = cfg.threads;
  j["t_outer"] = cfg.ep.t_outer;
  j["inner_iters"] = cfg.ep.inner_iters;
  j["warm_sweeps"] = cfg.ep.warm_sweeps;
  j["convergence_tol"] = cfg.ep.tol;
  j["damping"] = cfg.ep.damping;
  j["init_var"] = cfg.ep.init_var;
  return j;
}

std::vector<int> parse_bits_flag(const std::string& text) {
  if (text == "analog") return {-1};
  try {
    size_t pos = 0;
    const int b = std::stoi(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing characters");
    return {b};
  } catch (const std::exception&) {
    throw ConfigError("--bits: expected an integer or \"analog\", got \"" + text + "\"");
  }
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool threads_set = false;
  std::string bits;
  bool bits_set = false;
  int trials = 0;
  bool trials_set = false;
};

std::string trials_csv_name(const std::vector<SweepPoint>& pts, size_t i) {
  if (pts.size() == 1) return "trials.csv";
  return "trials_" + pts[i].tag + ".csv";
}

std::string render_trials_csv(const SweepResult& res) {
  std::ostringstream out;
  out << "trial,seed,k_hat,order_correct,nmse_db,dnmse_db,freq_mse_db,crb_freq_db\n";
  for (const TrialRecord& r : res.records) {
    out << r.trial << ',' << r.seed << ',' << r.k_hat << ','
        << (r.order_correct ? 1 : 0) << ',' << fmt17(r.nmse_db) << ','
        << fmt17(r.dnmse_db) << ',';
    if (r.freq_mse_db) out << fmt17(*r.freq_mse_db);
    out << ',' << fmt17(r.crb_freq_db) << '\n';
  }
  return out.str();
}

json summary_to_json(const SweepResult& res) {
  const SweepSummary& s = res.summary;
  json j;
  j["tag"] = res.point.tag;
  j["bits"] = bits_to_json(res.point.bits);
  j["snr_db"] = res.point.snr_db;
  j["trials"] = s.trials;
  j["p_correct"] = s.p_correct;
  j["n_order_correct"] = s.n_order_correct;
  j["mean_nmse_db"] = s.mean_nmse_db;
  j["mean_dnmse_db"] = s.mean_dnmse_db;
  j["mean_freq_mse_db"] = s.mean_freq_mse_db ? json(*s.mean_freq_mse_db) : json();
  j["mean_crb_freq_db"] = s.mean_crb_freq_db;
  j["mean_crb_freq_unq_db"] = s.mean_crb_freq_unq_db;
  j["mean_kappa_matched"] = s.mean_kappa_matched ? json(*s.mean_kappa_matched) : json();
  j["mean_doa_mse_deg_db"] =
      s.mean_doa_mse_deg_db ? json(*s.mean_doa_mse_deg_db) : json();
  j["mean_outer_iters"] = s.mean_outer_iters;
  return j;
}

int cmd_run(const RunArgs& args) {
  ExperimentConfig cfg = parse_config(read_text_file(args.config_path));

  // Flag overrides, then the machine-parallelism default for threads when
  // neither the flag nor the config file pinned a value.
  const json raw = json::parse(read_text_file(args.config_path));
  if (args.seed_set) cfg.seed = args.seed;
  if (args.trials_set) cfg.trials = args.trials;
  if (args.bits_set) cfg.bits = parse_bits_flag(args.bits);
  if (args.threads_set)
    cfg.threads = args.threads;
  else if (!raw.contains("threads"))
    cfg.threads = default_threads();
  cfg.validate();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + args.out_dir);
  const fs::path out(args.out_dir);

  const std::vector<SweepPoint> pts = sweep_points(cfg);
  json outputs;
  outputs["manifest"] = "manifest.json";
  outputs["summary"] = "summary.json";
  json trials_map;
  for (size_t i = 0; i < pts.size(); ++i) trials_map[pts[i].tag] = trials_csv_name(pts, i);
  outputs["trials"] = trials_map;

  json manifest;
  manifest["tool"] = "qlse";
  manifest["version"] = kToolVersion;
  manifest["command"] = "run";
  manifest["status"] = "running";
  manifest["start_time"] = iso_utc_now();
  manifest["base_seed"] = cfg.seed;
  manifest["threads"] = cfg.threads;
  manifest["config"] = config_to_json(cfg);
  manifest["outputs"] = outputs;
  // The manifest lands on disk before any trial executes.
  emit_json(manifest, (out / "manifest.json").string());

  const auto t0 = std::chrono::steady_clock::now();
  json summary;
  summary["points"] = json::array();
  json timing_points;
  for (size_t i = 0; i < pts.size(); ++i) {
    log_info("running sweep point " + pts[i].tag);
    const SweepResult res = run_sweep_point(cfg, pts[i]);
    write_text_file((out / trials_csv_name(pts, i)).string(), render_trials_csv(res));
    summary["points"].push_back(summary_to_json(res));
    json tp;
    tp["mean_trial_runtime_ms"] = res.summary.mean_runtime_ms;
    double total = 0;
    for (const auto& r : res.records) total += r.runtime_ms;
    tp["total_trial_runtime_ms"] = total;
    timing_points[pts[i].tag] = tp;
  }
  emit_json(summary, (out / "summary.json").string());

  const auto t1 = std::chrono::steady_clock::now();
  manifest["status"] = "complete";
  manifest["end_time"] = iso_utc_now();
  json timing;
  timing["total_seconds"] = std::chrono::duration<double>(t1 - t0).count();
  timing["points"] = timing_points;
  manifest["timing"] = timing;
  emit_json(manifest, (out / "manifest.json").string());
  return 0;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string input_path;
  std::string quantizer_path;
  std::string out_path = "-";
  double sigma2 = 0;
  int n = 0;
  int threads = 1;
};

struct MeasurementFile {
  bool quantized = false;
  RowSet rows;       // observed element indices found in the file
  int l = 0;         // snapshot count
  CMat y;            // analog values (quantized == false)
  Eigen::MatrixXi re_idx, im_idx;  // cell indices (quantized == true)
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

MeasurementFile parse_measurements(const std::string& path, int n) {
  if (n < 2) throw ConfigError("--n: aperture size must be >= 2");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read file: " + path);

  auto fail = [&](int line_no, const std::string& what) -> void {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": " << what;
    throw ConfigError(msg.str());
  };

  MeasurementFile mf;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  // (element index, snapshot) -> value pair, duplicate-checked.
  std::map<std::pair<int, int>, std::pair<double, double>> cells;
  int max_l = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (!have_header) {
      if (f == std::vector<std::string>{"m", "l", "re", "im"})
        mf.quantized = false;
      else if (f == std::vector<std::string>{"m", "l", "re_idx", "im_idx"})
        mf.quantized = true;
      else
        fail(line_no, "unrecognized header (expected \"m,l,re,im\" or \"m,l,re_idx,im_idx\")");
      have_header = true;
      continue;
    }
    if (f.size() != 4) fail(line_no, "expected 4 comma-separated fields");
    int mi = 0, li = 0;
    double a = 0, b = 0;
    try {
      size_t pos = 0;
      mi = std::stoi(f[0], &pos);
      if (pos != f[0].size()) throw std::invalid_argument("m");
      li = std::stoi(f[1], &pos);
      if (pos != f[1].size()) throw std::invalid_argument("l");
      a = std::stod(f[2], &pos);
      if (pos != f[2].size()) throw std::invalid_argument("value");
      b = std::stod(f[3], &pos);
      if (pos != f[3].size()) throw std::invalid_argument("value");
    } catch (const std::exception&) {
      fail(line_no, "malformed numeric field");
    }
    if (mi < 0 || mi >= n) fail(line_no, "element index out of [0, n)");
    if (li < 0) fail(line_no, "snapshot index must be nonnegative");
    if (!cells.emplace(std::make_pair(mi, li), std::make_pair(a, b)).second)
      fail(line_no, "duplicate (element, snapshot) entry");
    max_l = std::max(max_l, li);
  }
  if (!have_header) fail(std::max(line_no, 1), "missing header line");
  if (cells.empty()) fail(line_no, "no data rows");

  mf.l = max_l + 1;
  mf.rows.n = n;
  for (const auto& [key, val] : cells)
    if (mf.rows.rows.empty() || mf.rows.rows.back() != key.first)
      mf.rows.rows.push_back(key.first);
  // The map is ordered, so rows are sorted; check the grid is complete.
  for (int r : mf.rows.rows)
    for (int c = 0; c < mf.l; ++c)
      if (!cells.count({r, c})) {
        std::ostringstream msg;
        msg << path << ": missing entry for element " << r << ", snapshot " << c;
        throw ConfigError(msg.str());
      }

  const int m = mf.rows.m();
  if (mf.quantized) {
    mf.re_idx.resize(m, mf.l);
    mf.im_idx.resize(m, mf.l);
  } else {
    mf.y.resize(m, mf.l);
  }
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < mf.l; ++c) {
      const auto [a, b] = cells.at({mf.rows.rows[i], c});
      if (mf.quantized) {
        if (a != std::floor(a) || b != std::floor(b))
          throw ConfigError(path + ": quantized indices must be integers");
        mf.re_idx(i, c) = static_cast<int>(a);
        mf.im_idx(i, c) = static_cast<int>(b);
      } else {
        mf.y(i, c) = Complex(a, b);
      }
    }
  return mf;
}

QuantizerSpec parse_quantizer_sidecar(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path + ": not valid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("bits") || !j["bits"].is_number_integer())
    throw ConfigError(path + ": quantizer description needs an integer \"bits\"");
  const int bits = j["bits"].get<int>();
  double hr = 0;
  if (j.contains("half_range")) {
    if (!j["half_range"].is_number())
      throw ConfigError(path + ": half_range must be a number");
    hr = j["half_range"].get<double>();
  } else if (bits > 1) {
    throw ConfigError(path + ": half_range required for bits > 1");
  }
  QuantizerSpec spec;
  try {
    spec = QuantizerSpec::make(bits, hr);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (j.contains("thresholds")) {
    if (!j["thresholds"].is_array() ||
        j["thresholds"].size() != spec.thresholds.size())
      throw ConfigError(path + ": thresholds inconsistent with bits/half_range");
    for (size_t i = 0; i < spec.thresholds.size(); ++i)
      if (std::abs(j["thresholds"][i].get<double>() - spec.thresholds[i]) > 1e-12)
        throw ConfigError(path + ": thresholds inconsistent with bits/half_range");
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "bits" && key != "half_range" && key != "thresholds")
      throw ConfigError(path + ": unknown key \"" + key + "\"");
  }
  return spec;
}

int cmd_estimate(const EstimateArgs& args) {
  if (!(args.sigma2 > 0)) throw ConfigError("--sigma2: must be positive");
  const MeasurementFile mf = parse_measurements(args.input_path, args.n);

  EpOptions opt;
  opt.parallel_denoise = args.threads > 1;

  EstimateResult est;
  QuantizerSpec spec;
  if (mf.quantized) {
    if (args.quantizer_path.empty())
      throw ConfigError("quantized input requires --quantizer with the cell description");
    spec = parse_quantizer_sidecar(args.quantizer_path);
    const int cells = spec.num_cells();
    if (mf.re_idx.minCoeff() < 0 || mf.re_idx.maxCoeff() >= cells ||
        mf.im_idx.minCoeff() < 0 || mf.im_idx.maxCoeff() >= cells) {
      std::ostringstream msg;
      msg << args.input_path << ": cell indices out of range for a " << spec.bits
          << "-bit quantizer (valid cells 0.." << cells - 1 << ")";
      throw ConfigError(msg.str());
    }
    QuantizedData data;
    data.spec = spec;
    data.re_idx = mf.re_idx;
    data.im_idx = mf.im_idx;
    est = run_mvalse_ep(data, args.sigma2, mf.rows, opt);
  } else {
    if (!args.quantizer_path.empty())
      throw ConfigError("--quantizer given but the input header is analog (m,l,re,im)");
    est = run_mvalse(mf.y, args.sigma2, mf.rows, opt);
  }

  json j;
  j["mode"] = mf.quantized ? "quantized" : "analog";
  if (mf.quantized) j["bits"] = spec.bits;
  j["n"] = args.n;
  j["l"] = mf.l;
  j["rows"] = mf.rows.rows;
  j["sigma2"] = args.sigma2;
  j["k_hat"] = est.k_hat;
  json theta = json::array(), doa = json::array(), posts = json::array();
  for (int i = 0; i < est.k_hat; ++i) {
    theta.push_back(est.theta(i));
    doa.push_back(freq_to_doa(est.theta(i)));
    json p;
    p["mu"] = est.posteriors[i].mu;
    p["kappa"] = est.posteriors[i].kappa;
    posts.push_back(p);
  }
  j["theta_rad"] = theta;
  j["theta_doa_deg"] = doa;
  j["posteriors"] = posts;
  json wre = json::array(), wim = json::array();
  for (int i = 0; i < est.k_hat; ++i) {
    json rr = json::array(), ri = json::array();
    for (int c = 0; c < mf.l; ++c) {
      rr.push_back(est.w(i, c).real());
      ri.push_back(est.w(i, c).imag());
    }
    wre.push_back(rr);
    wim.push_back(ri);
  }
  j["w_re"] = wre;
  j["w_im"] = wim;
  json zre = json::array(), zim = json::array();
  for (int i = 0; i < args.n; ++i) {
    json rr = json::array(), ri = json::array();
    for (int c = 0; c < mf.l; ++c) {
      rr.push_back(est.z_full(i, c).real());
      ri.push_back(est.z_full(i, c).imag());
    }
    zre.push_back(rr);
    zim.push_back(ri);
  }
  j["z_re"] = zre;
  j["z_im"] = zim;
  j["rho"] = est.rho;
  j["tau"] = est.tau;
  j["outer_iters"] = est.outer_iters;
  emit_json(j, args.out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// crb
// ---------------------------------------------------------------------------

struct CrbArgs {
  std::string config_path;
  std::string params_text;
  std::string out_path = "-";
};

struct CrbProblem {
  FisherParams fp;
  RowSet rows;
  double sigma2 = 0;
  std::vector<int> bits;
  double half_range = 0;  // 0 = automatic
};

Mat parse_k_by_l(const json& v, int k, const std::string& key) {
  auto bad = [&]() -> void {
    throw ConfigError(key + ": must be a length-k array (l=1) or a k x l nested array");
  };
  Mat out;
  if (!v.is_array() || v.empty()) bad();
  if (v[0].is_array()) {
    const int l = static_cast<int>(v[0].size());
    if (static_cast<int>(v.size()) != k || l < 1) bad();
    out.resize(k, l);
    for (int i = 0; i < k; ++i) {
      if (!v[i].is_array() || static_cast<int>(v[i].size()) != l) bad();
      for (int c = 0; c < l; ++c) {
        if (!v[i][c].is_number()) bad();
        out(i, c) = v[i][c].get<double>();
      }
    }
  } else {
    if (static_cast<int>(v.size()) != k) bad();
    out.resize(k, 1);
    for (int i = 0; i < k; ++i) {
      if (!v[i].is_number()) bad();
      out(i, 0) = v[i].get<double>();
    }
  }
  return out;
}

CrbProblem problem_from_params(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("--params: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("--params: must be a JSON object");
  for (const char* req : {"n", "sigma2", "theta", "g", "phi"})
    if (!j.contains(req))
      throw ConfigError(std::string("--params: missing required key \"") + req + "\"");

  CrbProblem p;
  if (!j["n"].is_number_integer()) throw ConfigError("--params: n must be an integer");
  const int n = j["n"].get<int>();
  if (!j["sigma2"].is_number() || !(j["sigma2"].get<double>() > 0))
    throw ConfigError("--params: sigma2 must be a positive number");
  p.sigma2 = j["sigma2"].get<double>();

  if (!j["theta"].is_array() || j["theta"].empty())
    throw ConfigError("--params: theta must be a nonempty array");
  const int k = static_cast<int>(j["theta"].size());
  p.fp.theta.resize(k);
  for (int i = 0; i < k; ++i) {
    if (!j["theta"][i].is_number())
      throw ConfigError("--params: theta entries must be numbers");
    p.fp.theta(i) = j["theta"][i].get<double>();
  }
  p.fp.g = parse_k_by_l(j["g"], k, "--params: g");
  p.fp.phi = parse_k_by_l(j["phi"], k, "--params: phi");
  if (p.fp.g.cols() != p.fp.phi.cols())
    throw ConfigError("--params: g and phi must have the same shape");

  p.rows.n = n;
  if (j.contains("rows")) {
    if (!j["rows"].is_array()) throw ConfigError("--params: rows must be an array");
    for (const auto& r : j["rows"]) {
      if (!r.is_number_integer()) throw ConfigError("--params: rows entries must be integers");
      p.rows.rows.push_back(r.get<int>());
    }
  } else {
    p.rows.rows.resize(n);
    for (int i = 0; i < n; ++i) p.rows.rows[i] = i;
  }
  try {
    p.rows.validate();
    p.fp.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("--params: ") + e.what());
  }

  p.bits = {-1};
  if (j.contains("bits")) {
    p.bits.clear();
    const json& bv = j["bits"];
    auto one = [](const json& b) -> int {
      if (b.is_string() && b.get<std::string>() == "analog") return -1;
      if (b.is_number_integer()) return b.get<int>();
      throw ConfigError("--params: bits entries must be integers or \"analog\"");
    };
    if (bv.is_array())
      for (const auto& b : bv) p.bits.push_back(one(b));
    else
      p.bits.push_back(one(bv));
  }
  for (int b : p.bits)
    if (b != -1 && (b < 1 || b > 12))
      throw ConfigError("--params: bits entries must be 1..12 or \"analog\"");

  if (j.contains("half_range")) {
    if (j["half_range"].is_string() && j["half_range"].get<std::string>() == "auto")
      p.half_range = 0;
    else if (j["half_range"].is_number())
      p.half_range = j["half_range"].get<double>();
    else
      throw ConfigError("--params: half_range must be a number or \"auto\"");
  }
  return p;
}

// Draws the trial-0 scene of the experiment configuration and bounds it.
CrbProblem problem_from_config(const std::string& path) {
  const ExperimentConfig cfg = parse_config(read_text_file(path));
  TruthOptions topt;
  topt.n = cfg.n;
  topt.m = cfg.m;
  topt.k = cfg.k;
  topt.l = cfg.l;
  topt.snr_db = cfg.snr_db.front();
  topt.prefix_rows = cfg.row_policy == "prefix";
  if (cfg.doa_mode) {
    topt.fixed_theta.resize(cfg.k);
    for (int i = 0; i < cfg.k; ++i)
      topt.fixed_theta(i) = doa_to_freq(cfg.doa_angles_deg[i]);
  }
  std::mt19937_64 rng(trial_seed(cfg.seed, 0));
  const Truth truth = generate_truth(topt, rng);

  CrbProblem p;
  p.fp.theta = truth.theta;
  p.fp.g = truth.w.cwiseAbs();
  p.fp.phi = truth.w.array().arg().matrix();
  p.rows = truth.rows;
  p.sigma2 = truth.sigma2;
  p.bits = cfg.bits;
  p.half_range = cfg.half_range;
  return p;
}

int cmd_crb(const CrbArgs& args) {
  if (args.config_path.empty() == args.params_text.empty())
    throw ConfigError("crb: give exactly one of --config or --params");
  const CrbProblem p = args.params_text.empty() ? problem_from_config(args.config_path)
                                                : problem_from_params(args.params_text);
  const int k = p.fp.k();
  const double hr = p.half_range > 0 ? p.half_range : QuantizerSpec::auto_half_range(k);

  json j;
  j["k"] = k;
  j["l"] = p.fp.l();
  j["n"] = p.rows.n;
  j["rows"] = p.rows.rows;
  j["sigma2"] = p.sigma2;
  json theta = json::array();
  for (int i = 0; i < k; ++i) theta.push_back(p.fp.theta(i));
  j["theta"] = theta;
  j["entries"] = json::array();

  for (int b : p.bits) {
    json e;
    e["bits"] = bits_to_json(b);
    try {
      Mat fim;
      if (b == -1) {
        fim = fim_unquantized(p.fp, p.rows, p.sigma2);
      } else {
        e["half_range"] = hr;
        fim = fim_quantized(p.fp, p.rows, p.sigma2, QuantizerSpec::make(b, hr));
      }
      const CrbResult r = crb_frequencies(fim, k);
      e["crb_freq_trace_db"] = crb_trace_db(r.freq_block);
      json block = json::array();
      for (int a = 0; a < k; ++a) {
        json row = json::array();
        for (int c = 0; c < k; ++c) row.push_back(r.freq_block(a, c));
        block.push_back(row);
      }
      e["freq_block"] = block;
      e["ill_conditioned"] = r.ill_conditioned;
      e["condition"] = r.condition;
    } catch (const std::exception& ex) {
      e["error"] = ex.what();
    }
    j["entries"].push_back(e);
  }
  emit_json(j, args.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gridless line spectral estimation from quantized multi-snapshot measurements"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Monte-Carlo experiment from a JSON config");
  run->add_option("--config", run_args.config_path, "experiment configuration (JSON)")
      ->required();
  run->add_option("--out", run_args.out_dir, "output directory")->required();
  auto* o_seed = run->add_option("--seed", run_args.seed, "override the base seed");
  auto* o_threads = run->add_option("--threads", run_args.threads, "worker thread cap");
  auto* o_bits = run->add_option("--bits", run_args.bits, "override bit depth (integer or \"analog\")");
  auto* o_trials = run->add_option("--trials", run_args.trials, "override the trial count");

  EstimateArgs est_args;
  CLI::App* est = app.add_subcommand("estimate", "estimate one measurement file");
  est->add_option("--input", est_args.input_path, "measurement CSV (m,l,re,im or m,l,re_idx,im_idx)")
      ->required();
  est->add_option("--n", est_args.n, "full aperture size")->required();
  est->add_option("--sigma2", est_args.sigma2, "complex noise variance")->required();
  est->add_option("--quantizer", est_args.quantizer_path,
                  "quantizer description JSON (required for index input)");
  est->add_option("--out", est_args.out_path, "output JSON file (default stdout)");
  est->add_option("--threads", est_args.threads, "worker thread cap");

  CrbArgs crb_args;
  CLI::App* crb = app.add_subcommand("crb", "frequency bound table");
  crb->add_option("--config", crb_args.config_path,
                  "experiment configuration (bounds the trial-0 scene)");
  crb->add_option("--params", crb_args.params_text, "inline scene parameters (JSON)");
  crb->add_option("--out", crb_args.out_path, "output JSON file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      run_args.seed_set = o_seed->count() > 0;
      run_args.threads_set = o_threads->count() > 0;
      run_args.bits_set = o_bits->count() > 0;
      run_args.trials_set = o_trials->count() > 0;
      return cmd_run(run_args);
    }
    if (est->parsed()) return cmd_estimate(est_args);
    if (crb->parsed()) return cmd_crb(crb_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
