#pragma once

// JSON configs, the binary snapshot format, CSV writers and the estimate JSON
// printed by the CLI. Needs nlohmann/json (vendor/json.hpp).

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doa/eval.hpp"
#include "doa/estimators.hpp"
#include "doa/simulate.hpp"

namespace doa {

using json = nlohmann::json;

/// Everything the simulate/estimate/spectrum commands read from a config.
struct RunConfig {
  Scenario scenario;
  bool exact = false;  // n_snapshots = 0: use the theoretical covariance
  int k_sources = 0;   // defaults to the number of sources
  MethodParams params;
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::invalid_input, where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) fail(ErrorKind::invalid_input, "unknown key '" + key + "' in " + where);
}

template <typename T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::invalid_input, "bad value for '" + what + "'");
  }
}

// A number, or the string "inf" for a noiseless scenario.
inline double parse_snr(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (!j.is_number()) fail(ErrorKind::invalid_input, "snr_db must be a number or \"inf\"");
  return j.get<double>();
}

inline MethodParams parse_params(const json& j, int& k_sources) {
  check_keys(j,
             {"k_sources", "grid_step_deg", "sparse_grid_step_deg", "capon_loading", "lp_order", "forward_backward",
              "l1_mu", "l1_max_iter", "l1_tol", "sbl_max_iter", "sbl_tol", "spice_lambda", "spice_max_iter",
              "spice_tol", "ml_max_sweeps"},
             "method_params");
  MethodParams p;
  auto num = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = get_as<std::decay_t<decltype(dst)>>(j.at(key), key);
  };
  num("k_sources", k_sources);
  num("grid_step_deg", p.grid_step_deg);
  num("sparse_grid_step_deg", p.sparse_grid_step_deg);
  num("forward_backward", p.forward_backward);
  num("l1_max_iter", p.l1.max_iter);
  num("l1_tol", p.l1.tol);
  num("sbl_max_iter", p.sbl.max_iter);
  num("sbl_tol", p.sbl.tol);
  num("spice_lambda", p.spice.lambda);
  num("spice_max_iter", p.spice.max_iter);
  num("spice_tol", p.spice.tol);
  num("ml_max_sweeps", p.ml.max_sweeps);
  if (j.contains("capon_loading")) p.capon_loading = get_as<double>(j.at("capon_loading"), "capon_loading");
  if (j.contains("lp_order")) p.lp_order = get_as<int>(j.at("lp_order"), "lp_order");
  if (j.contains("l1_mu")) p.l1.mu = get_as<double>(j.at("l1_mu"), "l1_mu");
  if (!(p.grid_step_deg > 0.0) || !(p.sparse_grid_step_deg > 0.0))
    fail(ErrorKind::invalid_input, "grid steps must be positive");
  return p;
}

inline const std::set<std::string> kRunKeys = {"geometry", "sources", "snr_db", "n_snapshots", "seed", "method_params"};

inline RunConfig parse_run(const json& j, const std::set<std::string>& allowed) {
  check_keys(j, allowed, "config");
  RunConfig cfg;
  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    check_keys(g, {"m", "spacing"}, "geometry");
    cfg.scenario.geometry = ArrayGeometry(get_as<int>(g.value("m", json(8)), "geometry.m"),
                                          get_as<double>(g.value("spacing", json(0.5)), "geometry.spacing"));
  }
  if (j.contains("sources")) {
    const auto& s = j.at("sources");
    check_keys(s, {"angles", "powers", "coherent"}, "sources");
    if (s.contains("angles")) cfg.scenario.source_angles_deg = get_as<std::vector<double>>(s.at("angles"), "sources.angles");
    if (s.contains("powers")) cfg.scenario.source_powers = get_as<std::vector<double>>(s.at("powers"), "sources.powers");
    if (s.contains("coherent")) cfg.scenario.coherent = get_as<bool>(s.at("coherent"), "sources.coherent");
  }
  if (j.contains("snr_db")) cfg.scenario.snr_db = parse_snr(j.at("snr_db"));
  if (j.contains("n_snapshots")) {
    const long n = get_as<long>(j.at("n_snapshots"), "n_snapshots");
    if (n < 0) fail(ErrorKind::invalid_input, "n_snapshots must be >= 0");
    cfg.exact = n == 0;
    if (n > 0) cfg.scenario.n_snapshots = n;
  }
  if (j.contains("seed")) cfg.scenario.seed = get_as<std::uint64_t>(j.at("seed"), "seed");
  cfg.k_sources = static_cast<int>(cfg.scenario.source_angles_deg.size());
  if (j.contains("method_params")) cfg.params = parse_params(j.at("method_params"), cfg.k_sources);
  cfg.scenario.validate();
  return cfg;
}

inline json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::invalid_input, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  return detail::parse_run(detail::parse_text(text), detail::kRunKeys);
}

/// Run config plus {methods, snr_db_list, n_list, trials, master_seed,
/// workers, random_sources}. The scenario's own snr_db/n_snapshots/seed are ignored.
inline CampaignConfig parse_campaign_config(const std::string& text) {
  const json j = detail::parse_text(text);
  auto allowed = detail::kRunKeys;
  allowed.insert({"methods", "snr_db_list", "n_list", "trials", "master_seed", "workers", "random_sources"});
  const RunConfig run = detail::parse_run(j, allowed);
  CampaignConfig c;
  c.base = run.scenario;
  c.params = run.params;
  if (j.contains("methods")) c.methods = detail::get_as<std::vector<std::string>>(j.at("methods"), "methods");
  if (j.contains("snr_db_list")) {
    if (!j.at("snr_db_list").is_array()) fail(ErrorKind::invalid_input, "snr_db_list must be an array");
    for (const auto& v : j.at("snr_db_list")) c.snr_db_list.push_back(detail::parse_snr(v));
  } else {
    c.snr_db_list = {run.scenario.snr_db};
  }
  if (j.contains("n_list")) c.n_list = detail::get_as<std::vector<long>>(j.at("n_list"), "n_list");
  else c.n_list = {run.scenario.n_snapshots};
  if (j.contains("trials")) c.trials = detail::get_as<std::size_t>(j.at("trials"), "trials");
  if (j.contains("master_seed")) c.master_seed = detail::get_as<std::uint64_t>(j.at("master_seed"), "master_seed");
  if (j.contains("random_sources"))
    c.random_sources = detail::get_as<std::size_t>(j.at("random_sources"), "random_sources");
  if (j.contains("workers")) c.workers = detail::get_as<unsigned>(j.at("workers"), "workers");
  c.validate();
  return c;
}

/// The estimate a config describes: exact covariance when n_snapshots is 0,
/// otherwise trial 0 of the scenario's stream, or `snapshots` when given.
inline DoaEstimate estimate_from_config(std::string_view method, const RunConfig& cfg,
                                        const SnapshotMatrix* snapshots = nullptr) {
  detail::check_method(method);
  if (snapshots) return estimate(method, *snapshots, cfg.k_sources, cfg.params);
  if (cfg.exact) return estimate(method, scenario_covariance(cfg.scenario), cfg.scenario.geometry, cfg.k_sources, cfg.params);
  return estimate(method, generate_snapshots(cfg.scenario), cfg.k_sources, cfg.params);
}

inline SpatialSpectrum spectrum_from_config(std::string_view method, const RunConfig& cfg,
                                            const SnapshotMatrix* snapshots = nullptr) {
  const int k = std::max(cfg.k_sources, 1);
  if (snapshots) return spectrum(method, snapshots, sample_covariance(*snapshots), snapshots->geometry(), k, cfg.params);
  if (cfg.exact) return spectrum(method, nullptr, scenario_covariance(cfg.scenario), cfg.scenario.geometry, k, cfg.params);
  const SnapshotMatrix x = generate_snapshots(cfg.scenario);
  return spectrum(method, &x, sample_covariance(x), x.geometry(), k, cfg.params);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::invalid_input, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Snapshot file: "DOAS", u16 version, u32 M, u32 N, then M*N row-major
// (f64 re, f64 im) pairs, all little-endian.

inline constexpr std::uint16_t kSnapshotVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) fail(ErrorKind::invalid_input, "snapshot file is truncated");
  return v;
}

}  // namespace detail

inline void write_snapshots(std::ostream& out, const SnapshotMatrix& x) {
  out.write("DOAS", 4);
  detail::put_le<std::uint16_t>(out, kSnapshotVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(x.data().rows()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(x.data().cols()));
  for (Eigen::Index r = 0; r < x.data().rows(); ++r)
    for (Eigen::Index c = 0; c < x.data().cols(); ++c) {
      detail::put_le<double>(out, x.data()(r, c).real());
      detail::put_le<double>(out, x.data()(r, c).imag());
    }
}

/// Spacing is not stored in the file; the caller supplies it.
inline SnapshotMatrix read_snapshots(std::istream& in, double spacing_wavelengths = 0.5) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), "DOAS", 4) != 0)
    fail(ErrorKind::invalid_input, "not a snapshot file (bad magic)");
  const auto version = detail::get_le<std::uint16_t>(in);
  if (version != kSnapshotVersion) fail(ErrorKind::invalid_input, "unsupported snapshot file version");
  const auto m = detail::get_le<std::uint32_t>(in);
  const auto n = detail::get_le<std::uint32_t>(in);
  CMatrix data(m, n);
  for (std::uint32_t r = 0; r < m; ++r)
    for (std::uint32_t c = 0; c < n; ++c) {
      const double re = detail::get_le<double>(in);
      const double im = detail::get_le<double>(in);
      data(r, c) = {re, im};
    }
  return SnapshotMatrix(std::move(data), ArrayGeometry(static_cast<int>(m), spacing_wavelengths));
}

// ---------------------------------------------------------------------------
// Text output

/// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline json estimate_to_json(std::string_view method, const DoaEstimate& est) {
  json diag = json::object();
  for (const auto& [k, v] : est.diagnostics) diag[k] = std::isfinite(v) ? json(v) : json(format_number(v));
  return json{{"method", method},
              {"angles_deg", est.angles_deg},
              {"complete", est.complete},
              {"diagnostics", diag},
              {"warnings", est.warnings}};
}

/// The exact line `doa estimate` prints.
inline std::string estimate_json_line(std::string_view method, const DoaEstimate& est) {
  return estimate_to_json(method, est).dump() + "\n";
}

inline void write_spectrum_csv(std::ostream& out, const SpatialSpectrum& s) {
  out << "angle_deg,value\n";
  for (std::size_t i = 0; i < s.angles_deg.size(); ++i)
    out << format_number(s.angles_deg[i]) << ',' << format_number(s.values[i]) << '\n';
}

inline constexpr const char* kResultsHeader =
    "method,snr_db,n_snapshots,m_sensors,trial,angles,rmse_deg,resolved,wall_time_s,failed";

inline void write_results_csv(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    std::string angles;
    for (std::size_t i = 0; i < r.angles_deg.size(); ++i) {
      if (i) angles += ';';
      angles += format_number(r.angles_deg[i]);
    }
    out << r.method << ',' << format_number(r.snr_db) << ',' << r.n_snapshots << ',' << r.m_sensors << ','
        << r.trial << ',' << angles << ',' << (r.rmse_deg ? format_number(*r.rmse_deg) : "") << ','
        << (r.resolved ? 1 : 0) << ',' << format_number(r.wall_time_s) << ',' << (r.failed ? 1 : 0) << '\n';
  }
}

inline constexpr const char* kSummaryHeader =
    "method,snr_db,n_snapshots,trials,failures,failure_rate,rmse_deg,mean_trial_rmse_deg,resolution_probability,"
    "mean_wall_time_s";

inline void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  out << kSummaryHeader << '\n';
  for (const auto& c : cells)
    out << c.method << ',' << format_number(c.snr_db) << ',' << c.n_snapshots << ',' << c.trials << ','
        << c.failures << ',' << format_number(c.failure_rate) << ','
        << (std::isnan(c.rmse_deg) ? "" : format_number(c.rmse_deg)) << ','
        << (std::isnan(c.mean_trial_rmse_deg) ? "" : format_number(c.mean_trial_rmse_deg)) << ','
        << format_number(c.resolution_probability) << ',' << format_number(c.mean_wall_time_s) << '\n';
}

/// Error line for stderr: {"error":{"kind":...,"message":...}}.
inline std::string error_json_line(std::string_view kind, std::string_view message) {
  return json{{"error", {{"kind", kind}, {"message", message}}}}.dump() + "\n";
}

}  // namespace doa
