#pragma once

// One entry point per method name, shared by the CLI and the benchmark.

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "doa/array_model.hpp"
#include "doa/classical.hpp"
#include "doa/ml.hpp"
#include "doa/peaks.hpp"
#include "doa/sparse.hpp"
#include "doa/subspace.hpp"

namespace doa {

struct MethodParams {
  double grid_step_deg = 0.1;            // spectral methods
  double sparse_grid_step_deg = 0.5;     // l1_svd, sbl, spice dictionaries
  std::optional<double> capon_loading;   // default_capon_loading() when unset
  std::optional<int> lp_order;
  bool forward_backward = false;         // smooth R before covariance-based methods
  L1SvdOptions l1;
  SblOptions sbl;
  SpiceOptions spice;
  MlOptions ml;
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {
      "das",  "capon", "lp",  "music", "fb_music", "root_music", "esprit", "unitary_esprit",
      "dml",  "sml",   "wsf", "l1_svd", "sbl",     "spice"};
  return names;
}

inline const std::vector<std::string>& spectrum_method_names() {
  static const std::vector<std::string> names = {"das", "capon", "music", "sbl", "spice"};
  return names;
}

inline bool is_method(std::string_view name) {
  const auto& n = method_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

inline bool is_spectrum_method(std::string_view name) {
  const auto& n = spectrum_method_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

/// Methods that work on raw snapshots rather than a covariance.
inline bool needs_snapshots(std::string_view name) { return name == "l1_svd" || name == "sbl"; }

inline std::string joined_method_names(const std::vector<std::string>& names = method_names()) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

namespace detail {

inline void check_method(std::string_view name) {
  if (!is_method(name))
    fail(ErrorKind::invalid_input,
         "unknown method '" + std::string(name) + "'; valid methods: " + joined_method_names());
}

inline CovarianceEstimate prepared(const CovarianceEstimate& cov, bool fb) {
  return fb ? forward_backward(cov) : cov;
}

inline SparseResult sparse_run(std::string_view name, const SnapshotMatrix* x, const CovarianceEstimate& cov,
                               const ArrayGeometry& g, int k, const MethodParams& p) {
  const AngularDictionary dict(g, make_grid(-90.0, 90.0, p.sparse_grid_step_deg));
  if (name == "l1_svd") return l1_svd(*x, k, dict, p.l1);
  if (name == "sbl") {
    SblOptions o = p.sbl;
    if (k > 0) o.k_sources = k;
    return sbl(*x, dict, o);
  }
  SpiceOptions o = p.spice;
  if (k > 0) o.k_sources = k;
  return spice(cov, dict, o);
}

inline DoaEstimate run(std::string_view name, const SnapshotMatrix* x, const CovarianceEstimate& raw,
                       const ArrayGeometry& g, int k, const MethodParams& p) {
  check_method(name);
  if (k < 1) fail(ErrorKind::invalid_input, "k_sources must be >= 1");
  if (needs_snapshots(name) && x == nullptr)
    fail(ErrorKind::invalid_input, std::string(name) + " needs snapshot data, not a covariance");
  const CovarianceEstimate cov = detail::prepared(raw, p.forward_backward || name == "fb_music");
  const auto grid = [&] { return make_grid(-90.0, 90.0, p.grid_step_deg); };

  DoaEstimate est;
  if (name == "das") {
    est = find_peaks(das_spectrum(cov, g, grid()), k);
  } else if (name == "capon") {
    est = find_peaks(capon_spectrum(cov, g, grid(), p.capon_loading.value_or(default_capon_loading(cov))), k);
  } else if (name == "lp") {
    est = linear_prediction_doas(cov, g, k, p.lp_order);
  } else if (name == "music" || name == "fb_music") {
    est = find_peaks(music_spectrum(subspace_split(cov, k), g, grid()), k);
  } else if (name == "root_music") {
    est = root_music(subspace_split(cov, k), g, k);
  } else if (name == "esprit") {
    est = esprit(subspace_split(cov, k), g, k);
  } else if (name == "unitary_esprit") {
    est = unitary_esprit(cov, g, k);
  } else if (name == "dml") {
    est = ml_estimate(cov, g, k, MlMethod::dml, p.ml);
  } else if (name == "sml") {
    est = ml_estimate(cov, g, k, MlMethod::sml, p.ml);
  } else if (name == "wsf") {
    est = ml_estimate(cov, g, k, MlMethod::wsf, p.ml);
  } else {
    auto r = sparse_run(name, x, cov, g, k, p);
    est = std::move(r.estimate);
    est.complete = est.angles_deg.size() == static_cast<std::size_t>(k);
  }
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  return est;
}

}  // namespace detail

/// Runs `method` on snapshot data.
inline DoaEstimate estimate(std::string_view method, const SnapshotMatrix& snapshots, int k_sources,
                            const MethodParams& params = {}) {
  return detail::run(method, &snapshots, sample_covariance(snapshots), snapshots.geometry(), k_sources, params);
}

/// Runs `method` on a covariance; l1_svd and sbl need snapshots and fail here.
inline DoaEstimate estimate(std::string_view method, const CovarianceEstimate& cov, const ArrayGeometry& g,
                            int k_sources, const MethodParams& params = {}) {
  return detail::run(method, nullptr, cov, g, k_sources, params);
}

/// Spatial spectrum for das, capon, music (on the evaluation grid) or the
/// sbl/spice power profile (on the sparse grid). `k_sources` sets the MUSIC
/// subspace split and is ignored otherwise.
inline SpatialSpectrum spectrum(std::string_view method, const SnapshotMatrix* snapshots,
                                const CovarianceEstimate& raw, const ArrayGeometry& g, int k_sources,
                                const MethodParams& p = {}) {
  if (!is_spectrum_method(method))
    fail(ErrorKind::invalid_input, "unknown spectrum method '" + std::string(method) +
                                       "'; valid methods: " + joined_method_names(spectrum_method_names()));
  const CovarianceEstimate cov = detail::prepared(raw, p.forward_backward);
  const auto grid = make_grid(-90.0, 90.0, p.grid_step_deg);
  if (method == "das") return das_spectrum(cov, g, grid);
  if (method == "capon") return capon_spectrum(cov, g, grid, p.capon_loading.value_or(default_capon_loading(cov)));
  if (method == "music") return music_spectrum(subspace_split(cov, k_sources), g, grid);
  if (method == "sbl" && snapshots == nullptr) fail(ErrorKind::invalid_input, "sbl needs snapshot data, not a covariance");
  const auto r = detail::sparse_run(method, snapshots, cov, g, 0, p);
  return {make_grid(-90.0, 90.0, p.sparse_grid_step_deg), r.profile};
}

}  // namespace doa
