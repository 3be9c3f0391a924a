#pragma once

// Concentrated-likelihood estimators (DML, SML, WSF) and the derivative-free
// cyclic coordinate search that minimizes them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "doa/array_model.hpp"
#include "doa/peaks.hpp"
#include "doa/subspace.hpp"

namespace doa {

enum class MlMethod { dml, sml, wsf };

inline const char* to_string(MlMethod m) {
  switch (m) {
    case MlMethod::dml: return "dml";
    case MlMethod::sml: return "sml";
    case MlMethod::wsf: return "wsf";
  }
  return "?";
}

namespace detail {

inline void check_distinct(const std::vector<double>& angles) {
  for (std::size_t i = 0; i < angles.size(); ++i)
    for (std::size_t j = i + 1; j < angles.size(); ++j)
      if (std::abs(angles[i] - angles[j]) < 1e-6)
        fail(ErrorKind::ill_conditioned, "angles must be distinct (to 1e-6 deg)");
}

/// P_perp(theta) = I - A (A^H A)^{-1} A^H; identity when no angles are given.
inline CMatrix orthogonal_projector(const ArrayGeometry& g, const std::vector<double>& angles) {
  const auto m = g.size();
  if (angles.empty()) return CMatrix::Identity(m, m);
  if (static_cast<Eigen::Index>(angles.size()) >= m)
    fail(ErrorKind::invalid_input, "need fewer angles than sensors");
  check_distinct(angles);
  const CMatrix a = manifold_matrix(g, angles);
  const CMatrix gram = a.adjoint() * a;
  Eigen::SelfAdjointEigenSolver<CMatrix> ge(gram, Eigen::EigenvaluesOnly);
  const double lo = ge.eigenvalues().minCoeff();
  const double hi = ge.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    fail(ErrorKind::ill_conditioned, "array manifold is rank deficient for these angles");
  return CMatrix::Identity(m, m) - a * gram.ldlt().solve(a.adjoint());
}

}  // namespace detail

/// tr[P_perp(theta) R].
inline double dml_cost(const CovarianceEstimate& cov, const ArrayGeometry& g,
                       const std::vector<double>& angles_deg) {
  detail::check_cov(cov, g);
  const CMatrix p = detail::orthogonal_projector(g, angles_deg);
  return std::max((p * cov.matrix).trace().real(), 0.0);
}

struct SmlCost {
  double cost = 0.0;            // -L_c, minimized
  double noise_var_hat = 0.0;   // tr[P_perp R] / (M - K)
  std::vector<std::string> warnings;
};

/// N (M-K) log tr[P_perp R] + N K log tr[P_par R]. Exact covariances count as
/// N = 1.
inline SmlCost sml_cost(const CovarianceEstimate& cov, const ArrayGeometry& g,
                        const std::vector<double>& angles_deg) {
  detail::check_cov(cov, g);
  const auto k = static_cast<double>(angles_deg.size());
  const auto m = static_cast<double>(g.m_sensors());
  if (angles_deg.empty()) fail(ErrorKind::invalid_input, "sml_cost: need at least one angle");
  const CMatrix p = detail::orthogonal_projector(g, angles_deg);
  const double total = cov.matrix.trace().real();
  double perp = (p * cov.matrix).trace().real();
  double par = total - perp;
  SmlCost out;
  if (!(perp > 1e-30)) {
    out.warnings.push_back("sml_cost: tr[P_perp R] floored at 1e-30");
    perp = 1e-30;
  }
  if (!(par > 1e-30)) {
    out.warnings.push_back("sml_cost: tr[P_par R] floored at 1e-30");
    par = 1e-30;
  }
  const double n = cov.is_exact() ? 1.0 : static_cast<double>(cov.n_snapshots);
  out.cost = n * (m - k) * std::log(perp) + n * k * std::log(par);
  out.noise_var_hat = perp / (m - k);
  return out;
}

/// tr[P_perp(theta) Us W Us^H] with W = diag((lambda_k - s2)^2 / lambda_k).
inline double wsf_cost(const SubspaceSplit& split, const ArrayGeometry& g,
                       const std::vector<double>& angles_deg, double noise_var_hat,
                       std::vector<std::string>* warnings = nullptr) {
  if (!(noise_var_hat >= 0.0)) fail(ErrorKind::invalid_input, "wsf_cost: noise variance must be >= 0");
  if (split.signal_basis.rows() != g.size()) fail(ErrorKind::invalid_input, "wsf_cost: subspace size mismatch");
  const CMatrix p = detail::orthogonal_projector(g, angles_deg);
  const CMatrix residual = p * split.signal_basis;
  double cost = 0.0;
  for (Eigen::Index k = 0; k < split.signal_basis.cols(); ++k) {
    const double lambda = split.eigenvalues(k);
    double w = 0.0;
    if (lambda > noise_var_hat) {
      w = (lambda - noise_var_hat) * (lambda - noise_var_hat) / lambda;
    } else if (warnings) {
      warnings->push_back("wsf_cost: signal eigenvalue at or below noise level, weight clamped to 0");
    }
    cost += w * residual.col(k).squaredNorm();
  }
  return std::max(cost, 0.0);
}

/// Mean of the M-K smallest eigenvalues.
inline double subspace_noise_estimate(const SubspaceSplit& split) {
  const auto m = split.eigenvalues.size();
  return split.eigenvalues.tail(m - split.k_sources).mean();
}

struct MlOptions {
  double initial_bracket_deg = 2.0;
  double bracket_shrink = 0.5;
  double stop_change_deg = 1e-4;
  int max_sweeps = 50;
  double line_tol_deg = 1e-7;
};

namespace detail {

// Golden-section minimizer of f on [lo, hi]; returns the best abscissa seen.
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol,
                             double& best_val) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  double best_x = fc <= fd ? c : d;
  best_val = std::min(fc, fd);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
      if (fc < best_val) { best_val = fc; best_x = c; }
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
      if (fd < best_val) { best_val = fd; best_x = d; }
    }
  }
  return best_x;
}

}  // namespace detail

/// Initial angles for the ML search: Root-MUSIC, or the K largest MUSIC peaks
/// on a 0.1 deg grid when rooting is unavailable or fails.
inline std::vector<double> ml_initial_angles(const SubspaceSplit& split, const ArrayGeometry& g, int k) {
  try {
    return root_music(split, g, k).angles_deg;
  } catch (const Error&) {
  }
  const auto peaks = find_peaks(music_spectrum(split, g, make_grid(-90.0, 90.0, 0.1)), k);
  if (!peaks.complete) fail(ErrorKind::estimation_failure, "ml_estimate: initialization found too few peaks");
  return peaks.angles_deg;
}

/// Cyclic coordinate descent on the chosen concentrated cost: each angle in
/// turn gets a golden-section search over a bracket around its current value
/// (halved every sweep); a move is kept only if it lowers the cost.
/// `objective_trace` holds the cost before the first sweep and after each.
inline DoaEstimate ml_estimate(const CovarianceEstimate& cov, const ArrayGeometry& g, int k_sources,
                               MlMethod method, const MlOptions& opts = {}) {
  detail::check_cov(cov, g);
  if (k_sources < 1 || k_sources >= g.m_sensors())
    fail(ErrorKind::invalid_input, "ml_estimate: need 1 <= k_sources < M");

  const SubspaceSplit split = subspace_split(cov, k_sources);
  const double wsf_noise = subspace_noise_estimate(split);

  auto cost = [&](const std::vector<double>& th) -> double {
    try {
      switch (method) {
        case MlMethod::dml: return dml_cost(cov, g, th);
        case MlMethod::sml: return sml_cost(cov, g, th).cost;
        case MlMethod::wsf: return wsf_cost(split, g, th, wsf_noise);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ill_conditioned) throw;
    }
    return std::numeric_limits<double>::infinity();
  };

  std::vector<double> theta = ml_initial_angles(split, g, k_sources);
  double current = cost(theta);
  if (!std::isfinite(current)) fail(ErrorKind::estimation_failure, "ml_estimate: non-finite cost at initialization");

  DoaEstimate est;
  est.objective_trace.push_back(current);
  const double initial = current;
  double bracket = opts.initial_bracket_deg;
  int sweeps = 0;
  while (sweeps < opts.max_sweeps) {
    ++sweeps;
    double max_change = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto line = [&](double x) {
        auto trial = theta;
        trial[i] = x;
        return cost(trial);
      };
      const double lo = std::max(-90.0, theta[i] - bracket);
      const double hi = std::min(90.0, theta[i] + bracket);
      double val = 0.0;
      const double x = detail::golden_section(line, lo, hi, opts.line_tol_deg, val);
      if (std::isfinite(val) && val < current) {
        max_change = std::max(max_change, std::abs(x - theta[i]));
        theta[i] = x;
        current = val;
      }
    }
    est.objective_trace.push_back(current);
    bracket *= opts.bracket_shrink;
    if (max_change < opts.stop_change_deg) break;
  }
  if (!std::isfinite(current)) fail(ErrorKind::estimation_failure, "ml_estimate: non-finite cost");

  std::sort(theta.begin(), theta.end());
  est.angles_deg = theta;
  est.diagnostics["initial_cost"] = initial;
  est.diagnostics["final_cost"] = current;
  est.diagnostics["sweeps"] = sweeps;
  // Both likelihood forms at the final angles, for comparison.
  try {
    est.diagnostics["dml_cost"] = dml_cost(cov, g, theta);
    const auto sml = sml_cost(cov, g, theta);
    est.diagnostics["sml_cost"] = sml.cost;
    est.diagnostics["noise_var_hat"] = sml.noise_var_hat;
  } catch (const Error&) {
  }
  return est;
}

}  // namespace doa
