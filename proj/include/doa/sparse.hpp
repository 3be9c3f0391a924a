#pragma once

// Grid-dictionary sparse estimators: L1-SVD (group-sparse fit of the dominant
// left singular vectors), sparse Bayesian learning (EM) and SPICE.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "doa/array_model.hpp"
#include "doa/numerics.hpp"
#include "doa/peaks.hpp"

namespace doa {

class AngularDictionary {
 public:
  AngularDictionary(const ArrayGeometry& g, std::vector<double> grid_deg)
      : grid_(std::move(grid_deg)) {
    for (std::size_t i = 0; i < grid_.size(); ++i)
      if (i > 0 && !(grid_[i] > grid_[i - 1]))
        fail(ErrorKind::invalid_input, "AngularDictionary: grid must be strictly increasing");
    atoms_ = manifold_matrix(g, grid_);
    if (static_cast<Eigen::Index>(grid_.size()) <= g.size())
      warnings_.push_back("AngularDictionary: grid has no more points than sensors");
  }

  /// Default sparse grid, -90:0.5:90.
  explicit AngularDictionary(const ArrayGeometry& g) : AngularDictionary(g, make_grid(-90.0, 90.0, 0.5)) {}

  [[nodiscard]] const std::vector<double>& grid_deg() const noexcept { return grid_; }
  [[nodiscard]] const CMatrix& atoms() const noexcept { return atoms_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return atoms_.cols(); }
  [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::vector<double> grid_;
  CMatrix atoms_;
  std::vector<std::string> warnings_;
};

struct SparseResult {
  std::vector<double> profile;  // one nonnegative power per grid point
  double noise_var = 0.0;       // SBL only
  DoaEstimate estimate;         // objective_trace: per-iteration objective (SBL: evidence)
  bool converged = false;
  int iterations = 0;
};

namespace detail {

// Fills `result.estimate` angles from the peaks of its profile.
inline SparseResult with_peaks(SparseResult result, const AngularDictionary& dict, double rel_threshold,
                               int k_sources) {
  auto& est = result.estimate;
  const auto idx = profile_peaks(result.profile, rel_threshold, k_sources > 0 ? static_cast<std::size_t>(k_sources) : 0);
  est.angles_deg.clear();
  for (auto i : idx) est.angles_deg.push_back(dict.grid_deg()[i]);
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  est.complete = k_sources <= 0 || est.angles_deg.size() == static_cast<std::size_t>(k_sources);
  est.diagnostics["peaks_found"] = static_cast<double>(idx.size());
  for (const auto& w : dict.warnings()) est.warnings.push_back(w);
  return result;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// L1-SVD

struct L1SvdOptions {
  std::optional<double> mu;  // default 0.1 max_g ||a_g^H U_K||
  int max_iter = 2000;
  double tol = 1e-6;         // relative objective change
};

/// Row-sparse fit min 1/2 ||A P - U_K||_F^2 + mu sum_g ||P_g||_2 by proximal
/// gradient with step 1/L, L = sigma_max(A)^2.
inline SparseResult l1_svd_profile(const SnapshotMatrix& snapshots, int k_sources, const CMatrix& a,
                                   const L1SvdOptions& opts = {}) {
  const CMatrix& x = snapshots.data();
  const auto m = x.rows();
  if (a.rows() != m) fail(ErrorKind::invalid_input, "l1_svd: dictionary does not match the array");
  if (k_sources < 1 || k_sources >= std::min<Eigen::Index>(m, x.cols()))
    fail(ErrorKind::invalid_input, "l1_svd: need 1 <= k_sources < min(M, N)");

  const CMatrix uk = svd(x, SvdMode::thin).u.leftCols(k_sources);
  const Eigen::Index g = a.cols();

  const CMatrix corr = a.adjoint() * uk;
  const double max_corr = corr.rowwise().norm().maxCoeff();
  const double mu = opts.mu.value_or(0.1 * max_corr);
  if (!(mu > 0.0)) fail(ErrorKind::invalid_input, "l1_svd: mu must be positive");
  const double lip = hermitian_eig(a * a.adjoint()).eigenvalues(0);

  auto objective = [&](const CMatrix& p) {
    return 0.5 * (a * p - uk).squaredNorm() + mu * p.rowwise().norm().sum();
  };

  CMatrix p = CMatrix::Zero(g, k_sources);
  double obj = objective(p);
  SparseResult out;
  out.estimate.objective_trace.push_back(obj);
  const double thresh = mu / lip;
  for (int it = 1; it <= opts.max_iter; ++it) {
    CMatrix z = p - (a.adjoint() * (a * p - uk)) / lip;
    for (Eigen::Index r = 0; r < g; ++r) {
      const double nrm = z.row(r).norm();
      if (nrm <= thresh) z.row(r).setZero();
      else z.row(r) *= (1.0 - thresh / nrm);
    }
    const double next = objective(z);
    out.iterations = it;
    if (!(next <= obj)) {  // rounding-level stall
      out.converged = true;
      break;
    }
    const double rel = (obj - next) / std::max(std::abs(obj), 1e-300);
    p = std::move(z);
    obj = next;
    out.estimate.objective_trace.push_back(obj);
    if (rel < opts.tol) {
      out.converged = true;
      break;
    }
  }

  out.profile.resize(static_cast<std::size_t>(g));
  for (Eigen::Index r = 0; r < g; ++r) out.profile[static_cast<std::size_t>(r)] = p.row(r).squaredNorm();
  DoaEstimate est;
  est.objective_trace = std::move(out.estimate.objective_trace);
  est.diagnostics["mu"] = mu;
  est.diagnostics["iterations"] = out.iterations;
  est.diagnostics["converged"] = out.converged ? 1.0 : 0.0;
  if (!out.converged) est.warnings.push_back("l1_svd: iteration limit reached");
  out.estimate = std::move(est);
  return out;
}

/// L1-SVD on an angular dictionary; DOAs are the `k_sources` largest local
/// maxima of the row-power profile.
inline SparseResult l1_svd(const SnapshotMatrix& snapshots, int k_sources, const AngularDictionary& dict,
                           const L1SvdOptions& opts = {}) {
  return detail::with_peaks(l1_svd_profile(snapshots, k_sources, dict.atoms(), opts), dict, 0.0, k_sources);
}

// ---------------------------------------------------------------------------
// Sparse Bayesian learning

struct SblOptions {
  int max_iter = 1000;
  double tol = 1e-6;          // max |d gamma| / max gamma
  int k_sources = 0;          // 0: every peak above peak_threshold
  double prune_threshold = 1e-6;
  double peak_threshold = 0.01;
};

/// log-evidence per snapshot without the constant: -log det S - tr(S^{-1} R).
inline double sbl_log_evidence(const CMatrix& model_cov, const CMatrix& sample_cov) {
  Eigen::LLT<CMatrix> llt(model_cov);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().real().array().log().sum();
  return -logdet - llt.solve(sample_cov).trace().real();
}

/// EM iterations of the hierarchical model x ~ CN(A p, s2 I), p ~ CN(0, Gamma).
/// The E-step uses the M x M form (A Gamma A^H + s2 I)^{-1}; columns whose
/// gamma drops below `prune_threshold`·max are removed for good.
/// `objective_trace` records the log-evidence of every iterate.
inline SparseResult sbl_profile(const SnapshotMatrix& snapshots, const CMatrix& a, const SblOptions& opts = {}) {
  const CMatrix& x = snapshots.data();
  const auto m = x.rows();
  const auto n = static_cast<double>(x.cols());
  if (a.rows() != m) fail(ErrorKind::invalid_input, "sbl: dictionary does not match the array");
  const Eigen::Index g = a.cols();
  const CMatrix r = (x * x.adjoint()) / n;
  const double md = static_cast<double>(m);

  // Noise starts at the smallest eigenvalue of R; the delay-and-sum profile,
  // scaled so tr(A Gamma A^H) matches the power above that floor, seeds gamma.
  const double total = r.trace().real();
  double s2 = std::max(hermitian_eig(r).eigenvalues(m - 1), 1e-12);
  RVector gamma(g);
  for (Eigen::Index i = 0; i < g; ++i) gamma(i) = std::max(a.col(i).dot(r * a.col(i)).real(), 0.0);
  const double excess = std::max(total - md * s2, 1e-3 * total);
  if (gamma.sum() > 0.0) gamma *= excess / (md * gamma.sum());
  std::vector<bool> active(static_cast<std::size_t>(g), true);

  SparseResult out;
  auto model_cov = [&](const RVector& gm, double noise) {
    RVector w = gm;
    for (Eigen::Index i = 0; i < g; ++i)
      if (!active[static_cast<std::size_t>(i)] || w(i) < 0.0) w(i) = 0.0;
    CMatrix s = a * w.asDiagonal() * a.adjoint();
    s.diagonal().array() += noise;
    return CMatrix(0.5 * (s + s.adjoint()));
  };

  // The per-snapshot posterior means enter the M-step only through sums over
  // n, which reduce to quadratic forms in R:
  //   (1/N) sum_n |mu_n,i|^2        = gamma_i^2 b_i^H R b_i,  b = Sx^{-1} A
  //   (1/N) sum_n |x_n - A mu_n|^2  = s2^2 tr(Sx^{-1} R Sx^{-1})
  //   tr(A Sigma A^H)               = M s2 - s2^2 tr(Sx^{-1})
  CMatrix rhs(m, g + 2 * m);
  rhs << a, r, CMatrix::Identity(m, m);
  for (int it = 1; it <= opts.max_iter; ++it) {
    const CMatrix sx = model_cov(gamma, s2);
    out.estimate.objective_trace.push_back(sbl_log_evidence(sx, r));

    const CMatrix sol = solve_loaded(sx, 0.0, rhs);
    const auto b = sol.leftCols(g);
    const auto sinv_r = sol.middleCols(g, m);
    const auto sinv = sol.rightCols(m);
    const CMatrix rb = r * b;

    RVector next(g);
    for (Eigen::Index i = 0; i < g; ++i) {
      if (!active[static_cast<std::size_t>(i)]) {
        next(i) = 0.0;
        continue;
      }
      const double gi = gamma(i);
      const double mean_sq = gi * gi * b.col(i).dot(rb.col(i)).real();
      const double post_var = gi - gi * gi * a.col(i).dot(b.col(i)).real();
      next(i) = std::max(mean_sq + post_var, 0.0);
    }
    const double resid = s2 * s2 * (sinv_r * sinv).trace().real();
    const double trace_post = md * s2 - s2 * s2 * sinv.trace().real();
    double s2_next = resid / md + trace_post / md;
    if (!(s2_next >= 1e-12)) {
      s2_next = 1e-12;
      if (out.estimate.warnings.empty()) out.estimate.warnings.push_back("sbl: noise variance floored at 1e-12");
    }

    const double gmax = next.maxCoeff();
    for (Eigen::Index i = 0; i < g; ++i)
      if (active[static_cast<std::size_t>(i)] && next(i) < opts.prune_threshold * gmax) {
        active[static_cast<std::size_t>(i)] = false;
        next(i) = 0.0;
      }

    const double change = (next - gamma).cwiseAbs().maxCoeff() / std::max(gamma.maxCoeff(), 1e-300);
    gamma = next;
    s2 = s2_next;
    out.iterations = it;
    if (change < opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.estimate.objective_trace.push_back(sbl_log_evidence(model_cov(gamma, s2), r));

  out.profile.assign(gamma.data(), gamma.data() + g);
  out.noise_var = s2;
  DoaEstimate est;
  est.objective_trace = std::move(out.estimate.objective_trace);
  est.warnings = std::move(out.estimate.warnings);
  est.diagnostics["noise_var"] = s2;
  est.diagnostics["iterations"] = out.iterations;
  est.diagnostics["converged"] = out.converged ? 1.0 : 0.0;
  out.estimate = std::move(est);
  return out;
}

/// SBL on an angular dictionary; DOAs are local maxima of gamma above
/// `peak_threshold`·max, largest first (capped at `k_sources` when set).
inline SparseResult sbl(const SnapshotMatrix& snapshots, const AngularDictionary& dict, const SblOptions& opts = {}) {
  return detail::with_peaks(sbl_profile(snapshots, dict.atoms(), opts), dict, opts.peak_threshold, opts.k_sources);
}

// ---------------------------------------------------------------------------
// SPICE

struct SpiceOptions {
  double lambda = 0.0;
  int max_iter = 1000;
  double tol = 1e-8;  // relative objective change per sweep
  int k_sources = 0;
  double peak_threshold = 0.01;
  std::vector<Eigen::Index> sweep_order;  // column visiting order; empty: 0..G-1
};

/// tr[(R - A diag(p) A^H)^2] + lambda ||p||_1.
inline double spice_objective(const CMatrix& r, const CMatrix& model, const std::vector<double>& p, double lambda) {
  double l1 = 0.0;
  for (double v : p) l1 += v;
  return (r - model).squaredNorm() + lambda * l1;
}

/// Cyclic coordinate minimization with the clipped closed-form update
/// p_i = max(0, (a_i^H R a_i - a_i^H A_{-i} diag(p_{-i}) A_{-i}^H a_i) / M^2 - lambda / (2 M^2)).
/// A diag(p) A^H is kept up to date by rank-one corrections.
inline SparseResult spice_profile(const CovarianceEstimate& cov, const CMatrix& a, const SpiceOptions& opts = {}) {
  const CMatrix& r = cov.matrix;
  if (a.rows() != r.rows()) fail(ErrorKind::invalid_input, "spice: dictionary does not match the array");
  if (!(opts.lambda >= 0.0)) fail(ErrorKind::invalid_input, "spice: lambda must be >= 0");
  const Eigen::Index g = a.cols();
  const double m = static_cast<double>(a.rows());
  const double norm4 = m * m;  // ||a_i||^4

  std::vector<double> fit(static_cast<std::size_t>(g));
  for (Eigen::Index i = 0; i < g; ++i) fit[static_cast<std::size_t>(i)] = a.col(i).dot(r * a.col(i)).real();

  std::vector<Eigen::Index> order = opts.sweep_order;
  if (order.empty()) {
    order.resize(static_cast<std::size_t>(g));
    for (Eigen::Index i = 0; i < g; ++i) order[static_cast<std::size_t>(i)] = i;
  } else {
    std::vector<bool> seen(static_cast<std::size_t>(g), false);
    for (auto i : order) {
      if (i < 0 || i >= g || seen[static_cast<std::size_t>(i)])
        fail(ErrorKind::invalid_input, "spice: sweep_order must be a permutation of the columns");
      seen[static_cast<std::size_t>(i)] = true;
    }
    if (static_cast<Eigen::Index>(order.size()) != g)
      fail(ErrorKind::invalid_input, "spice: sweep_order must be a permutation of the columns");
  }

  std::vector<double> p(static_cast<std::size_t>(g), 0.0);
  CMatrix model = CMatrix::Zero(r.rows(), r.cols());
  double obj = spice_objective(r, model, p, opts.lambda);
  SparseResult out;
  out.estimate.objective_trace.push_back(obj);

  for (int it = 1; it <= opts.max_iter; ++it) {
    std::vector<double> p_prev = p;
    const CMatrix model_prev = model;
    for (const Eigen::Index i : order) {
      const auto ui = static_cast<std::size_t>(i);
      const auto ai = a.col(i);
      const double others = ai.dot(model * ai).real() - p[ui] * norm4;
      const double updated = std::max(0.0, (fit[ui] - others) / norm4 - opts.lambda / (2.0 * norm4));
      const double delta = updated - p[ui];
      if (delta != 0.0) {
        model.noalias() += delta * ai * ai.adjoint();
        p[ui] = updated;
      }
    }
    const double next = spice_objective(r, model, p, opts.lambda);
    out.iterations = it;
    if (!(next <= obj)) {  // rounding-level stall: keep the previous sweep
      p = std::move(p_prev);
      model = model_prev;
      out.converged = true;
      break;
    }
    const double rel = (obj - next) / std::max(std::abs(obj), 1e-300);
    obj = next;
    out.estimate.objective_trace.push_back(obj);
    if (rel < opts.tol) {
      out.converged = true;
      break;
    }
  }

  out.profile = p;
  DoaEstimate est;
  est.objective_trace = std::move(out.estimate.objective_trace);
  est.diagnostics["iterations"] = out.iterations;
  est.diagnostics["converged"] = out.converged ? 1.0 : 0.0;
  est.diagnostics["residual"] = (r - model).squaredNorm();
  out.estimate = std::move(est);
  return out;
}

inline SparseResult spice(const CovarianceEstimate& cov, const AngularDictionary& dict, const SpiceOptions& opts = {}) {
  return detail::with_peaks(spice_profile(cov, dict.atoms(), opts), dict, opts.peak_threshold, opts.k_sources);
}

}  // namespace doa
