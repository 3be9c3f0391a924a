#pragma once

// Delay-and-sum, Capon (MVDR) and linear-prediction estimators.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "doa/array_model.hpp"
#include "doa/numerics.hpp"

namespace doa {

namespace detail {

inline void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) fail(ErrorKind::invalid_input, "angle grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    check_angle(grid[i]);
    if (i > 0 && !(grid[i] > grid[i - 1]))
      fail(ErrorKind::invalid_input, "angle grid must be strictly increasing");
  }
}

inline void check_cov(const CovarianceEstimate& cov, const ArrayGeometry& g) {
  if (cov.matrix.rows() != g.size() || cov.matrix.cols() != g.size())
    fail(ErrorKind::invalid_input, "covariance size does not match the array");
}

}  // namespace detail

/// P(theta) = a^H R a / M^2.
inline SpatialSpectrum das_spectrum(const CovarianceEstimate& cov, const ArrayGeometry& g,
                                    const std::vector<double>& grid) {
  detail::check_grid(grid);
  detail::check_cov(cov, g);
  const CMatrix a = manifold_matrix(g, grid);
  const CMatrix ra = cov.matrix * a;
  const double m2 = static_cast<double>(g.m_sensors()) * g.m_sensors();
  SpatialSpectrum out{grid, std::vector<double>(grid.size())};
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const cplx q = a.col(i).dot(ra.col(i));
    if (std::abs(q.imag()) > 1e-10 * std::max(std::abs(q), 1e-300))
      fail(ErrorKind::invalid_input, "das_spectrum: covariance is not Hermitian");
    out.values[static_cast<std::size_t>(i)] = std::max(q.real(), 0.0) / m2;
  }
  return out;
}

/// 1e-3 trace(R)/M for short records (N < 2M), otherwise none.
inline double default_capon_loading(const CovarianceEstimate& cov) {
  const auto m = cov.matrix.rows();
  if (cov.is_exact() || cov.n_snapshots >= 2 * m) return 0.0;
  return 1e-3 * cov.matrix.trace().real() / static_cast<double>(m);
}

/// P(theta) = 1 / a^H (R + loading I)^{-1} a, via a Cholesky solve.
inline SpatialSpectrum capon_spectrum(const CovarianceEstimate& cov, const ArrayGeometry& g,
                                      const std::vector<double>& grid, double loading) {
  detail::check_grid(grid);
  detail::check_cov(cov, g);
  const CMatrix a = manifold_matrix(g, grid);
  const CMatrix w = solve_loaded(cov.matrix, loading, a);
  SpatialSpectrum out{grid, std::vector<double>(grid.size())};
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double q = a.col(i).dot(w.col(i)).real();
    if (!(q > 0.0)) fail(ErrorKind::singular_matrix, "capon_spectrum: non-positive quadratic form");
    out.values[static_cast<std::size_t>(i)] = 1.0 / q;
  }
  return out;
}

/// Linear-prediction DOAs. The prediction-error filter is the minimum
/// eigenvector of the leading (p+1)x(p+1) block of R, scaled so the
/// coefficient of the newest sample is 1; its polynomial roots inside or on
/// the unit circle are ranked by modulus.
inline DoaEstimate linear_prediction_doas(const CovarianceEstimate& cov, const ArrayGeometry& g,
                                          int k_sources, std::optional<int> order = {}) {
  detail::check_cov(cov, g);
  const int m = g.m_sensors();
  const int p = order.value_or(m - 1);
  if (k_sources < 1 || p < k_sources || p > m - 1)
    fail(ErrorKind::invalid_input, "linear_prediction_doas: need 1 <= k_sources <= order <= M-1");

  const CMatrix block = cov.matrix.topLeftCorner(p + 1, p + 1);
  const HermitianEigen eig = hermitian_eig(block);
  const double spread = eig.eigenvalues(0) - eig.eigenvalues(p);
  if (!(spread > 1e-10 * std::max(std::abs(eig.eigenvalues(0)), 1e-300)))
    fail(ErrorKind::degenerate_input, "linear_prediction_doas: spherical covariance has no prediction structure");

  const CVector v = eig.eigenvectors.col(p);
  if (std::abs(v(p)) < 1e-10)
    fail(ErrorKind::degenerate_input, "linear_prediction_doas: minimum eigenvector has a vanishing last entry");

  // w_i multiplies x_{m+i}; w_p = 1. Ascending coefficients of z^p A(z).
  std::vector<cplx> coeffs(static_cast<std::size_t>(p + 1));
  const cplx norm = std::conj(v(p));
  for (int i = 0; i <= p; ++i) coeffs[static_cast<std::size_t>(i)] = std::conj(v(i)) / norm;

  const auto roots = poly_roots(coeffs);
  constexpr double kOnCircle = 1e-6;
  std::vector<cplx> inside;
  for (const auto& z : roots)
    if (std::abs(z) <= 1.0 + kOnCircle) inside.push_back(z);
  std::stable_sort(inside.begin(), inside.end(),
                   [](const cplx& a, const cplx& b) { return std::abs(a) > std::abs(b); });

  DoaEstimate est;
  const auto take = std::min(inside.size(), static_cast<std::size_t>(k_sources));
  for (std::size_t i = 0; i < take; ++i) est.angles_deg.push_back(angle_from_phase(g, std::arg(inside[i])));
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  est.complete = take == static_cast<std::size_t>(k_sources);
  est.diagnostics["order"] = p;
  est.diagnostics["roots_inside"] = static_cast<double>(inside.size());
  if (!inside.empty()) est.diagnostics["selected_max_radius"] = std::abs(inside.front());
  return est;
}

}  // namespace doa
