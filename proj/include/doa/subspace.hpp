#pragma once

// Signal/noise subspace machinery: source enumeration, MUSIC, Root-MUSIC,
// ESPRIT (TLS) and Unitary ESPRIT.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "doa/array_model.hpp"
#include "doa/classical.hpp"
#include "doa/numerics.hpp"

namespace doa {

struct SubspaceSplit {
  CMatrix signal_basis;  // M x K
  CMatrix noise_basis;   // M x (M-K)
  RVector eigenvalues;   // descending, all M
  int k_sources = 0;
  /// lambda_K / lambda_{K+1}; large when the split is well separated.
  double eigen_gap = 0.0;
};

inline SubspaceSplit subspace_split(const CovarianceEstimate& cov, int k_sources) {
  const auto m = static_cast<int>(cov.matrix.rows());
  if (k_sources < 1 || k_sources >= m)
    fail(ErrorKind::invalid_input, "subspace_split: need 1 <= k_sources < M");
  HermitianEigen eig = hermitian_eig(cov.matrix);
  SubspaceSplit out;
  out.signal_basis = eig.eigenvectors.leftCols(k_sources);
  out.noise_basis = eig.eigenvectors.rightCols(m - k_sources);
  out.eigenvalues = std::move(eig.eigenvalues);
  out.k_sources = k_sources;
  const double next = out.eigenvalues(k_sources);
  out.eigen_gap = next > 0.0 ? out.eigenvalues(k_sources - 1) / next
                             : std::numeric_limits<double>::infinity();
  return out;
}

// ---------------------------------------------------------------------------
// Source enumeration

enum class Criterion { aic, mdl };

/// Sphericity log-likelihood of the M-k smallest eigenvalues:
/// N (M-k) log(geometric mean / arithmetic mean).
inline double enumeration_log_likelihood(const std::vector<double>& eig_desc, long n_snapshots, int k) {
  const auto m = static_cast<int>(eig_desc.size());
  const int tail = m - k;
  double log_sum = 0.0, sum = 0.0;
  for (int i = k; i < m; ++i) {
    log_sum += std::log(eig_desc[static_cast<std::size_t>(i)]);
    sum += eig_desc[static_cast<std::size_t>(i)];
  }
  const double log_geo = log_sum / tail;
  const double log_arith = std::log(sum / tail);
  return static_cast<double>(n_snapshots) * tail * (log_geo - log_arith);
}

inline double information_criterion(const std::vector<double>& eig_desc, long n_snapshots, int k,
                                    Criterion c) {
  const auto m = static_cast<double>(eig_desc.size());
  const double log_l = enumeration_log_likelihood(eig_desc, n_snapshots, k);
  const double free = k * (2.0 * m - k);
  if (c == Criterion::aic) return -2.0 * log_l + 2.0 * free;
  return -log_l + 0.5 * free * std::log(static_cast<double>(n_snapshots));
}

/// argmin over k = 0..M-1 of AIC or MDL. Non-positive eigenvalues are clamped
/// to 1e-12 (noted in `warnings` when given).
inline int estimate_source_count(std::vector<double> eigenvalues, long n_snapshots, Criterion c,
                                 std::vector<std::string>* warnings = nullptr) {
  if (n_snapshots < 1) fail(ErrorKind::invalid_input, "estimate_source_count: n_snapshots must be >= 1");
  if (eigenvalues.empty()) fail(ErrorKind::invalid_input, "estimate_source_count: no eigenvalues");
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  bool clamped = false;
  for (auto& e : eigenvalues)
    if (!(e > 1e-12)) {
      e = 1e-12;
      clamped = true;
    }
  if (clamped && warnings) warnings->push_back("estimate_source_count: non-positive eigenvalues clamped to 1e-12");

  const auto m = static_cast<int>(eigenvalues.size());
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k < m; ++k) {
    const double v = information_criterion(eigenvalues, n_snapshots, k, c);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  return best;
}

inline int estimate_source_count(const RVector& eigenvalues, long n_snapshots, Criterion c,
                                 std::vector<std::string>* warnings = nullptr) {
  return estimate_source_count(std::vector<double>(eigenvalues.data(), eigenvalues.data() + eigenvalues.size()),
                               n_snapshots, c, warnings);
}

// ---------------------------------------------------------------------------
// MUSIC

inline SpatialSpectrum music_spectrum(const SubspaceSplit& split, const ArrayGeometry& g,
                                      const std::vector<double>& grid) {
  detail::check_grid(grid);
  if (split.noise_basis.rows() != g.size())
    fail(ErrorKind::invalid_input, "music_spectrum: subspace size does not match the array");
  const CMatrix a = manifold_matrix(g, grid);
  const CMatrix proj = split.noise_basis.adjoint() * a;
  SpatialSpectrum out{grid, std::vector<double>(grid.size())};
  for (Eigen::Index i = 0; i < a.cols(); ++i)
    out.values[static_cast<std::size_t>(i)] = 1.0 / std::max(proj.col(i).squaredNorm(), 1e-30);
  return out;
}

/// Coefficients of a^H(z) Pn a(z) = sum_k c_k z^k for k = -(M-1)..(M-1),
/// returned in ascending order (index k + M - 1). c_k collects the entries of
/// the noise projector on diagonal j - i = k, so roots sit at z = e^{j mu}.
inline std::vector<cplx> root_music_coefficients(const CMatrix& noise_basis) {
  const CMatrix pn = noise_basis * noise_basis.adjoint();
  const auto m = pn.rows();
  std::vector<cplx> c(static_cast<std::size_t>(2 * m - 1), cplx{0.0, 0.0});
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c[static_cast<std::size_t>(j - i + m - 1)] += pn(i, j);
  return c;
}

struct UnitCircleRoot {
  cplx z;
  double distance;  // | 1 - |z| |
};

/// Roots of the conjugate-reciprocal Root-MUSIC polynomial, one per
/// (z, 1/z*) pair. Each root is reflected into the closed unit disk, the
/// reflected roots are paired by proximity and a pair is represented by its
/// mean. Sorted by distance to the unit circle, then by phase.
inline std::vector<UnitCircleRoot> paired_disk_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> w;
  w.reserve(roots.size());
  for (const auto& r : roots) w.push_back(std::abs(r) <= 1.0 ? r : 1.0 / std::conj(r));

  struct Pair {
    double d;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < w.size(); ++i)
    for (std::size_t j = i + 1; j < w.size(); ++j) pairs.push_back({std::abs(w[i] - w[j]), i, j});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });

  std::vector<bool> used(w.size(), false);
  std::vector<UnitCircleRoot> out;
  for (const auto& p : pairs) {
    if (used[p.i] || used[p.j]) continue;
    used[p.i] = used[p.j] = true;
    const cplx z = 0.5 * (w[p.i] + w[p.j]);
    out.push_back({z, std::abs(1.0 - std::abs(z))});
  }
  std::stable_sort(out.begin(), out.end(), [](const UnitCircleRoot& a, const UnitCircleRoot& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return std::arg(a.z) < std::arg(b.z);
  });
  return out;
}

namespace detail {

inline void check_unambiguous(const ArrayGeometry& g, const char* who) {
  if (g.spacing_wavelengths() > 0.5)
    fail(ErrorKind::invalid_input, std::string(who) + ": spacing above half a wavelength makes the phase-to-angle map ambiguous");
}

}  // namespace detail

inline DoaEstimate root_music(const SubspaceSplit& split, const ArrayGeometry& g, int k_sources) {
  detail::check_unambiguous(g, "root_music");
  const int m = g.m_sensors();
  if (k_sources < 1 || k_sources > m - 1)
    fail(ErrorKind::invalid_input, "root_music: need 1 <= k_sources <= M-1");
  if (split.noise_basis.rows() != m) fail(ErrorKind::invalid_input, "root_music: subspace size mismatch");

  const auto coeffs = root_music_coefficients(split.noise_basis);
  const double scale = std::abs(coeffs[static_cast<std::size_t>(m - 1)]);
  for (int k = 1; k < m; ++k) {
    const cplx hi = coeffs[static_cast<std::size_t>(m - 1 + k)];
    const cplx lo = coeffs[static_cast<std::size_t>(m - 1 - k)];
    if (std::abs(lo - std::conj(hi)) > 1e-9 * std::max(scale, 1.0))
      fail(ErrorKind::estimation_failure, "root_music: polynomial lacks conjugate symmetry");
  }

  const auto roots = poly_roots(coeffs);
  const auto reps = paired_disk_roots(roots);
  if (reps.size() < static_cast<std::size_t>(k_sources))
    fail(ErrorKind::estimation_failure, "root_music: fewer roots than sources inside the unit disk");

  DoaEstimate est;
  for (int i = 0; i < k_sources; ++i)
    est.angles_deg.push_back(angle_from_phase(g, std::arg(reps[static_cast<std::size_t>(i)].z)));
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  est.diagnostics["max_root_distance"] = reps[static_cast<std::size_t>(k_sources - 1)].distance;
  return est;
}

inline DoaEstimate esprit(const SubspaceSplit& split, const ArrayGeometry& g, int k_sources) {
  detail::check_unambiguous(g, "esprit");
  const int m = g.m_sensors();
  if (k_sources < 1 || k_sources > m - 1 || k_sources > split.signal_basis.cols())
    fail(ErrorKind::invalid_input, "esprit: need 1 <= k_sources <= min(M-1, split K)");
  const CMatrix us = split.signal_basis.leftCols(k_sources);
  const Eigen::Index k = k_sources;

  CMatrix c(m - 1, 2 * k);
  c << us.topRows(m - 1), us.bottomRows(m - 1);
  const SvdResult dec = svd(c, SvdMode::full);
  const CMatrix v12 = dec.v.block(0, k, k, k);
  const CMatrix v22 = dec.v.block(k, k, k, k);

  const RVector sv22 = Eigen::JacobiSVD<CMatrix>(v22).singularValues();
  if (!(sv22(k - 1) > 1e-12)) fail(ErrorKind::estimation_failure, "esprit: V22 is singular");
  const CMatrix psi = -v12 * v22.inverse();

  Eigen::ComplexEigenSolver<CMatrix> es(psi, false);
  if (es.info() != Eigen::Success) fail(ErrorKind::estimation_failure, "esprit: eigensolver failed");
  DoaEstimate est;
  for (Eigen::Index i = 0; i < k; ++i) est.angles_deg.push_back(angle_from_phase(g, std::arg(es.eigenvalues()(i))));
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  est.diagnostics["v22_min_singular_value"] = sv22(k - 1);
  return est;
}

/// ESPRIT in the real domain: forward-backward averaging, real transform
/// Q^H R Q, real signal subspace Es, then K1 Es Y = K2 Es with
/// K1 = 2 Re(Q^H J2 Q), K2 = 2 Im(Q^H J2 Q). Eigenvalues of Y are tan(mu/2).
inline DoaEstimate unitary_esprit(const CovarianceEstimate& cov, const ArrayGeometry& g, int k_sources) {
  detail::check_unambiguous(g, "unitary_esprit");
  detail::check_cov(cov, g);
  const int m = g.m_sensors();
  if (k_sources < 1 || k_sources > m - 1)
    fail(ErrorKind::invalid_input, "unitary_esprit: need 1 <= k_sources <= M-1");

  const RMatrix rt = unitary_transform(forward_backward(cov));
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(rt);
  if (eig.info() != Eigen::Success) fail(ErrorKind::estimation_failure, "unitary_esprit: eigensolver failed");
  const RMatrix es = eig.eigenvectors().rightCols(k_sources);  // ascending order: largest on the right

  CMatrix j2 = CMatrix::Zero(m - 1, m);
  for (int i = 0; i < m - 1; ++i) j2(i, i + 1) = 1.0;
  const CMatrix g2 = unitary_matrix(m - 1).adjoint() * j2 * unitary_matrix(m);
  const RMatrix k1 = 2.0 * g2.real();
  const RMatrix k2 = 2.0 * g2.imag();

  const RMatrix lhs = k1 * es;
  const RMatrix rhs = k2 * es;
  Eigen::JacobiSVD<RMatrix> ls(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector sv = ls.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * std::max(sv(0), 1e-300)))
    fail(ErrorKind::estimation_failure, "unitary_esprit: invariance equation is rank deficient");
  const RMatrix upsilon = ls.solve(rhs);

  Eigen::EigenSolver<RMatrix> ue(upsilon, false);
  if (ue.info() != Eigen::Success) fail(ErrorKind::estimation_failure, "unitary_esprit: eigensolver failed");
  DoaEstimate est;
  double max_imag = 0.0;
  for (Eigen::Index i = 0; i < ue.eigenvalues().size(); ++i) {
    const cplx w = ue.eigenvalues()(i);
    max_imag = std::max(max_imag, std::abs(w.imag()));
    est.angles_deg.push_back(angle_from_phase(g, 2.0 * std::atan(w.real())));
  }
  std::sort(est.angles_deg.begin(), est.angles_deg.end());
  est.diagnostics["max_eigen_imag"] = max_imag;
  return est;
}

}  // namespace doa
