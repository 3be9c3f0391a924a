#pragma once

// ULA geometry, steering vectors, covariance construction and the
// forward-backward / unitary transforms. Angles are degrees at every public
// boundary (broadside = 0, range [-90, 90]) and radians internally.

#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "doa/numerics.hpp"

namespace doa {

inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) noexcept { return deg * kPi / 180.0; }
inline double rad2deg(double rad) noexcept { return rad * 180.0 / kPi; }

/// Uniform linear array: `m_sensors` elements spaced `spacing_wavelengths`
/// (d / lambda) apart.
class ArrayGeometry {
 public:
  explicit ArrayGeometry(int m_sensors, double spacing_wavelengths = 0.5)
      : m_(m_sensors), spacing_(spacing_wavelengths) {
    if (m_sensors < 2) fail(ErrorKind::invalid_input, "ArrayGeometry: need at least 2 sensors");
    if (!(spacing_wavelengths > 0.0) || !std::isfinite(spacing_wavelengths))
      fail(ErrorKind::invalid_input, "ArrayGeometry: spacing must be positive");
  }

  [[nodiscard]] int m_sensors() const noexcept { return m_; }
  [[nodiscard]] Eigen::Index size() const noexcept { return m_; }
  [[nodiscard]] double spacing_wavelengths() const noexcept { return spacing_; }
  /// Spacing above half a wavelength admits grating lobes. Allowed, but callers
  /// should surface it.
  [[nodiscard]] bool aliasing() const noexcept { return spacing_ > 0.5; }

  friend bool operator==(const ArrayGeometry&, const ArrayGeometry&) = default;

 private:
  int m_;
  double spacing_;
};

/// M x N block of array observations.
class SnapshotMatrix {
 public:
  SnapshotMatrix(CMatrix data, ArrayGeometry geometry)
      : data_(std::move(data)), geometry_(geometry) {
    if (data_.rows() != geometry_.size())
      fail(ErrorKind::invalid_input, "SnapshotMatrix: row count must equal m_sensors");
    if (data_.cols() < 1) fail(ErrorKind::invalid_input, "SnapshotMatrix: need at least one snapshot");
    if (!detail::all_finite(data_)) fail(ErrorKind::invalid_input, "SnapshotMatrix: non-finite entries");
  }

  [[nodiscard]] const CMatrix& data() const noexcept { return data_; }
  [[nodiscard]] const ArrayGeometry& geometry() const noexcept { return geometry_; }
  [[nodiscard]] Eigen::Index n_snapshots() const noexcept { return data_.cols(); }

 private:
  CMatrix data_;
  ArrayGeometry geometry_;
};

/// Hermitian covariance plus the snapshot count it came from. A count of 0
/// marks an exact (asymptotic) covariance.
struct CovarianceEstimate {
  CMatrix matrix;
  long n_snapshots = 0;

  [[nodiscard]] bool is_exact() const noexcept { return n_snapshots == 0; }
  [[nodiscard]] Eigen::Index size() const noexcept { return matrix.rows(); }
};

struct SpatialSpectrum {
  std::vector<double> angles_deg;
  std::vector<double> values;

  void validate() const {
    if (angles_deg.size() != values.size())
      fail(ErrorKind::invalid_input, "SpatialSpectrum: length mismatch");
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
      if (angles_deg[i] < -90.0 || angles_deg[i] > 90.0)
        fail(ErrorKind::invalid_input, "SpatialSpectrum: angle outside [-90, 90]");
      if (i > 0 && !(angles_deg[i] > angles_deg[i - 1]))
        fail(ErrorKind::invalid_input, "SpatialSpectrum: grid must be strictly increasing");
      if (!std::isfinite(values[i]) || values[i] < 0.0)
        fail(ErrorKind::invalid_input, "SpatialSpectrum: values must be finite and nonnegative");
    }
  }
};

/// Estimated angles (ascending, degrees) plus whatever the method wants to
/// report about the run.
struct DoaEstimate {
  std::vector<double> angles_deg;
  bool complete = true;  // false when fewer angles than requested were found
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
  std::vector<double> objective_trace;  // iterative methods only
};

/// Uniform grid lo, lo + step, ..., hi (inclusive when hi lands on the grid).
inline std::vector<double> make_grid(double lo_deg, double hi_deg, double step_deg) {
  if (!(step_deg > 0.0) || !(hi_deg >= lo_deg) || lo_deg < -90.0 || hi_deg > 90.0)
    fail(ErrorKind::invalid_input, "make_grid: need -90 <= lo <= hi <= 90 and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((hi_deg - lo_deg) / step_deg + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Snap to the nearest multiple of a small quantum so that 0 and the
    // endpoints are exact.
    const double v = lo_deg + static_cast<double>(i) * step_deg;
    grid[i] = std::round(v * 1e9) / 1e9;
  }
  grid.back() = std::min(grid.back(), 90.0);
  return grid;
}

inline void check_angle(double angle_deg) {
  if (!(std::abs(angle_deg) <= 90.0))
    fail(ErrorKind::invalid_input, "angle " + std::to_string(angle_deg) + " deg outside [-90, 90]");
}

/// Spatial frequency 2 pi (d/lambda) sin(theta) in radians per element.
inline double spatial_frequency(const ArrayGeometry& g, double angle_deg) {
  return 2.0 * kPi * g.spacing_wavelengths() * std::sin(deg2rad(angle_deg));
}

/// Inverse of `spatial_frequency`; the sine is clamped to [-1, 1].
inline double angle_from_phase(const ArrayGeometry& g, double phase_rad) {
  const double s = phase_rad / (2.0 * kPi * g.spacing_wavelengths());
  return rad2deg(std::asin(std::clamp(s, -1.0, 1.0)));
}

inline CVector steering_vector(const ArrayGeometry& g, double angle_deg) {
  check_angle(angle_deg);
  const double mu = spatial_frequency(g, angle_deg);
  CVector a(g.size());
  a(0) = cplx{1.0, 0.0};
  for (Eigen::Index m = 1; m < g.size(); ++m) a(m) = std::polar(1.0, mu * static_cast<double>(m));
  return a;
}

inline CMatrix manifold_matrix(const ArrayGeometry& g, const std::vector<double>& angles_deg) {
  if (angles_deg.empty()) fail(ErrorKind::invalid_input, "manifold_matrix: empty angle list");
  CMatrix a(g.size(), static_cast<Eigen::Index>(angles_deg.size()));
  for (std::size_t k = 0; k < angles_deg.size(); ++k)
    a.col(static_cast<Eigen::Index>(k)) = steering_vector(g, angles_deg[k]);
  return a;
}

/// |a^H(look) a(source)| / M.
inline double beampattern(const ArrayGeometry& g, double look_deg, double source_deg) {
  const CVector look = steering_vector(g, look_deg);
  const CVector src = steering_vector(g, source_deg);
  return std::abs(look.dot(src)) / static_cast<double>(g.m_sensors());
}

/// (1/N) X X^H.
inline CovarianceEstimate sample_covariance(const SnapshotMatrix& snapshots) {
  const CMatrix& x = snapshots.data();
  CMatrix r = (x * x.adjoint()) / static_cast<double>(x.cols());
  r = 0.5 * (r + r.adjoint()).eval();
  return {std::move(r), static_cast<long>(x.cols())};
}

/// A Rs A^H + noise_var I. Uncorrelated sources use Rs = diag(powers); when a
/// coherence vector b is given, Rs = c c^H with c_k = b_k sqrt(p_k).
inline CovarianceEstimate exact_covariance(const ArrayGeometry& g,
                                           const std::vector<double>& angles_deg,
                                           const std::vector<double>& powers, double noise_var,
                                           const std::optional<std::vector<cplx>>& coherence = {}) {
  if (angles_deg.size() != powers.size())
    fail(ErrorKind::invalid_input, "exact_covariance: angles and powers differ in length");
  if (!(noise_var >= 0.0)) fail(ErrorKind::invalid_input, "exact_covariance: noise_var must be >= 0");
  for (double p : powers)
    if (!(p > 0.0)) fail(ErrorKind::invalid_input, "exact_covariance: source powers must be positive");

  CMatrix r = CMatrix::Identity(g.size(), g.size()) * noise_var;
  if (!angles_deg.empty()) {
    const CMatrix a = manifold_matrix(g, angles_deg);
    const auto k = static_cast<Eigen::Index>(angles_deg.size());
    if (coherence) {
      if (coherence->size() != angles_deg.size())
        fail(ErrorKind::invalid_input, "exact_covariance: coherence vector length mismatch");
      CVector c(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        const cplx b = (*coherence)[static_cast<std::size_t>(i)];
        if (std::abs(std::abs(b) - 1.0) > 1e-12)
          fail(ErrorKind::invalid_input, "exact_covariance: coherence weights must be unit modulus");
        c(i) = b * std::sqrt(powers[static_cast<std::size_t>(i)]);
      }
      const CVector ac = a * c;
      r += ac * ac.adjoint();
    } else {
      RVector p(k);
      for (Eigen::Index i = 0; i < k; ++i) p(i) = powers[static_cast<std::size_t>(i)];
      r += a * p.asDiagonal() * a.adjoint();
    }
  }
  r = 0.5 * (r + r.adjoint()).eval();
  return {std::move(r), 0};
}

/// In-phase coherence weights (all ones).
inline std::vector<cplx> in_phase_weights(std::size_t k) { return std::vector<cplx>(k, cplx{1.0, 0.0}); }

/// J R^* J.
inline CMatrix backward_covariance(const CMatrix& r) {
  const Eigen::Index m = r.rows();
  CMatrix b(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) b(i, j) = std::conj(r(m - 1 - i, m - 1 - j));
  return b;
}

inline CovarianceEstimate forward_backward(const CovarianceEstimate& cov) {
  if (cov.matrix.rows() != cov.matrix.cols())
    fail(ErrorKind::invalid_input, "forward_backward: matrix must be square");
  CMatrix out = 0.5 * (cov.matrix + backward_covariance(cov.matrix));
  out = 0.5 * (out + out.adjoint()).eval();
  return {std::move(out), cov.n_snapshots};
}

/// Sparse unitary matrix Q_M with J Q^* = Q, mapping centro-Hermitian
/// matrices to real ones via Q^H R Q.
inline CMatrix unitary_matrix(Eigen::Index m) {
  if (m < 1) fail(ErrorKind::invalid_input, "unitary_matrix: size must be positive");
  const Eigen::Index n = m / 2;
  const double s = 1.0 / std::sqrt(2.0);
  const cplx j{0.0, 1.0};
  CMatrix q = CMatrix::Zero(m, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    q(i, i) = s;                          // [ I   jI ]
    q(i, m - n + i) = j * s;              // [ 0   0  ]  (odd m: centre row)
    q(m - 1 - i, i) = s;                  // [ J  -jJ ]
    q(m - 1 - i, m - n + i) = -j * s;
  }
  if (m % 2 == 1) q(n, n) = 1.0;
  return q;
}

inline double centro_hermitian_defect(const CMatrix& r) {
  return (backward_covariance(r) - r).cwiseAbs().maxCoeff();
}

/// Real symmetric Q^H R Q for a centro-Hermitian R.
inline RMatrix unitary_transform(const CovarianceEstimate& cov, double tol = 1e-8) {
  const CMatrix& r = cov.matrix;
  if (r.rows() != r.cols()) fail(ErrorKind::invalid_input, "unitary_transform: matrix must be square");
  if (centro_hermitian_defect(r) > tol)
    fail(ErrorKind::precondition,
         "unitary_transform: covariance is not centro-Hermitian; apply forward_backward first");
  const CMatrix q = unitary_matrix(r.rows());
  const CMatrix t = q.adjoint() * r * q;
  RMatrix out = t.real();
  return 0.5 * (out + out.transpose());
}

}  // namespace doa
