#pragma once

// Dense complex linear algebra used by every estimator. Everything here is a
// thin contract layer over Eigen: input validation, ordering conventions and
// residual checks live here so the estimators never talk to Eigen solvers
// directly.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doa/error.hpp"

namespace doa {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
struct HermitianEigen {
  RVector eigenvalues;
  CMatrix eigenvectors;  // column i pairs with eigenvalues[i]
};

struct SvdResult {
  CMatrix u;
  RVector singular_values;  // descending, nonnegative
  CMatrix v;
};

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const auto v = m(i, j);
      if (!std::isfinite(std::real(v)) || !std::isfinite(std::imag(v))) return false;
    }
  return true;
}

inline double max_asymmetry(const CMatrix& r) {
  return (r - r.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Eigendecomposition of a Hermitian matrix. Inputs within `sym_tol` of
/// Hermitian (max absolute asymmetry) are symmetrized as (R + R^H)/2 first.
inline HermitianEigen hermitian_eig(const CMatrix& r, double sym_tol = 1e-8) {
  if (r.rows() != r.cols() || r.rows() == 0)
    fail(ErrorKind::invalid_input, "hermitian_eig: matrix must be square and nonempty");
  if (!detail::all_finite(r))
    fail(ErrorKind::invalid_input, "hermitian_eig: non-finite entries");
  const double asym = detail::max_asymmetry(r);
  if (asym > sym_tol)
    fail(ErrorKind::invalid_input,
         "hermitian_eig: matrix is not Hermitian (max asymmetry " + std::to_string(asym) + ")");

  const CMatrix sym = 0.5 * (r + r.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::invalid_input, "hermitian_eig: eigensolver did not converge");

  // Eigen returns ascending order.
  HermitianEigen out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

enum class SvdMode { full, thin };

/// X = U diag(s) V^H with singular values descending. `SvdMode::thin` keeps
/// only min(M, N) columns of U and V.
inline SvdResult svd(const CMatrix& x, SvdMode mode = SvdMode::full) {
  if (!detail::all_finite(x)) fail(ErrorKind::invalid_input, "svd: non-finite entries");
  const unsigned opts = mode == SvdMode::full ? (Eigen::ComputeFullU | Eigen::ComputeFullV)
                                              : (Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::JacobiSVD<CMatrix> solver(x, opts);
  return {solver.matrixU(), solver.singularValues(), solver.matrixV()};
}

inline cplx poly_eval(const std::vector<cplx>& ascending, cplx z) {
  cplx acc{0.0, 0.0};
  for (auto it = ascending.rbegin(); it != ascending.rend(); ++it) acc = acc * z + *it;
  return acc;
}

struct PolyRootOptions {
  bool polish = true;  // a few guarded Newton steps on each companion eigenvalue
  int polish_steps = 3;
};

/// Roots of c0 + c1 z + ... + cn z^n via companion-matrix eigenvalues.
inline std::vector<cplx> poly_roots(std::vector<cplx> coeffs, PolyRootOptions opts = {}) {
  for (const auto& c : coeffs)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
      fail(ErrorKind::invalid_input, "poly_roots: non-finite coefficient");
  while (!coeffs.empty() && coeffs.back() == cplx{0.0, 0.0}) coeffs.pop_back();
  if (coeffs.empty()) fail(ErrorKind::invalid_input, "poly_roots: all coefficients are zero");

  const auto degree = static_cast<Eigen::Index>(coeffs.size()) - 1;
  if (degree == 0) return {};

  const cplx lead = coeffs.back();
  CMatrix companion = CMatrix::Zero(degree, degree);
  for (Eigen::Index j = 0; j < degree; ++j)
    companion(0, j) = -coeffs[static_cast<std::size_t>(degree - 1 - j)] / lead;
  for (Eigen::Index i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;

  Eigen::ComplexEigenSolver<CMatrix> solver(companion, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::estimation_failure, "poly_roots: companion eigensolver did not converge");

  std::vector<cplx> derivative(static_cast<std::size_t>(degree));
  for (Eigen::Index k = 1; k <= degree; ++k)
    derivative[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(k) * coeffs[static_cast<std::size_t>(k)];

  std::vector<cplx> roots(solver.eigenvalues().data(),
                          solver.eigenvalues().data() + degree);
  if (opts.polish) {
    for (auto& z : roots) {
      double best = std::abs(poly_eval(coeffs, z));
      for (int step = 0; step < opts.polish_steps && best > 0.0; ++step) {
        const cplx d = poly_eval(derivative, z);
        if (d == cplx{0.0, 0.0}) break;
        const cplx candidate = z - poly_eval(coeffs, z) / d;
        const double val = std::abs(poly_eval(coeffs, candidate));
        if (!(val < best)) break;
        z = candidate;
        best = val;
      }
    }
  }
  return roots;
}

/// (R + load I)^{-1} B through a Cholesky factorization. A failed
/// factorization or a residual above `residual_tol`·‖B‖ is reported as a
/// singular matrix.
inline CMatrix solve_loaded(const CMatrix& r, double load, const CMatrix& b,
                            double residual_tol = 1e-8) {
  if (!(load >= 0.0) || !std::isfinite(load))
    fail(ErrorKind::invalid_input, "solve_loaded: load must be finite and nonnegative");
  if (r.rows() != r.cols() || r.rows() != b.rows())
    fail(ErrorKind::invalid_input, "solve_loaded: dimension mismatch");
  if (!detail::all_finite(r) || !detail::all_finite(b))
    fail(ErrorKind::invalid_input, "solve_loaded: non-finite entries");

  CMatrix loaded = 0.5 * (r + r.adjoint());
  loaded.diagonal().array() += load;
  Eigen::LLT<CMatrix> llt(loaded);
  if (llt.info() != Eigen::Success)
    fail(ErrorKind::singular_matrix, "solve_loaded: matrix is not positive definite");
  CMatrix x = llt.solve(b);
  const double bnorm = b.norm();
  const double resid = (loaded * x - b).norm();
  if (!detail::all_finite(x) || resid > residual_tol * std::max(bnorm, 1e-300))
    fail(ErrorKind::singular_matrix, "solve_loaded: solve residual too large, matrix is singular");
  return x;
}

}  // namespace doa
