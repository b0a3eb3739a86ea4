#include "preqn/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace preqn::linalg {

namespace {

// Largest absolute entry, or 0 for an empty matrix.
double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace

Matrix sym_pinv(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols())
    throw ShapeError("sym_pinv: matrix must be square, got " +
                     std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw ArgumentError("sym_pinv: rel_tol must lie in (0, 1)");
  if (!all_finite(m)) throw NumericError("sym_pinv: input has non-finite entries");

  const double scale = max_abs(m);
  const double asym = max_abs(m - m.transpose());
  if (asym > 1e-10 * std::max(1.0, scale))
    throw NumericError("sym_pinv: input is not symmetric to working tolerance");

  // Work on the symmetrized matrix so tiny (allowed) asymmetry cannot leak
  // into the spectrum.
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw NumericError("sym_pinv: eigendecomposition failed");

  const Vector& lam = eig.eigenvalues();
  const double lam_max = lam.size() > 0 ? lam.maxCoeff() : 0.0;
  const double cutoff = rel_tol * std::max(lam_max, 0.0);

  Vector inv = Vector::Zero(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] > cutoff && lam[i] > 0.0) inv[i] = 1.0 / lam[i];

  Matrix p = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (p + p.transpose());
}

Vector lstsq_psd(const Matrix& g, const Vector& b, double rel_tol) {
  if (g.rows() != g.cols())
    throw ShapeError("lstsq_psd: matrix must be square");
  if (g.rows() != b.size())
    throw ShapeError("lstsq_psd: rhs length " + std::to_string(b.size()) +
                     " does not match matrix order " + std::to_string(g.rows()));
  if (!all_finite(b)) throw NumericError("lstsq_psd: rhs has non-finite entries");
  return sym_pinv(g, rel_tol) * b;
}

double cosine(const Vector& u, const Vector& v) {
  if (u.size() != v.size())
    throw ShapeError("cosine: vectors differ in length");
  const double nu = u.norm();
  const double nv = v.norm();
  constexpr double kZero = 1e-12;
  if (nu < kZero && nv < kZero) return 1.0;
  if (nu < kZero || nv < kZero) return 0.0;
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

bool dual_pinv_identity_check(const Matrix& phi, double tol) {
  if (phi.size() == 0) throw ShapeError("dual_pinv_identity_check: empty matrix");
  const Matrix left = sym_pinv(phi * phi.transpose()) * phi;
  const Matrix right = phi * sym_pinv(phi.transpose() * phi);
  return max_abs(left - right) <= tol;
}

}  // namespace preqn::linalg
