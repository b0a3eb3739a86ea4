#pragma once

#include "preqn/common.hpp"

namespace preqn::linalg {

/// Moore-Penrose pseudoinverse of a symmetric positive semidefinite matrix,
/// computed through a symmetric eigendecomposition. Eigenvalues below
/// rel_tol * lambda_max are treated as exact zeros, so rank-deficient inputs
/// are handled without blowup. The result is re-symmetrized before return.
///
/// Throws ShapeError for non-square input, NumericError for non-finite or
/// materially asymmetric input, ArgumentError for rel_tol outside (0, 1).
Matrix sym_pinv(const Matrix& m, double rel_tol = 1e-10);

/// Minimum-norm least-squares solution z of g z = b for symmetric PSD g,
/// i.e. sym_pinv(g) * b. Componentwise consistent with sym_pinv's cutoff.
Vector lstsq_psd(const Matrix& g, const Vector& b, double rel_tol = 1e-10);

/// Cosine of the angle between u and v, clamped to [-1, 1]. Degenerate
/// conventions: if both norms are below 1e-12 the vectors are treated as
/// identical (returns 1); if exactly one is, they are treated as orthogonal
/// (returns 0).
double cosine(const Vector& u, const Vector& v);

/// Checks max-abs agreement of pinv(phi phi^T) * phi with
/// phi * pinv(phi^T phi). The two are equal in exact arithmetic for any phi;
/// this measures how far the computed routes drift apart.
bool dual_pinv_identity_check(const Matrix& phi, double tol);

}  // namespace preqn::linalg
