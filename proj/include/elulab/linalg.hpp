#pragma once

// Minimal dense linear algebra over Matrix/Vector: products, LU with partial
// pivoting, dense inverse, linear solves, and the solve-based quadratic form
// x^T M^-1 y. Everything is real64 and row-major; all functions are pure.

#include <vector>

#include "elulab/types.hpp"

namespace elulab::linalg {

/// Standard matrix product. Shapes must chain (a.cols == b.rows).
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// m (r x c) times x (c) -> vector of length r.
Vector matvec(const Matrix& m, const Vector& x);

/// Outer product x y^T.
Matrix outer(const Vector& x, const Vector& y);

double dot(const Vector& x, const Vector& y);

/// LU factorization with partial pivoting, PA = LU packed into one matrix.
/// Pivots with magnitude below 1e-12 raise SingularMatrixError carrying the
/// elimination column.
struct LuFactors {
    Matrix lu;                   // L (unit diagonal, below) and U (on/above)
    std::vector<std::size_t> perm; // row i of PA is row perm[i] of A
};

LuFactors lu_factor(Matrix m);

Vector lu_solve(const LuFactors& f, const Vector& rhs);

/// Multi-RHS solve; rhs columns are independent right-hand sides.
Matrix lu_solve(const LuFactors& f, const Matrix& rhs);

/// Solve m x = rhs for square m.
Vector solve(const Matrix& m, const Vector& rhs);

/// Inverse via LU against the identity. Intended for oracles and small
/// matrices; the solver paths above are preferred in numerical code.
Matrix dense_inverse(const Matrix& m);

/// x^T M^-1 y computed via a linear solve (no explicit inverse).
double quadratic_form(const Vector& x, const Matrix& m, const Vector& y);

} // namespace elulab::linalg
