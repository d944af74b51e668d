#include "elulab/linalg.hpp"

#include <cmath>
#include <utility>

#include "elulab/errors.hpp"
#include "elulab/kernels.hpp"

namespace elulab::linalg {

namespace {

constexpr double kPivotThreshold = 1e-12;

void require_square(const Matrix& m, const char* who) {
    if (m.rows != m.cols)
        throw ShapeError(std::string(who) + ": matrix must be square, got " + m.shape_str());
}

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " x " +
                         b.shape_str());
    Matrix c(a.rows, b.cols);
    kernels::gemm_nn(a.rows, b.cols, a.cols, a.data.data(), a.cols, b.data.data(), b.cols,
                     c.data.data(), c.cols);
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

Vector matvec(const Matrix& m, const Vector& x) {
    if (m.cols != x.len())
        throw ShapeError("matvec: " + m.shape_str() + " times vector of length " +
                         std::to_string(x.len()));
    Vector y(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) y[i] = kernels::dot(m.cols, m.row(i), x.data.data());
    return y;
}

Matrix outer(const Vector& x, const Vector& y) {
    Matrix m(x.len(), y.len());
    for (std::size_t i = 0; i < x.len(); ++i)
        for (std::size_t j = 0; j < y.len(); ++j) m(i, j) = x[i] * y[j];
    return m;
}

double dot(const Vector& x, const Vector& y) {
    if (x.len() != y.len())
        throw ShapeError("dot: lengths differ, " + std::to_string(x.len()) + " vs " +
                         std::to_string(y.len()));
    return kernels::dot(x.len(), x.data.data(), y.data.data());
}

LuFactors lu_factor(Matrix m) {
    require_square(m, "lu_factor");
    const std::size_t n = m.rows;
    LuFactors f{std::move(m), {}};
    f.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(f.lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(f.lu(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best < kPivotThreshold)
            throw SingularMatrixError(
                "lu_factor: pivot magnitude " + std::to_string(best) + " below 1e-12 at column " +
                    std::to_string(k),
                k);
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
        }
        const double pivot = f.lu(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double l = f.lu(i, k) / pivot;
            f.lu(i, k) = l;
            if (l != 0.0) kernels::axpy(n - k - 1, -l, f.lu.row(k) + k + 1, f.lu.row(i) + k + 1);
        }
    }
    return f;
}

Vector lu_solve(const LuFactors& f, const Vector& rhs) {
    const std::size_t n = f.lu.rows;
    if (rhs.len() != n)
        throw ShapeError("lu_solve: rhs length " + std::to_string(rhs.len()) +
                         " does not match matrix " + f.lu.shape_str());
    Vector x(n);
    // forward substitution on the permuted rhs (L has unit diagonal)
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[f.perm[i]];
        s -= kernels::dot(i, f.lu.row(i), x.data.data());
        x[i] = s;
    }
    // back substitution with U
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        s -= kernels::dot(n - ii - 1, f.lu.row(ii) + ii + 1, x.data.data() + ii + 1);
        x[ii] = s / f.lu(ii, ii);
    }
    return x;
}

Matrix lu_solve(const LuFactors& f, const Matrix& rhs) {
    const std::size_t n = f.lu.rows;
    if (rhs.rows != n)
        throw ShapeError("lu_solve: rhs has " + std::to_string(rhs.rows) +
                         " rows, matrix is " + f.lu.shape_str());
    Matrix x(n, rhs.cols);
    Vector col(n);
    for (std::size_t j = 0; j < rhs.cols; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = rhs(i, j);
        const Vector sol = lu_solve(f, col);
        for (std::size_t i = 0; i < n; ++i) x(i, j) = sol[i];
    }
    return x;
}

Vector solve(const Matrix& m, const Vector& rhs) { return lu_solve(lu_factor(m), rhs); }

Matrix dense_inverse(const Matrix& m) {
    require_square(m, "dense_inverse");
    return lu_solve(lu_factor(m), Matrix::identity(m.rows));
}

double quadratic_form(const Vector& x, const Matrix& m, const Vector& y) {
    require_square(m, "quadratic_form");
    if (x.len() != m.rows || y.len() != m.rows)
        throw ShapeError("quadratic_form: lengths " + std::to_string(x.len()) + ", " +
                         std::to_string(y.len()) + " vs matrix " + m.shape_str());
    const Vector minv_y = lu_solve(lu_factor(m), y);
    return kernels::dot(x.len(), x.data.data(), minv_y.data.data());
}

} // namespace elulab::linalg
