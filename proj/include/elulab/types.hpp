#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "elulab/errors.hpp"

namespace elulab {

/// Dense row-major real64 matrix. The only 2-d numeric container in the library.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    /// Build from nested braces, validating finiteness.
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws) {
        Matrix m;
        m.rows = rws.size();
        m.cols = m.rows ? rws.begin()->size() : 0;
        m.data.reserve(m.rows * m.cols);
        for (const auto& r : rws) {
            if (r.size() != m.cols)
                throw ShapeError("from_rows: ragged row (expected " + std::to_string(m.cols) +
                                 " columns, got " + std::to_string(r.size()) + ")");
            for (double v : r) m.data.push_back(v);
        }
        m.require_finite("from_rows");
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }

    void require_finite(const char* who) const {
        for (double v : data)
            if (!std::isfinite(v)) throw DomainError(std::string(who) + ": non-finite matrix entry");
    }
};

/// Dense real64 vector.
struct Vector {
    std::vector<double> data;

    Vector() = default;
    explicit Vector(std::size_t n, double fill = 0.0) : data(n, fill) {}
    Vector(std::initializer_list<double> vs) : data(vs) {}

    std::size_t len() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    void require_finite(const char* who) const {
        for (double v : data)
            if (!std::isfinite(v)) throw DomainError(std::string(who) + ": non-finite vector entry");
    }
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* who) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(who) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

} // namespace elulab
