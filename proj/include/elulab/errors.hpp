#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elulab {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension mismatch; the message names both shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A pivot fell below the singularity threshold during factorization.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string& msg, std::size_t pivot_index)
        : Error(msg), pivot_index(pivot_index) {}
    std::size_t pivot_index;
};

/// Schur-complement denominator was not positive.
class NotPositiveDefiniteError : public Error {
public:
    using Error::Error;
};

/// Every sampled delta was exactly zero; the unit Fisher matrix is all zeros.
class DegenerateFisherError : public Error {
public:
    using Error::Error;
};

/// Supplied moments cannot come from a real distribution (negative-definite variance).
class MomentConsistencyError : public Error {
public:
    using Error::Error;
};

/// An internally cross-checked algebraic identity failed its tolerance.
class IdentityCheckError : public Error {
public:
    using Error::Error;
};

/// Non-finite value where a finite one is required.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (sizes, fractions, flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Bad file contents (wrong magic, malformed header).
class FormatError : public Error {
public:
    using Error::Error;
};

/// File ended before the header-declared payload.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Layer or unit reference out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite gradient.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, std::size_t layer)
        : Error(msg), layer(layer) {}
    std::size_t layer;
};

/// I/O failure (open, write, rename).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace elulab
