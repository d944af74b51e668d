#pragma once

// The four activation functions under comparison. ELU and LReLU carry an
// alpha parameter; ReLU and SReLU are fixed. Forward/derivative are scalar
// and pure; matrix wrappers apply them elementwise.
//
// Derivative convention at the kink (x = 0, or x = -1 for SReLU): the
// negative-branch value. For ELU on x <= 0 the derivative is computed
// literally as forward(x) + alpha, so that identity holds bit-for-bit.

#include <optional>
#include <string>

#include "elulab/types.hpp"

namespace elulab {

struct ActivationKind {
    enum class Tag { elu, relu, lrelu, srelu };

    Tag tag = Tag::elu;
    double alpha = 1.0; // meaningful for elu (>0) and lrelu (0<alpha<1)

    static ActivationKind elu(double alpha = 1.0);
    static ActivationKind relu();
    static ActivationKind lrelu(double alpha = 0.1);
    static ActivationKind srelu();

    bool operator==(const ActivationKind&) const = default;
};

namespace act {

double forward(const ActivationKind& kind, double x);
double derivative(const ActivationKind& kind, double x);

/// The value the function approaches as x -> -inf; nullopt for LReLU
/// (its negative tail is unbounded). ReLU's floor is 0.
std::optional<double> saturation_limit(const ActivationKind& kind);

/// Elementwise wrappers.
Matrix forward(const ActivationKind& kind, const Matrix& x);
Matrix derivative(const ActivationKind& kind, const Matrix& x);

/// Parse the config/CLI spelling: "elu", "relu", "lrelu", "srelu", with an
/// optional ":alpha" suffix such as "elu:1.0". Throws ConfigError on unknown
/// names, malformed alphas, or alphas outside the kind's legal range.
ActivationKind parse(const std::string& text);

/// Inverse of parse; alpha is included for elu/lrelu (shortest digits).
std::string to_string(const ActivationKind& kind);

} // namespace act
} // namespace elulab
