#pragma once

// Per-unit Fisher information analysis: estimate the unit Fisher matrix from
// data, invert it blockwise, form the natural-gradient update, and compute
// the bias-shift correction factor k — with every identity along the way
// checkable against dense brute-force linear algebra.
//
// Conventions: for one unit, a is the incoming activation vector (previous
// layer's outputs), delta is d(-ln p)/d(net input of the unit), g = E(delta a)
// the weight gradient and g0 = E(delta) the bias gradient. The full Fisher
// block is [[A, b], [b^T, c]] with A = E(delta^2 a a^T), b = E(delta^2 a),
// c = E(delta^2); q is the delta^2-weighted reweighting of the data
// distribution p, so A = E_p(delta^2) E_q(a a^T) and b = E_p(delta^2) E_q(a).

#include <cstdint>
#include <string>

#include "elulab/data.hpp"
#include "elulab/network.hpp"

namespace elulab {

struct UnitFisherEstimate {
    Matrix A;           // d x d, E(delta^2 a a^T)
    Vector b;           // d, E(delta^2 a)
    double c = 0.0;     // E(delta^2), the bias-bias entry
    double e_p_delta2 = 0.0;
    Vector e_q_a;       // delta^2-weighted mean of a
    Matrix e_q_aaT;     // delta^2-weighted second moment of a
    Vector e_p_a;       // plain mean of a
    std::size_t n_samples = 0;
};

struct NaturalGradientUpdate {
    Vector delta_w;
    double delta_w0 = 0.0;
    double s = 0.0; // (c - b^T A^-1 b)^-1, the bias-bias entry of F^-1
};

struct BiasShiftReport {
    double shift_plain = 0.0;   // bias shift of the uncorrected update A^-1 g, c^-1 g0
    double shift_natural = 0.0; // bias shift of the natural-gradient update
    double k = 1.0;             // correction factor
    Vector mean_correction;     // k * E_q(a)
    double ridge_used = 0.0;    // epsilon added to make a solve succeed, 0 if none
};

/// How delta is obtained per example: from the observed dataset label, or by
/// sampling labels from the model's own predictive distribution.
enum class DeltaMode { observed_label, model_sampled };

struct LemmaCheckResult {
    std::string name;
    std::size_t cases = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

namespace fisher {

/// Empirical unit Fisher moments over a dataset, streamed in fixed-size
/// chunks with fixed-order accumulation. For model_sampled mode, mc_samples
/// labels are drawn per example from the network's output distribution using
/// the given seed. Throws DegenerateFisherError when every delta is zero.
UnitFisherEstimate estimate_unit_fisher(const Network& net, LayerUnitRef unit, const Dataset& data,
                                        DeltaMode mode, std::size_t mc_samples = 1,
                                        std::uint64_t seed = 0);

/// Inverse of [[A, b], [b^T, c]] in block form: s = (c - b^T A^-1 b)^-1,
/// u = -s A^-1 b, K = A^-1 + u s^-1 u^T. The assembled [[K, u], [u^T, s]]
/// is the dense inverse of the block matrix.
struct BlockInverse {
    Matrix K;
    Vector u;
    double s = 0.0;
};
BlockInverse block_inverse(const Matrix& A, const Vector& b, double c);

/// The natural-gradient update for gradient (g, g0): delta_w0 = s(g0 -
/// b^T A^-1 g), delta_w = A^-1 (g - delta_w0 b), computed via solves. When a
/// solve fails, a ridge epsilon = 1e-8 tr(A)/d is added once; pass
/// ridge_used to observe it.
NaturalGradientUpdate natural_gradient_update(const UnitFisherEstimate& fisher, const Vector& g,
                                              double g0, double* ridge_used = nullptr);

/// s by the variance route: (1 + E_q(a)^T Var_q(a)^-1 E_q(a)) / E_p(delta^2).
/// Agrees with block_inverse's s on consistent moments.
double s_via_variance(const UnitFisherEstimate& fisher);

/// The bias-shift correction factor
///   k = 1 + (E_q(a) - E_p(a))^T Var_q(a)^-1 E_q(a),
/// cross-checked against its dual form
///   k = (1 - E_q^T M^-1 E_q)^-1 (1 - E_p^T M^-1 E_q),  M = E_q(a a^T),
/// with the same ridge applied to Var and M so the two stay algebraically
/// tied; disagreement beyond 1e-9 raises IdentityCheckError.
double correction_factor_k(const UnitFisherEstimate& fisher);

/// Bias shift (E_p(a)^T, 1) (delta_w^T, delta_w0)^T of the plain and the
/// natural update, plus k. Verifies the decomposition
///   shift_natural = (E_p(a) - k E_q(a))^T A^-1 g + k c^-1 g0
/// within 1e-9 (IdentityCheckError otherwise).
BiasShiftReport bias_shift_report(const UnitFisherEstimate& fisher, const Vector& g, double g0);

/// E(a)^T E(a a^T)^-1 E(a), which is <= 1 for consistent moments; a value
/// beyond 1 + 1e-9 raises MomentConsistencyError (the moments cannot have
/// come from one distribution).
double lemma2_bound(const Vector& e_q_a, const Matrix& e_q_aaT);

/// Randomized self-checks of the two block-inverse identities, shared by the
/// command-line checker and the acceptance run. corrupt injects a deliberate
/// error into one case to demonstrate a failing report.
LemmaCheckResult check_lemma1(std::size_t cases, std::uint64_t seed, bool corrupt = false);
LemmaCheckResult check_lemma2(std::size_t cases, std::uint64_t seed, bool corrupt = false);

/// One bias-shift report as a JSON object with unit coordinates attached.
std::string bias_shift_json(const BiasShiftReport& report, const UnitFisherEstimate& fisher,
                            LayerUnitRef unit);

} // namespace fisher
} // namespace elulab
