#include "elulab/fisher.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "elulab/errors.hpp"
#include "elulab/io.hpp"
#include "elulab/kernels.hpp"
#include "elulab/linalg.hpp"
#include "elulab/rng.hpp"

namespace elulab::fisher {

namespace {

constexpr double kRidgeScale = 1e-8;
constexpr double kSchurFloor = 1e-12;
constexpr double kIdentityTol = 1e-9;

double ridge_epsilon(const Matrix& m) {
    double trace = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) trace += m(i, i);
    return kRidgeScale * trace / double(m.rows);
}

// LU factor m, retrying once with a ridge on the diagonal if the plain
// factorization hits a tiny pivot. Reports the epsilon actually added.
struct RidgedFactors {
    linalg::LuFactors lu;
    double epsilon = 0.0;
};

RidgedFactors factor_with_ridge(const Matrix& m) {
    try {
        return {linalg::lu_factor(m), 0.0};
    } catch (const SingularMatrixError&) {
        const double eps = ridge_epsilon(m);
        Matrix ridged = m;
        for (std::size_t i = 0; i < m.rows; ++i) ridged(i, i) += eps;
        return {linalg::lu_factor(ridged), eps}; // rethrows if still singular
    }
}

// Sample one label per row from softmax output probabilities.
std::vector<std::uint32_t> sample_labels(const Matrix& probs, Rng& rng) {
    std::vector<std::uint32_t> labels(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double u = rng.uniform();
        double cum = 0.0;
        std::uint32_t pick = std::uint32_t(probs.cols - 1);
        for (std::size_t j = 0; j < probs.cols; ++j) {
            cum += probs(i, j);
            if (u < cum) {
                pick = std::uint32_t(j);
                break;
            }
        }
        labels[i] = pick;
    }
    return labels;
}

} // namespace

UnitFisherEstimate estimate_unit_fisher(const Network& net, LayerUnitRef unit, const Dataset& data,
                                        DeltaMode mode, std::size_t mc_samples,
                                        std::uint64_t seed) {
    if (data.size() == 0) throw ConfigError("estimate_unit_fisher: data set is empty");
    if (mode == DeltaMode::observed_label && !data.has_labels())
        throw ConfigError("estimate_unit_fisher: observed-label mode needs labeled data");
    if (mode == DeltaMode::model_sampled && mc_samples < 1)
        throw ConfigError("estimate_unit_fisher: model-sampled mode needs mc_samples >= 1");
    if (unit.layer < 1 || unit.layer > net.layer_count())
        throw IndexError("estimate_unit_fisher: layer " + std::to_string(unit.layer) +
                         " out of range 1.." + std::to_string(net.layer_count()));

    const std::size_t d = net.layers[unit.layer - 1].fan_in();
    const std::size_t rounds = mode == DeltaMode::observed_label ? 1 : mc_samples;
    Matrix sum_d2aa(d, d);
    Vector sum_d2a(d), sum_a(d);
    double sum_delta2 = 0.0;
    Rng rng(seed);

    constexpr std::size_t kChunk = 2048;
    Matrix chunk, scaled;
    std::vector<std::uint32_t> labels;
    for (std::size_t from = 0; from < data.size(); from += kChunk) {
        const std::size_t n = std::min(kChunk, data.size() - from);
        chunk = Matrix(n, data.dim());
        std::copy_n(data.inputs.row(from), n * data.dim(), chunk.data.begin());
        ForwardTrace trace = forward(net, chunk);
        const Matrix& incoming = trace.incoming(unit.layer - 1);

        for (std::size_t round = 0; round < rounds; ++round) {
            if (mode == DeltaMode::observed_label)
                labels.assign(data.labels.begin() + long(from),
                              data.labels.begin() + long(from + n));
            else
                labels = sample_labels(trace.output(), rng);
            Vector delta = backprop_logprob_delta(net, trace, labels, unit);

            scaled = incoming;
            for (std::size_t i = 0; i < n; ++i) {
                const double d2 = delta[i] * delta[i];
                sum_delta2 += d2;
                kernels::scale(d, d2, scaled.row(i));
                for (std::size_t j = 0; j < d; ++j) {
                    sum_d2a[j] += scaled(i, j);
                    sum_a[j] += incoming(i, j);
                }
            }
            kernels::gemm_tn(d, d, n, scaled.data.data(), d, incoming.data.data(), d,
                             sum_d2aa.data.data(), d, /*accumulate=*/true);
        }
    }

    if (!(sum_delta2 > 0.0))
        throw DegenerateFisherError("estimate_unit_fisher: delta is zero on every sample");

    // the accumulated product rounds the two triangles slightly differently;
    // make the symmetry exact
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            const double m = 0.5 * (sum_d2aa(i, j) + sum_d2aa(j, i));
            sum_d2aa(i, j) = sum_d2aa(j, i) = m;
        }

    const double total = double(data.size()) * double(rounds);
    UnitFisherEstimate est;
    est.n_samples = std::size_t(total);
    est.e_p_delta2 = sum_delta2 / total;
    est.c = est.e_p_delta2;
    est.A = Matrix(d, d);
    est.e_q_aaT = Matrix(d, d);
    for (std::size_t i = 0; i < d * d; ++i) {
        est.A.data[i] = sum_d2aa.data[i] / total;
        est.e_q_aaT.data[i] = sum_d2aa.data[i] / sum_delta2;
    }
    est.b = Vector(d);
    est.e_q_a = Vector(d);
    est.e_p_a = Vector(d);
    for (std::size_t j = 0; j < d; ++j) {
        est.b[j] = sum_d2a[j] / total;
        est.e_q_a[j] = sum_d2a[j] / sum_delta2;
        est.e_p_a[j] = sum_a[j] / total;
    }
    return est;
}

BlockInverse block_inverse(const Matrix& A, const Vector& b, double c) {
    if (A.rows != A.cols || A.rows != b.len())
        throw ShapeError("block_inverse: A is " + A.shape_str() + " with b of length " +
                         std::to_string(b.len()));
    const linalg::LuFactors f = linalg::lu_factor(A);
    const Vector Ainv_b = linalg::lu_solve(f, b);
    const double schur = c - linalg::dot(b, Ainv_b);
    if (schur <= kSchurFloor)
        throw NotPositiveDefiniteError("block_inverse: Schur complement " +
                                       io::format_double(schur) + " is not positive");
    BlockInverse out;
    out.s = 1.0 / schur;
    out.u = Vector(b.len());
    for (std::size_t i = 0; i < b.len(); ++i) out.u[i] = -out.s * Ainv_b[i];
    out.K = linalg::dense_inverse(A);
    for (std::size_t i = 0; i < b.len(); ++i)
        for (std::size_t j = 0; j < b.len(); ++j)
            out.K(i, j) += out.u[i] * out.u[j] / out.s;
    return out;
}

NaturalGradientUpdate natural_gradient_update(const UnitFisherEstimate& fisher, const Vector& g,
                                              double g0, double* ridge_used) {
    if (g.len() != fisher.b.len())
        throw ShapeError("natural_gradient_update: gradient length " + std::to_string(g.len()) +
                         " vs Fisher dimension " + std::to_string(fisher.b.len()));
    const RidgedFactors rf = factor_with_ridge(fisher.A);
    if (ridge_used) *ridge_used = rf.epsilon;
    const Vector Ainv_g = linalg::lu_solve(rf.lu, g);
    const Vector Ainv_b = linalg::lu_solve(rf.lu, fisher.b);
    const double schur = fisher.c - linalg::dot(fisher.b, Ainv_b);
    if (schur <= kSchurFloor)
        throw NotPositiveDefiniteError("natural_gradient_update: Schur complement " +
                                       io::format_double(schur) + " is not positive");
    NaturalGradientUpdate out;
    out.s = 1.0 / schur;
    out.delta_w0 = out.s * (g0 - linalg::dot(fisher.b, Ainv_g));
    out.delta_w = Vector(g.len());
    for (std::size_t i = 0; i < g.len(); ++i)
        out.delta_w[i] = Ainv_g[i] - out.delta_w0 * Ainv_b[i];
    return out;
}

namespace {

Matrix variance_of_q(const UnitFisherEstimate& fisher) {
    Matrix var = fisher.e_q_aaT;
    for (std::size_t i = 0; i < var.rows; ++i)
        for (std::size_t j = 0; j < var.cols; ++j) var(i, j) -= fisher.e_q_a[i] * fisher.e_q_a[j];
    return var;
}

} // namespace

double s_via_variance(const UnitFisherEstimate& fisher) {
    if (!(fisher.e_p_delta2 > 0.0))
        throw DegenerateFisherError("s_via_variance: E_p(delta^2) must be positive");
    const RidgedFactors rf = factor_with_ridge(variance_of_q(fisher));
    const Vector var_inv_eq = linalg::lu_solve(rf.lu, fisher.e_q_a);
    return (1.0 + linalg::dot(fisher.e_q_a, var_inv_eq)) / fisher.e_p_delta2;
}

double correction_factor_k(const UnitFisherEstimate& fisher) {
    Matrix var = variance_of_q(fisher);
    RidgedFactors var_f = factor_with_ridge(var);

    const Vector var_inv_eq = linalg::lu_solve(var_f.lu, fisher.e_q_a);
    double k = 1.0;
    for (std::size_t i = 0; i < fisher.e_q_a.len(); ++i)
        k += (fisher.e_q_a[i] - fisher.e_p_a[i]) * var_inv_eq[i];

    // Cross-check against the second-moment form, which goes through an
    // independent factorization. Only meaningful without a ridge: the ridge
    // of 1e-8 * trace / d puts the condition number at 1e8 or worse, so two
    // separate solve paths cannot be expected to agree to 1e-9 on a
    // rank-deficient moment estimate (the variance form is still the answer).
    if (var_f.epsilon == 0.0) {
        const linalg::LuFactors m_f = linalg::lu_factor(fisher.e_q_aaT);
        const Vector m_inv_eq = linalg::lu_solve(m_f, fisher.e_q_a);
        const double denom = 1.0 - linalg::dot(fisher.e_q_a, m_inv_eq);
        const double k_dual = (1.0 - linalg::dot(fisher.e_p_a, m_inv_eq)) / denom;
        if (std::abs(k - k_dual) > kIdentityTol * std::max(1.0, std::abs(k)))
            throw IdentityCheckError("correction_factor_k: variance form " +
                                     io::format_double(k) + " disagrees with second-moment form " +
                                     io::format_double(k_dual));
    }
    return k;
}

BiasShiftReport bias_shift_report(const UnitFisherEstimate& fisher, const Vector& g, double g0) {
    if (!(fisher.c > 0.0))
        throw DegenerateFisherError("bias_shift_report: c must be positive");
    double ridge = 0.0;
    const NaturalGradientUpdate nat = natural_gradient_update(fisher, g, g0, &ridge);

    BiasShiftReport report;
    report.ridge_used = ridge;
    report.shift_natural = linalg::dot(fisher.e_p_a, nat.delta_w) + nat.delta_w0;

    // plain update: A^-1 g and c^-1 g0 with no cross terms
    Matrix A = fisher.A;
    if (ridge != 0.0)
        for (std::size_t i = 0; i < A.rows; ++i) A(i, i) += ridge;
    const linalg::LuFactors f = linalg::lu_factor(A);
    const Vector Ainv_g = linalg::lu_solve(f, g);
    report.shift_plain = linalg::dot(fisher.e_p_a, Ainv_g) + g0 / fisher.c;

    report.k = correction_factor_k(fisher);
    report.mean_correction = Vector(fisher.e_q_a.len());
    for (std::size_t i = 0; i < fisher.e_q_a.len(); ++i)
        report.mean_correction[i] = report.k * fisher.e_q_a[i];

    // Decomposition check: with m = A^-1 b the natural shift must equal
    // (E_p - k_dual E_q)^T A^-1 g + k_dual c^-1 g0, where k_dual is the
    // second-moment form of k taken from the same factorization (exact
    // algebra given b = c E_q, so any drift signals a computation bug).
    // Skipped when a ridge was needed: on a rank-deficient estimate the
    // solves carry 1/epsilon-scale null-space components, and 1e-9
    // agreement is out of reach no matter how the algebra is arranged.
    if (ridge == 0.0) {
        const Vector Ainv_b = linalg::lu_solve(f, fisher.b);
        const double k_dual = (1.0 - linalg::dot(fisher.e_p_a, Ainv_b)) /
                              (1.0 - linalg::dot(fisher.e_q_a, Ainv_b));
        double decomposed = k_dual * g0 / fisher.c;
        for (std::size_t i = 0; i < g.len(); ++i)
            decomposed += (fisher.e_p_a[i] - k_dual * fisher.e_q_a[i]) * Ainv_g[i];
        if (std::abs(decomposed - report.shift_natural) >
            kIdentityTol * std::max(1.0, std::abs(report.shift_natural)))
            throw IdentityCheckError("bias_shift_report: decomposition " +
                                     io::format_double(decomposed) + " vs natural shift " +
                                     io::format_double(report.shift_natural));
    }
    return report;
}

double lemma2_bound(const Vector& e_q_a, const Matrix& e_q_aaT) {
    const double q = linalg::quadratic_form(e_q_a, e_q_aaT, e_q_a);
    if (q > 1.0 + kIdentityTol)
        throw MomentConsistencyError("lemma2_bound: E(a)^T E(aa^T)^-1 E(a) = " +
                                     io::format_double(q) +
                                     " exceeds 1; moments are inconsistent");
    return q;
}

LemmaCheckResult check_lemma1(std::size_t cases, std::uint64_t seed, bool corrupt) {
    LemmaCheckResult result{"lemma1 block inverse", cases, 0.0, kIdentityTol, false};
    Rng rng(seed);
    for (std::size_t case_i = 0; case_i < cases; ++case_i) {
        const std::size_t n = 2 + case_i % 11; // dims 2..12
        // random SPD: G^T G / n plus a diagonal boost
        Matrix g(n, n);
        for (double& v : g.data) v = rng.normal();
        Matrix m(n, n);
        kernels::gemm_tn(n, n, n, g.data.data(), n, g.data.data(), n, m.data.data(), n);
        for (std::size_t i = 0; i < n * n; ++i) m.data[i] /= double(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) += 0.2 + 0.8 * rng.uniform();

        // partition into the leading (n-1) block, the border column, and the corner
        const std::size_t d = n - 1;
        Matrix a(d, d);
        Vector b(d);
        for (std::size_t i = 0; i < d; ++i) {
            b[i] = m(i, d);
            for (std::size_t j = 0; j < d; ++j) a(i, j) = m(i, j);
        }
        const BlockInverse bi = block_inverse(a, b, m(d, d));
        Matrix assembled(n, n);
        for (std::size_t i = 0; i < d; ++i) {
            assembled(i, d) = assembled(d, i) = bi.u[i];
            for (std::size_t j = 0; j < d; ++j) assembled(i, j) = bi.K(i, j);
        }
        assembled(d, d) = bi.s;
        if (corrupt && case_i == cases / 2) assembled(0, 0) += 1e-3;

        const Matrix dense = linalg::dense_inverse(m);
        for (std::size_t i = 0; i < n * n; ++i)
            result.max_error = std::max(result.max_error,
                                        std::abs(assembled.data[i] - dense.data[i]));
    }
    result.passed = result.max_error <= result.tolerance;
    return result;
}

LemmaCheckResult check_lemma2(std::size_t cases, std::uint64_t seed, bool corrupt) {
    LemmaCheckResult result{"lemma2 moment identities", cases, 0.0, kIdentityTol, false};
    Rng rng(seed);
    for (std::size_t case_i = 0; case_i < cases; ++case_i) {
        const std::size_t d = 2 + case_i % 7; // dims 2..8
        const std::size_t n = 4 * d + 8;      // enough points for full rank
        // consistent moments from an actual point cloud
        Matrix points(n, d);
        for (double& v : points.data) v = 2.0 * rng.normal() + rng.uniform();
        Vector mean(d);
        Matrix second(d, d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) mean[j] += points(i, j) / double(n);
        kernels::gemm_tn(d, d, n, points.data.data(), d, points.data.data(), d,
                         second.data.data(), d);
        for (double& v : second.data) v /= double(n);

        double bound = lemma2_bound(mean, second);
        if (corrupt && case_i == cases / 2) bound += 1e-3;
        if (bound > 1.0 + kIdentityTol)
            result.max_error = std::max(result.max_error, bound - 1.0);

        // second identity: (1 - bound)^-1 = 1 + E^T Var^-1 E
        Matrix var = second;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) var(i, j) -= mean[i] * mean[j];
        const double rhs = 1.0 + linalg::quadratic_form(mean, var, mean);
        const double lhs = 1.0 / (1.0 - bound);
        result.max_error =
            std::max(result.max_error, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));

        // third identity: the two forms of the correction factor agree. The
        // q moments come from a positive reweighting of the same cloud (the
        // role the delta^2 weights play), so mean/second stand in for the
        // plain-distribution side and wmean/wsecond for the reweighted one.
        std::vector<double> w(n);
        double wsum = 0.0;
        for (double& wi : w) {
            wi = 0.1 + rng.uniform();
            wsum += wi;
        }
        Vector wmean(d);
        Matrix scaled(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            const double norm = w[i] / wsum;
            for (std::size_t j = 0; j < d; ++j) {
                wmean[j] += norm * points(i, j);
                scaled(i, j) = std::sqrt(norm) * points(i, j);
            }
        }
        Matrix wsecond(d, d);
        kernels::gemm_tn(d, d, n, scaled.data.data(), d, scaled.data.data(), d,
                         wsecond.data.data(), d);
        Matrix wvar = wsecond;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) wvar(i, j) -= wmean[i] * wmean[j];
        Vector diff(d);
        for (std::size_t j = 0; j < d; ++j) diff[j] = wmean[j] - mean[j];
        const double k_var = 1.0 + linalg::quadratic_form(diff, wvar, wmean);
        const double k_mixed = (1.0 - linalg::quadratic_form(mean, wsecond, wmean)) /
                               (1.0 - linalg::quadratic_form(wmean, wsecond, wmean));
        result.max_error = std::max(result.max_error,
                                    std::abs(k_var - k_mixed) / std::max(1.0, std::abs(k_mixed)));
    }
    result.passed = result.max_error <= result.tolerance;
    return result;
}

std::string bias_shift_json(const BiasShiftReport& report, const UnitFisherEstimate& fisher,
                            LayerUnitRef unit) {
    nlohmann::json j;
    j["unit"] = unit.unit;
    j["layer"] = unit.layer;
    j["k"] = report.k;
    j["shift_plain"] = report.shift_plain;
    j["shift_natural"] = report.shift_natural;
    j["e_p_delta2"] = fisher.e_p_delta2;
    j["n_samples"] = fisher.n_samples;
    j["ridge_used"] = report.ridge_used;
    return j.dump(2);
}

} // namespace elulab::fisher
