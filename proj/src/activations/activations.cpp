#include "elulab/activations.hpp"

#include <charconv>
#include <cmath>

#include "elulab/errors.hpp"
#include "elulab/io.hpp"

namespace elulab {

ActivationKind ActivationKind::elu(double alpha) {
    if (!(alpha > 0.0))
        throw ConfigError("elu: alpha must be > 0, got " + io::format_double(alpha));
    return {Tag::elu, alpha};
}

ActivationKind ActivationKind::relu() { return {Tag::relu, 0.0}; }

ActivationKind ActivationKind::lrelu(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError("lrelu: alpha must be in (0,1), got " + io::format_double(alpha));
    return {Tag::lrelu, alpha};
}

ActivationKind ActivationKind::srelu() { return {Tag::srelu, 0.0}; }

namespace act {

namespace {

void require_finite_arg(double x) {
    if (!std::isfinite(x)) throw DomainError("activation: non-finite input");
}

} // namespace

double forward(const ActivationKind& kind, double x) {
    require_finite_arg(x);
    switch (kind.tag) {
    case ActivationKind::Tag::elu:
        return x > 0.0 ? x : kind.alpha * std::expm1(x);
    case ActivationKind::Tag::relu:
        return x > 0.0 ? x : 0.0;
    case ActivationKind::Tag::lrelu:
        return x > 0.0 ? x : kind.alpha * x;
    case ActivationKind::Tag::srelu:
        return x > -1.0 ? x : -1.0;
    }
    throw ConfigError("activation: unknown kind");
}

double derivative(const ActivationKind& kind, double x) {
    require_finite_arg(x);
    switch (kind.tag) {
    case ActivationKind::Tag::elu:
        // negative branch written as f(x) + alpha so the identity is exact
        return x > 0.0 ? 1.0 : forward(kind, x) + kind.alpha;
    case ActivationKind::Tag::relu:
        return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Tag::lrelu:
        return x > 0.0 ? 1.0 : kind.alpha;
    case ActivationKind::Tag::srelu:
        return x > -1.0 ? 1.0 : 0.0;
    }
    throw ConfigError("activation: unknown kind");
}

std::optional<double> saturation_limit(const ActivationKind& kind) {
    switch (kind.tag) {
    case ActivationKind::Tag::elu:
        return -kind.alpha;
    case ActivationKind::Tag::relu:
        return 0.0;
    case ActivationKind::Tag::lrelu:
        return std::nullopt;
    case ActivationKind::Tag::srelu:
        return -1.0;
    }
    return std::nullopt;
}

Matrix forward(const ActivationKind& kind, const Matrix& x) {
    Matrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = forward(kind, x.data[i]);
    return y;
}

Matrix derivative(const ActivationKind& kind, const Matrix& x) {
    Matrix y(x.rows, x.cols);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = derivative(kind, x.data[i]);
    return y;
}

ActivationKind parse(const std::string& text) {
    std::string name = text;
    bool has_alpha = false;
    double alpha = 0.0;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        const std::string rest = text.substr(colon + 1);
        const char* first = rest.data();
        const char* last = rest.data() + rest.size();
        const auto res = std::from_chars(first, last, alpha);
        if (res.ec != std::errc{} || res.ptr != last || !std::isfinite(alpha))
            throw ConfigError("activation '" + text + "': bad alpha '" + rest + "'");
        has_alpha = true;
    }
    if (name == "elu") return ActivationKind::elu(has_alpha ? alpha : 1.0);
    if (name == "lrelu") return ActivationKind::lrelu(has_alpha ? alpha : 0.1);
    if (name == "relu" || name == "srelu") {
        if (has_alpha)
            throw ConfigError("activation '" + text + "': " + name + " takes no alpha");
        return name == "relu" ? ActivationKind::relu() : ActivationKind::srelu();
    }
    throw ConfigError("unknown activation '" + text +
                      "' (expected elu, relu, lrelu, srelu, optionally ':alpha')");
}

std::string to_string(const ActivationKind& kind) {
    switch (kind.tag) {
    case ActivationKind::Tag::elu:
        return "elu:" + io::format_double(kind.alpha);
    case ActivationKind::Tag::relu:
        return "relu";
    case ActivationKind::Tag::lrelu:
        return "lrelu:" + io::format_double(kind.alpha);
    case ActivationKind::Tag::srelu:
        return "srelu";
    }
    throw ConfigError("activation: unknown kind");
}

} // namespace act
} // namespace elulab
