#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "elulab/activations.hpp"
#include "elulab/errors.hpp"
#include "elulab/rng.hpp"
#include "support/oracles.hpp"

using namespace elulab;

namespace {
const ActivationKind kAll[] = {ActivationKind::elu(), ActivationKind::relu(),
                               ActivationKind::lrelu(), ActivationKind::srelu()};
}

TEST_CASE("forward values") {
    const auto elu1 = ActivationKind::elu(1.0);
    CHECK(act::forward(elu1, 0.0) == 0.0);
    CHECK(act::forward(elu1, 2.5) == 2.5);
    // exp(-1) - 1 to full double precision
    CHECK(act::forward(elu1, -1.0) == doctest::Approx(-0.63212055882855768).epsilon(1e-14));
    CHECK(act::forward(ActivationKind::srelu(), -5.0) == -1.0);
    CHECK(act::forward(ActivationKind::relu(), -3.0) == 0.0);
    CHECK(act::forward(ActivationKind::relu(), 3.0) == 3.0);
    CHECK(act::forward(ActivationKind::lrelu(0.1), -2.0) == doctest::Approx(-0.2));
    CHECK(act::forward(ActivationKind::lrelu(0.1), 2.0) == 2.0);
}

TEST_CASE("derivative values and kink convention") {
    const auto elu1 = ActivationKind::elu(1.0);
    CHECK(act::derivative(elu1, 3.0) == 1.0);
    CHECK(act::derivative(elu1, -1.0) == doctest::Approx(0.36787944117144233).epsilon(1e-14));
    CHECK(act::derivative(elu1, -1.0) == act::forward(elu1, -1.0) + 1.0); // exact
    CHECK(act::derivative(ActivationKind::relu(), -0.5) == 0.0);

    // at the kink, the negative-branch value applies
    CHECK(act::derivative(elu1, 0.0) == 1.0);                        // alpha*exp(0) = 1
    CHECK(act::derivative(ActivationKind::elu(0.7), 0.0) == 0.7);
    CHECK(act::derivative(ActivationKind::relu(), 0.0) == 0.0);
    CHECK(act::derivative(ActivationKind::lrelu(0.1), 0.0) == 0.1);
    CHECK(act::derivative(ActivationKind::srelu(), -1.0) == 0.0);
    CHECK(act::derivative(ActivationKind::srelu(), -0.999) == 1.0);
}

TEST_CASE("saturation limits") {
    CHECK(act::saturation_limit(ActivationKind::elu(1.0)) == -1.0);
    CHECK(act::saturation_limit(ActivationKind::elu(0.5)) == -0.5);
    CHECK(act::saturation_limit(ActivationKind::srelu()) == -1.0);
    CHECK(act::saturation_limit(ActivationKind::relu()) == 0.0);
    CHECK(!act::saturation_limit(ActivationKind::lrelu(0.1)).has_value());
}

TEST_CASE("elu identity f'(x) = f(x) + alpha is exact on the negative branch") {
    Rng rng(41);
    for (double alpha : {1.0, 0.3, 2.5}) {
        const auto kind = ActivationKind::elu(alpha);
        for (int i = 0; i < 1000; ++i) {
            const double x = -20.0 * rng.uniform();
            CHECK(act::derivative(kind, x) == act::forward(kind, x) + alpha); // bitwise
        }
    }
}

TEST_CASE("continuity at zero") {
    for (const auto& kind : kAll) {
        const double gap = std::abs(act::forward(kind, 1e-8) - act::forward(kind, -1e-8));
        CHECK(gap <= 1e-7);
    }
}

TEST_CASE("monotonicity on random sorted pairs") {
    Rng rng(42);
    for (const auto& kind : kAll) {
        const bool strict =
            kind.tag == ActivationKind::Tag::elu || kind.tag == ActivationKind::Tag::lrelu;
        for (int i = 0; i < 1000; ++i) {
            double a = 20.0 * (rng.uniform() - 0.5);
            double b = 20.0 * (rng.uniform() - 0.5);
            if (a == b) continue;
            if (a > b) std::swap(a, b);
            const double fa = act::forward(kind, a);
            const double fb = act::forward(kind, b);
            if (strict)
                CHECK(fa < fb);
            else
                CHECK(fa <= fb);
        }
    }
}

TEST_CASE("lower bounds") {
    Rng rng(43);
    for (int i = 0; i < 1000; ++i) {
        // strict bound holds while exp(x) stays representable above 0
        const double x = 70.0 * (rng.uniform() - 0.5);
        CHECK(act::forward(ActivationKind::elu(1.0), x) > -1.0);
        CHECK(act::forward(ActivationKind::elu(0.4), x) > -0.4);
        CHECK(act::forward(ActivationKind::srelu(), x) >= -1.0);
    }
    // far outside that range the float value may land exactly on -alpha,
    // but never below it
    for (double x : {-1e3, -1e6, 1e6}) {
        CHECK(act::forward(ActivationKind::elu(1.0), x) >= -1.0);
        CHECK(act::forward(ActivationKind::srelu(), x) >= -1.0);
    }
}

TEST_CASE("derivative matches central finite differences away from kinks") {
    Rng rng(44);
    for (const auto& kind : kAll) {
        int checked = 0;
        while (checked < 1000) {
            const double x = 10.0 * (rng.uniform() - 0.5);
            if (std::abs(x) < 1e-4) continue;            // kink at 0
            if (std::abs(x + 1.0) < 1e-4) continue;      // srelu kink
            const double fd =
                oracle::fdiff([&](double t) { return act::forward(kind, t); }, x, 1e-6);
            const double d = act::derivative(kind, x);
            CHECK(std::abs(fd - d) <= 1e-6 * std::max(1.0, std::abs(d)));
            ++checked;
        }
    }
}

TEST_CASE("non-finite inputs are rejected") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(act::forward(ActivationKind::elu(), nan), DomainError);
    CHECK_THROWS_AS(act::forward(ActivationKind::relu(), inf), DomainError);
    CHECK_THROWS_AS(act::derivative(ActivationKind::srelu(), -inf), DomainError);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(ActivationKind::elu(0.0), ConfigError);
    CHECK_THROWS_AS(ActivationKind::elu(-1.0), ConfigError);
    CHECK_THROWS_AS(ActivationKind::lrelu(0.0), ConfigError);
    CHECK_THROWS_AS(ActivationKind::lrelu(1.0), ConfigError);
    CHECK_NOTHROW(ActivationKind::lrelu(0.999));
}

TEST_CASE("parse and to_string") {
    CHECK(act::parse("elu") == ActivationKind::elu(1.0));
    CHECK(act::parse("elu:0.5") == ActivationKind::elu(0.5));
    CHECK(act::parse("lrelu") == ActivationKind::lrelu(0.1));
    CHECK(act::parse("lrelu:0.25") == ActivationKind::lrelu(0.25));
    CHECK(act::parse("relu") == ActivationKind::relu());
    CHECK(act::parse("srelu") == ActivationKind::srelu());

    for (const auto& kind :
         {ActivationKind::elu(1.0), ActivationKind::elu(0.37), ActivationKind::lrelu(0.1),
          ActivationKind::relu(), ActivationKind::srelu()}) {
        CHECK(act::parse(act::to_string(kind)) == kind);
    }
    CHECK(act::to_string(ActivationKind::elu(1.0)) == "elu:1");
    CHECK(act::to_string(ActivationKind::relu()) == "relu");

    CHECK_THROWS_AS(act::parse("foo"), ConfigError);
    CHECK_THROWS_AS(act::parse("elu:"), ConfigError);
    CHECK_THROWS_AS(act::parse("elu:abc"), ConfigError);
    CHECK_THROWS_AS(act::parse("elu:-1"), ConfigError);
    CHECK_THROWS_AS(act::parse("lrelu:1.5"), ConfigError);
    CHECK_THROWS_AS(act::parse("relu:0.5"), ConfigError);
}

TEST_CASE("matrix wrappers apply elementwise") {
    const Matrix x = Matrix::from_rows({{-1.0, 0.0}, {2.0, -3.0}});
    const auto kind = ActivationKind::elu(1.0);
    const Matrix y = act::forward(kind, x);
    const Matrix d = act::derivative(kind, x);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        CHECK(y.data[i] == act::forward(kind, x.data[i]));
        CHECK(d.data[i] == act::derivative(kind, x.data[i]));
    }
}
