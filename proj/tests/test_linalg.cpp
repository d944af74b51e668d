#include <cmath>

#include "doctest.h"
#include "elulab/errors.hpp"
#include "elulab/linalg.hpp"
#include "elulab/rng.hpp"
#include "support/oracles.hpp"

using namespace elulab;
namespace la = elulab::linalg;

TEST_CASE("matmul basics") {
    const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});

    SUBCASE("identity is neutral") {
        const Matrix r = la::matmul(Matrix::identity(2), m);
        CHECK(oracle::max_abs_diff(r, m) == 0.0);
    }
    SUBCASE("hand sum") {
        const Matrix r = la::matmul(m, Matrix::from_rows({{1}, {1}}));
        CHECK(r.rows == 2);
        CHECK(r.cols == 1);
        CHECK(r(0, 0) == doctest::Approx(3));
        CHECK(r(1, 0) == doctest::Approx(7));
    }
    SUBCASE("random product matches the triple-loop oracle") {
        Rng rng(5);
        Matrix a(5, 4), b(4, 3);
        for (auto& v : a.data) v = 2 * rng.uniform() - 1;
        for (auto& v : b.data) v = 2 * rng.uniform() - 1;
        CHECK(oracle::max_abs_diff(la::matmul(a, b), oracle::matmul(a, b)) < 1e-12);
    }
    SUBCASE("mismatched shapes throw and name both") {
        CHECK_THROWS_WITH_AS(la::matmul(Matrix(5, 4), Matrix(3, 3)),
                             doctest::Contains("5x4"), ShapeError);
    }
    SUBCASE("associativity on random conformable triples") {
        Rng rng(99);
        for (int rep = 0; rep < 10; ++rep) {
            Matrix a(3 + rng.below(4), 2 + rng.below(4));
            Matrix b(a.cols, 2 + rng.below(4));
            Matrix c(b.cols, 2 + rng.below(4));
            for (auto& v : a.data) v = 2 * rng.uniform() - 1;
            for (auto& v : b.data) v = 2 * rng.uniform() - 1;
            for (auto& v : c.data) v = 2 * rng.uniform() - 1;
            const Matrix left = la::matmul(la::matmul(a, b), c);
            const Matrix right = la::matmul(a, la::matmul(b, c));
            CHECK(oracle::max_abs_diff(left, right) < 1e-9);
        }
    }
}

TEST_CASE("dense_inverse") {
    SUBCASE("identity") {
        const Matrix inv = la::dense_inverse(Matrix::identity(3));
        CHECK(oracle::max_abs_diff(inv, Matrix::identity(3)) == 0.0);
    }
    SUBCASE("2x2 with known inverse") {
        const Matrix m = Matrix::from_rows({{2, 1}, {1, 2}});
        const Matrix inv = la::dense_inverse(m);
        CHECK(inv(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
        CHECK(inv(0, 1) == doctest::Approx(-1.0 / 3).epsilon(1e-12));
        CHECK(oracle::max_abs_diff(la::matmul(m, inv), Matrix::identity(2)) < 1e-12);
    }
    SUBCASE("rank-deficient input raises with the pivot index") {
        try {
            la::dense_inverse(Matrix::from_rows({{1, 1}, {1, 1}}));
            FAIL("expected SingularMatrixError");
        } catch (const SingularMatrixError& e) {
            CHECK(e.pivot_index == 1);
        }
    }
    SUBCASE("two-sided identity residual on random well-conditioned matrices") {
        Rng rng(31);
        for (std::size_t n : {2u, 5u, 9u, 16u}) {
            const Matrix m = oracle::spd_matrix(n, rng);
            const Matrix inv = la::dense_inverse(m);
            CHECK(oracle::max_abs_diff(la::matmul(m, inv), Matrix::identity(n)) < 1e-9);
            CHECK(oracle::max_abs_diff(la::matmul(inv, m), Matrix::identity(n)) < 1e-9);
        }
    }
    SUBCASE("non-square input throws") {
        CHECK_THROWS_AS(la::dense_inverse(Matrix(2, 3)), ShapeError);
    }
}

TEST_CASE("solve and quadratic_form") {
    SUBCASE("solve reproduces a known solution") {
        Rng rng(7);
        const Matrix m = oracle::spd_matrix(6, rng);
        Vector want(6);
        for (auto& v : want.data) v = 2 * rng.uniform() - 1;
        const Vector rhs = la::matvec(m, want);
        const Vector got = la::solve(m, rhs);
        for (std::size_t i = 0; i < 6; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10));
    }
    SUBCASE("quadratic_form identity cases") {
        CHECK(la::quadratic_form(Vector{1, 0}, Matrix::identity(2), Vector{1, 0}) ==
              doctest::Approx(1.0));
        CHECK(la::quadratic_form(Vector{1, 1}, Matrix::from_rows({{2, 0}, {0, 2}}),
                                 Vector{1, 1}) == doctest::Approx(1.0));
    }
    SUBCASE("quadratic_form matches the explicit-inverse path on SPD input") {
        Rng rng(11);
        for (int rep = 0; rep < 10; ++rep) {
            const Matrix m = oracle::spd_matrix(6, rng);
            Vector x(6), y(6);
            for (auto& v : x.data) v = 2 * rng.uniform() - 1;
            for (auto& v : y.data) v = 2 * rng.uniform() - 1;
            const Vector inv_y = la::matvec(la::dense_inverse(m), y);
            CHECK(la::quadratic_form(x, m, y) ==
                  doctest::Approx(la::dot(x, inv_y)).epsilon(1e-9));
        }
    }
    SUBCASE("singular matrix propagates the singularity error") {
        CHECK_THROWS_AS(la::quadratic_form(Vector{1, 1}, Matrix::from_rows({{1, 1}, {1, 1}}),
                                           Vector{1, 1}),
                        SingularMatrixError);
    }
}

TEST_CASE("transpose, matvec, outer, dot") {
    const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    const Matrix t = la::transpose(m);
    CHECK(t.rows == 3);
    CHECK(t(0, 1) == 4);
    CHECK(t(2, 0) == 3);

    const Vector y = la::matvec(m, Vector{1, 1, 1});
    CHECK(y[0] == doctest::Approx(6));
    CHECK(y[1] == doctest::Approx(15));
    CHECK_THROWS_AS(la::matvec(m, Vector{1, 1}), ShapeError);

    const Matrix o = la::outer(Vector{1, 2}, Vector{3, 4, 5});
    CHECK(o.rows == 2);
    CHECK(o.cols == 3);
    CHECK(o(1, 2) == 10);

    CHECK(la::dot(Vector{1, 2, 3}, Vector{4, 5, 6}) == doctest::Approx(32));
    CHECK_THROWS_AS(la::dot(Vector{1}, Vector{1, 2}), ShapeError);
}
