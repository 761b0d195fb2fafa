#include "helpers.hpp"

#include "furst/ensemble.hpp"
#include "furst/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace furst;

namespace {
Matrix diag2(double a) {
    const double d[] = {a, 1.0 / a};
    return Matrix::diagonal(d);
}
}  // namespace

TEST_CASE("finite support draws") {
    const Matrix a  = diag2(3.0);
    const auto   mu = MatrixEnsemble::single(a);
    Stream       st(1, 0);
    for (int i = 0; i < 10; ++i) CHECK(mu.draw(st).matrix.max_abs_diff(a) == 0.0);

    const auto pair = MatrixEnsemble::finite({{0.5, a}, {0.5, Matrix::rotation2(1.0)}});
    int        first = 0;
    for (int i = 0; i < 10000; ++i) first += pair.draw(st).tag == 0 ? 1 : 0;
    CHECK(std::abs(first / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("finite support validation") {
    const double bad[] = {2, 0, 0, 2};
    CHECK_THROWS_AS(MatrixEnsemble::finite({{1.0, Matrix::from_rows(2, bad)}}), ValidationError);
    CHECK_THROWS_AS(MatrixEnsemble::finite({{0.7, diag2(2)}, {0.7, diag2(3)}}), ValidationError);
    CHECK_THROWS_AS(MatrixEnsemble::finite({}), InvalidInputError);
    CHECK_THROWS_AS(MatrixEnsemble::rotation_uniform().support(), UnsupportedOperationError);
}

TEST_CASE("appendix constructions") {
    Stream st(2, 0);
    for (int i = 0; i < 1000; ++i) {
        const Draw a = build_appendix_alpha(st);
        const Draw b = build_appendix_beta(st);
        for (const Matrix& m : {a.matrix, b.matrix}) {
            CHECK(m.dim() == 4);
            CHECK(std::abs(m.determinant() - 1.0) <= 1e-9);
            CHECK(operator_norm(m) <= 200.0 * (1 + 1e-12));
        }
        // The norm is 100 ||B2||: 200 when the lower block drew diag(2, 1/2), 100 for a rotation.
        const double expected = (a.tag & kTagLowerDiagonal) ? 200.0 : 100.0;
        CHECK(operator_norm(a.matrix) == doctest::Approx(expected).epsilon(1e-12));
        // alpha is block diagonal
        for (int r = 0; r < 2; ++r)
            for (int c = 2; c < 4; ++c) {
                CHECK(a.matrix(r, c) == 0.0);
                CHECK(a.matrix(c, r) == 0.0);
            }
    }
    int swapped = 0;
    for (int i = 0; i < 10000; ++i) swapped += (build_appendix_beta(st).tag & kTagSwapped) ? 1 : 0;
    CHECK(std::abs(swapped / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("hyperbolic rotation mix") {
    const auto mu = MatrixEnsemble::hyperbolic_rotation_mix(2.0, 0.5);
    Stream     st(3, 0);
    int        hyper = 0;
    for (int i = 0; i < 10000; ++i) {
        const Draw d = mu.draw(st);
        CHECK(std::abs(d.matrix.determinant() - 1.0) < 1e-12);
        if (d.tag == 1) {
            ++hyper;
            CHECK(d.matrix.max_abs_diff(diag2(2.0)) == 0.0);
        } else {
            CHECK(operator_norm(d.matrix) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    CHECK(std::abs(hyper / 10000.0 - 0.5) <= 0.02);
    CHECK_THROWS_AS(MatrixEnsemble::hyperbolic_rotation_mix(0.5, 0.5), ValidationError);
}

TEST_CASE("convolution of finite ensembles") {
    const Matrix a = diag2(2.0), b = Matrix::rotation2(0.4);
    const auto   ab = convolve(MatrixEnsemble::single(a), MatrixEnsemble::single(b));
    REQUIRE(ab.support().atoms.size() == 1);
    // convolve(mu1, mu2) is the law of A1 A2: mu2 acts first.
    CHECK(ab.support().atoms[0].matrix.max_abs_diff(a * b) < 1e-15);

    const auto two   = MatrixEnsemble::finite({{0.25, diag2(2)}, {0.75, diag2(3)}});
    const auto three = MatrixEnsemble::finite({{0.2, Matrix::rotation2(1)}, {0.3, Matrix::rotation2(2)}, {0.5, Matrix::rotation2(2.5)}});
    const auto six   = convolve(two, three);
    CHECK(six.support().atoms.size() == 6);
    double total = 0.0;
    for (const auto& w : six.support().atoms) total += w.weight;
    CHECK(total == doctest::Approx(1.0));

    // {Id, M} with M^2 = Id is idempotent under convolution.
    const auto m    = block_swap_matrix();
    const auto half = MatrixEnsemble::finite({{0.5, Matrix::identity(4)}, {0.5, m}});
    const auto sq   = convolve(half, half);
    REQUIRE(sq.support().atoms.size() == 2);
    for (const auto& w : sq.support().atoms) CHECK(w.weight == doctest::Approx(0.5));
}

TEST_CASE("composite ensembles mix their parts") {
    const auto mu = MatrixEnsemble::composite({{0.5, MatrixEnsemble::single(diag2(2))}, {0.5, MatrixEnsemble::rotation_uniform()}});
    Stream     st(4, 0);
    int        hyper = 0;
    for (int i = 0; i < 4000; ++i) hyper += mu.draw(st).matrix.max_abs_diff(diag2(2)) == 0.0 ? 1 : 0;
    CHECK(std::abs(hyper / 4000.0 - 0.5) < 0.03);
}

TEST_CASE("schedule rules") {
    std::vector<MatrixEnsemble> table{MatrixEnsemble::single(diag2(2)), MatrixEnsemble::single(diag2(3))};
    const Schedule st(table, Stationary{1});
    for (long n : {1L, 2L, 1000L}) CHECK(st.index_at(n) == 1);

    const Schedule per(table, Periodic{{0, 1}});
    CHECK(per.index_at(1) == 0);
    CHECK(per.index_at(2) == 1);
    CHECK(per.index_at(3) == 0);

    const Schedule app(table, AppendixLevels{{50, 500}, 0, 1});
    CHECK(app.index_at(499) == 0);
    CHECK(app.index_at(500) == 1);
    CHECK(app.index_at(50) == 1);
    CHECK(app.index_at(51) == 0);

    const Schedule ex(table, Explicit{{1, 0, 1}}, 3);
    CHECK(ex.index_at(1) == 1);
    CHECK(ex.index_at(2) == 0);
    CHECK_THROWS_AS(ex.index_at(4), RangeError);
    CHECK_THROWS_AS(Schedule(table, AppendixLevels{{500, 50}, 0, 1}), InvalidInputError);
}
