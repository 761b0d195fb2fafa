#include "furst/contract.hpp"
#include "furst/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace furst;

namespace {
Matrix diag2(double a) {
    const double d[] = {a, 1.0 / a};
    return Matrix::diagonal(d);
}
Schedule constant(const Matrix& m) { return Schedule::stationary(MatrixEnsemble::single(m)); }
Schedule hrm() { return Schedule::stationary(MatrixEnsemble::hyperbolic_rotation_mix(2.0, 0.5)); }

// f(n) = min over m >= n of L_m - (m - n) lambda / 2, evaluated by brute force.
std::vector<double> f_oracle(const std::vector<double>& l, double lambda) {
    std::vector<double> f(l.size());
    for (std::size_t n = 0; n < l.size(); ++n) {
        double best = l[n];
        for (std::size_t m = n; m < l.size(); ++m) best = std::min(best, l[m] - lambda / 2.0 * static_cast<double>(m - n));
        f[n] = best;
    }
    return f;
}
}  // namespace

TEST_CASE("contracted direction of deterministic products") {
    Stream            st(1, 0);
    TrajectoryOptions opt;
    opt.n          = 30;
    const auto rec = run_trajectory(constant(diag2(2.0)), opt, st);
    const auto dir = contracted_direction(rec.final);
    CHECK(dir.status == DirectionStatus::Ok);
    CHECK(point_distance(dir.vBar, ProjectivePoint(Vector{0, 1})) == 0.0);
    CHECK(dir.logVec == doctest::Approx(-30 * std::log(2.0)).epsilon(1e-14));

    const auto rot = run_trajectory(constant(Matrix::rotation2(0.7)), opt, st);
    CHECK(contracted_direction(rot.final).status == DirectionStatus::Degenerate);
}

TEST_CASE("log image length through the graded product") {
    Stream            st(2, 0);
    TrajectoryOptions opt;
    opt.n          = 20;
    const auto rec = run_trajectory(constant(diag2(2.0)), opt, st);
    CHECK(log_image_length(rec.final, Vector{1, 0}) == doctest::Approx(20 * std::log(2.0)).epsilon(1e-14));
    CHECK(log_image_length(rec.final, Vector{0, 3}) == doctest::Approx(-20 * std::log(2.0)).epsilon(1e-12));
    const double expected = 0.5 * std::log(std::pow(4.0, 20) * 0.5 + std::pow(4.0, -20) * 0.5);
    CHECK(log_image_length(rec.final, Vector{1, 1}) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("defect vanishes for the deterministic diagonal schedule") {
    const auto st = verify_contraction(constant(diag2(2.0)), 100, 4, 1);
    CHECK(st.lhat == doctest::Approx(100 * std::log(2.0)));
    for (const auto& r : st.rows) CHECK(std::abs(r.defect) < 1e-13);
}

TEST_CASE("contraction estimates on the mixture") {
    const auto a = verify_contraction(hrm(), 2000, 100, 20240601, 2);
    CHECK(a.meanAbsDefect <= 0.05);
    CHECK(!a.unsuitable);
    const auto b = verify_contraction(hrm(), 4000, 100, 20240601, 2);
    CHECK(b.meanAbsDefect <= a.meanAbsDefect);
}

TEST_CASE("contracted direction stabilises exponentially") {
    for (std::uint64_t i = 0; i < 10; ++i) {
        Stream            st(3, i);
        TrajectoryOptions opt;
        opt.n                    = 2000;
        opt.geometricCheckpoints = false;
        opt.checkpoints          = {1000};
        opt.recordFrames         = true;
        const auto rec = run_trajectory(hrm(), opt, st);
        CHECK(point_distance(contracted_direction(rec.frames.front()).vBar, contracted_direction(rec.final).vBar) < 1e-2);
    }
}

TEST_CASE("f schedule") {
    std::vector<double> lin;
    for (int n = 1; n <= 50; ++n) lin.push_back(n);
    const auto f1 = f_schedule(lin, 1.0);
    for (std::size_t i = 0; i < lin.size(); ++i) CHECK(f1[i] == doctest::Approx(lin[i]));

    std::vector<double> l2;
    for (int n = 1; n <= 50; ++n) l2.push_back(n * std::log(2.0));
    const auto f2 = f_schedule(l2, std::log(2.0));
    for (std::size_t i = 0; i < l2.size(); ++i) CHECK(f2[i] == doctest::Approx(l2[i]));

    const std::vector<double> l{0, 10, 5, 20};
    const auto                f = f_schedule(l, 2.0);
    const auto                o = f_oracle(l, 2.0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(f[i] == doctest::Approx(o[i]));
    CHECK(f == std::vector<double>{0, 4, 5, 20});

    Stream st(4, 0);
    std::vector<double> noisy;
    double              acc = 0.0;
    for (int n = 0; n < 300; ++n) noisy.push_back(acc += st.uniform(-1.0, 2.0));
    const auto fn = f_schedule(noisy, 0.3);
    const auto on = f_oracle(noisy, 0.3);
    for (std::size_t i = 0; i < fn.size(); ++i) CHECK(fn[i] == doctest::Approx(on[i]).epsilon(1e-12));
    for (std::size_t i = 1; i < fn.size(); ++i) CHECK(fn[i] - fn[i - 1] >= 0.15 - 1e-12);

    CHECK_THROWS_AS(f_schedule({}, 1.0), RangeError);
    CHECK_THROWS_AS(f_schedule(lin, 0.0), InvalidInputError);
}

TEST_CASE("series hypotheses") {
    Stream            st(5, 0);
    TrajectoryOptions opt;
    opt.n           = 60;
    opt.recordSteps = true;
    const auto rec  = run_trajectory(constant(diag2(2.0)), opt, st);
    std::vector<double> l;
    for (int n = 1; n <= 60; ++n) l.push_back(n * std::log(2.0));
    const auto rep = ls_hypotheses_check(rec, f_schedule(l, std::log(2.0)), {});
    REQUIRE(rep.status == LsStatus::Ok);
    // sum_{n >= 0} ||A||^2 / ||T_n||^2 = sum 4 * 4^-n -> 16/3
    CHECK(rep.checkpoints.back().sumNorms == doctest::Approx(16.0 / 3.0).epsilon(1e-12));
    CHECK(rep.checkpoints.back().ratio == doctest::Approx(1.0));
    CHECK(rep.normsBounded);

    const auto rrec = run_trajectory(constant(Matrix::rotation2(0.4)), opt, st);
    CHECK(ls_hypotheses_check(rrec, std::vector<double>(60, 0.0), {}).status == LsStatus::NotApplicable);
}

TEST_CASE("series hypotheses on the mixture") {
    const Schedule s      = hrm();
    const long     n      = 10000;
    const auto     series = estimate_Ln_series(s, n, 50, 9, 2);
    std::vector<double> l;
    for (const auto& e : series) l.push_back(e.mean);
    const double lambda = 0.5 * l.back() / static_cast<double>(n);
    Stream            st(9, 1000);
    TrajectoryOptions opt;
    opt.n           = n;
    opt.recordSteps = true;
    const auto rep  = ls_hypotheses_check(run_trajectory(s, opt, st), f_schedule(l, lambda), {});
    CHECK(rep.checkpoints.back().ratio >= 0.8);
    CHECK(rep.checkpoints.back().ratio <= 1.2);
    CHECK(rep.normsBounded);
    CHECK(rep.expBounded);
}
