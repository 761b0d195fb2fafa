#include "helpers.hpp"

#include "furst/entropy.hpp"
#include "furst/errors.hpp"
#include "furst/experiments.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace furst;

namespace {
Matrix diag2(double a) {
    const double d[] = {a, 1.0 / a};
    return Matrix::diagonal(d);
}
ProjectivePoint pt(double angle) { return ProjectivePoint::from_angle(angle); }
ProjectiveMeasure two_point(double a, double wa, double b, double wb) {
    return ProjectiveMeasure::from_atoms({{pt(a), wa}, {pt(b), wb}});
}

// Oracle: Shannon entropy computed from an explicit (angle-bucketed) histogram.
double shannon_oracle(const std::vector<std::pair<double, double>>& atoms) {
    std::map<long long, double> mass;
    for (const auto& [angle, w] : atoms) {
        double a = std::fmod(angle, M_PI);
        if (a < 0) a += M_PI;
        mass[std::llround(a * 1e8) % std::llround(M_PI * 1e8)] += w;
    }
    double h = 0.0;
    for (const auto& [k, w] : mass) h -= w * std::log(w);
    return h;
}
}  // namespace

TEST_CASE("atomic measures") {
    const auto u = ProjectiveMeasure::from_atoms({{pt(0.1), 0.25}, {pt(0.7), 0.25}, {pt(1.3), 0.25}, {pt(2.0), 0.25}});
    CHECK(u.max_atom() == doctest::Approx(0.25));
    CHECK(u.energy() == doctest::Approx(0.25));
    const auto d = ProjectiveMeasure::dirac(pt(0.4));
    CHECK(d.max_atom() == 1.0);
    CHECK(d.energy() == 1.0);
    const auto h = ProjectiveMeasure::from_atoms({{pt(0.1), 0.5}, {pt(0.7), 0.25}, {pt(1.3), 0.25}});
    CHECK(h.max_atom() == doctest::Approx(0.5));
    CHECK(h.energy() == doctest::Approx(0.375));
    // atoms within the merge tolerance coalesce, also across the antipodal seam
    const auto m = ProjectiveMeasure::from_atoms({{pt(0.0), 0.5}, {pt(M_PI - 1e-12), 0.5}});
    CHECK(m.size() == 1);
    CHECK_THROWS_AS(ProjectiveMeasure::from_atoms({{pt(0.0), 0.5}}), InvalidInputError);
}

TEST_CASE("kl divergence") {
    const auto nu = two_point(0.2, 0.5, 1.1, 0.5);
    CHECK(kl(nu, nu) == doctest::Approx(0.0));
    CHECK(kl(nu, two_point(0.2, 0.25, 1.1, 0.75)) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-14));
    CHECK(kl(nu, two_point(0.2, 0.25, 1.1, 0.75)) == doctest::Approx(0.1438410362258904).epsilon(1e-12));
    CHECK(std::isinf(kl(nu, two_point(0.5, 0.5, 1.5, 0.5))));
    const auto diffuse = ProjectiveMeasure::from_atoms({{pt(0.2), 0.5}}, 0.5);
    CHECK_THROWS_AS(kl(diffuse, nu), UnsupportedOperationError);
}

TEST_CASE("furstenberg entropy reference values") {
    const auto nu = two_point(0.2, 0.5, 1.1, 0.5);
    CHECK(furstenberg_entropy(MatrixEnsemble::single(diag2(2.0)), nu).phi == doctest::Approx(0.0));

    // two maps with the same image of nu
    const auto same = MatrixEnsemble::finite({{0.5, Matrix::rotation2(0.3)}, {0.5, Matrix::rotation2(0.3 + M_PI)}});
    CHECK(furstenberg_entropy(same, nu).phi == doctest::Approx(0.0).epsilon(1e-15));

    const auto split = MatrixEnsemble::finite({{0.5, Matrix::identity(2)}, {0.5, Matrix::rotation2(0.9)}});
    const auto x     = ProjectiveMeasure::dirac(pt(0.2));
    CHECK(furstenberg_entropy(split, x).phi == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("entropy decomposition hand case") {
    const auto split = MatrixEnsemble::finite({{0.5, Matrix::identity(2)}, {0.5, Matrix::rotation2(0.9)}});
    const auto x     = ProjectiveMeasure::dirac(pt(0.2));
    const auto tgt   = two_point(0.2, 0.25, 1.1, 0.75);
    const auto r     = entropy_decomposition(split, x, tgt);
    CHECK(r.phi == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(r.hTerm == doctest::Approx(0.1438410362258904).epsilon(1e-12));
    CHECK(std::abs(r.phiCond - r.phi - r.hTerm) <= 1e-10);

    const auto self = entropy_decomposition(split, x, convolve_measure(split, x));
    CHECK(self.hTerm == doctest::Approx(0.0));
    CHECK(self.phiCond == doctest::Approx(self.phi));

    const auto f   = MatrixEnsemble::single(diag2(2.0));
    const auto nu  = two_point(0.2, 0.5, 1.1, 0.5);
    const auto one = entropy_decomposition(f, nu, convolve_measure(f, nu));
    CHECK(one.phi == doctest::Approx(0.0));
    CHECK(one.hTerm == doctest::Approx(0.0));
    CHECK(one.phiCond == doctest::Approx(0.0));
}

TEST_CASE("entropy equals the Shannon entropy gain for invertible maps") {
    // Each f is a bijection of RP^1, so Phi_mu(nu) = H(mu * nu) - H(nu).
    Stream st(12, 0);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> angles, weights, mapAngles, mapWeights;
        double              tw = 0.0, mw = 0.0;
        for (int i = 0; i < 4; ++i) {
            angles.push_back(st.uniform(0.0, M_PI));
            weights.push_back(0.1 + st.uniform());
            tw += weights.back();
        }
        // rotations act on angles by translation, keeping the oracle exact
        for (int j = 0; j < 3; ++j) {
            mapAngles.push_back(st.uniform(0.0, M_PI));
            mapWeights.push_back(0.1 + st.uniform());
            mw += mapWeights.back();
        }
        std::vector<Atom<ProjectivePoint>> atoms;
        std::vector<std::pair<double, double>> nuHist, imageHist;
        for (int i = 0; i < 4; ++i) {
            atoms.push_back({pt(angles[i]), weights[i] / tw});
            nuHist.push_back({angles[i], weights[i] / tw});
        }
        std::vector<WeightedMatrix> maps;
        for (int j = 0; j < 3; ++j) {
            maps.push_back({mapWeights[j] / mw, Matrix::rotation2(mapAngles[j])});
            for (int i = 0; i < 4; ++i) imageHist.push_back({angles[i] + mapAngles[j], weights[i] / tw * mapWeights[j] / mw});
        }
        const auto nu  = ProjectiveMeasure::from_atoms(atoms);
        const auto mu  = MatrixEnsemble::finite(maps);
        const double phi = furstenberg_entropy(mu, nu).phi;
        CHECK(phi == doctest::Approx(shannon_oracle(imageHist) - shannon_oracle(nuHist)).epsilon(1e-10));
        CHECK(shannon(nu) == doctest::Approx(shannon_oracle(nuHist)).epsilon(1e-12));
    }
}

TEST_CASE("nonstationary additivity") {
    const auto nu = two_point(0.2, 0.3, 1.1, 0.7);
    const auto mu = MatrixEnsemble::finite({{0.4, diag2(2.0)}, {0.6, Matrix::rotation2(1.0)}});
    CHECK(additivity_check(mu, MatrixEnsemble::single(Matrix::identity(2)), nu) <= 1e-10);
    CHECK(additivity_check(MatrixEnsemble::single(Matrix::identity(2)), mu, nu) <= 1e-10);

    for (std::uint64_t i = 0; i < 100; ++i) {
        Stream     st(21, i, StreamTag::Construction);
        const auto a = random_finite_ensemble(3, st);
        const auto b = random_finite_ensemble(3, st);
        const auto v = random_measure(4, 2, st);
        CHECK(additivity_check(a, b, v) <= 1e-10);
    }
}

TEST_CASE("entropy minimisation") {
    // shared fixed point e1: nu = delta_e1 has deterministic image
    const auto fixed = MatrixEnsemble::finite({{0.5, diag2(2.0)}, {0.5, diag2(3.0)}});
    MinimizeOptions opt;
    opt.restarts   = 4;
    opt.iterations = 100;
    const auto p   = minimize_entropy(fixed, opt);
    CHECK(p.value <= 1e-10);
    CHECK(minimize_entropy(MatrixEnsemble::single(Matrix::rotation2(0.5)), opt).value <= 1e-12);

    // two maps with B^-1 A hyperbolic (trace 10/3 cos 0.8 > 2): the Dirac mass at its
    // fixed point p has A p = B p, a deterministic image
    const auto pair = MatrixEnsemble::finite({{0.5, diag2(3.0)}, {0.5, Matrix::rotation2(0.8)}});
    const auto q    = minimize_entropy(pair, opt);
    CHECK(q.value <= 1e-4);
    CHECK(furstenberg_entropy(pair, q.nu).phi == doctest::Approx(q.value).epsilon(1e-9));

    // determinism across worker counts
    opt.workers      = 1;
    const double one = minimize_entropy(pair, opt).value;
    opt.workers      = 4;
    CHECK(minimize_entropy(pair, opt).value == one);
}
