#include "furst/entropy.hpp"

#include "furst/errors.hpp"
#include "furst/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace furst {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_exact(const ProjectiveMeasure& nu, const char* what) {
    if (nu.diffuse() > 0.0)
        throw UnsupportedOperationError(std::string(what) + ": exact mode requires zero diffuse mass");
}

}  // namespace

double kl(const ProjectiveMeasure& nu, const ProjectiveMeasure& nuPrime) {
    require_exact(nu, "kl");
    require_exact(nuPrime, "kl");
    if (nu.size() > 0 && nuPrime.size() > 0 && nu.space_dim() != nuPrime.space_dim())
        throw InvalidInputError("kl: measures live on different spaces");
    double sum = 0.0;
    for (const auto& a : nu.atoms()) {
        const double q = nuPrime.mass_at(a.loc);
        if (q <= 0.0) return kInf;
        sum += a.weight * std::log(a.weight / q);
    }
    // Tiny negative values are round-off; the divergence itself is >= 0.
    return std::max(sum, 0.0);
}

ProjectiveMeasure convolve_measure(const MatrixEnsemble& mu, const ProjectiveMeasure& nu) {
    const auto&                       sup = mu.support();
    std::vector<Atom<ProjectivePoint>> raw;
    raw.reserve(sup.atoms.size() * nu.size());
    for (const auto& f : sup.atoms)
        for (const auto& a : nu.atoms()) raw.push_back({projective_apply(f.matrix, a.loc), f.weight * a.weight});
    return ProjectiveMeasure::unchecked(merge_atoms(raw, nu.merge_tol()), nu.diffuse(), nu.merge_tol());
}

double shannon(const ProjectiveMeasure& nu) {
    double h = 0.0;
    for (const auto& a : nu.atoms()) h -= a.weight * std::log(a.weight);
    return h;
}

EntropyReport entropy_decomposition(const MatrixEnsemble& mu, const ProjectiveMeasure& nu,
                                    const ProjectiveMeasure& target) {
    require_exact(nu, "furstenberg_entropy");
    const auto&             sup     = mu.support();
    const ProjectiveMeasure nuPrime = convolve_measure(mu, nu);
    EntropyReport           r;
    double                  cond = 0.0;
    for (const auto& f : sup.atoms) {
        const ProjectiveMeasure image = pushforward(f.matrix, nu);
        const double            h     = kl(image, nuPrime);
        if (!std::isfinite(h))
            throw InternalConsistencyError("furstenberg_entropy: f_* nu not absolutely continuous w.r.t. mu * nu; "
                                           "merge tolerance failure");
        r.phi += f.weight * h;
        cond += f.weight * kl(image, target);
    }
    r.hTerm   = kl(nuPrime, target);
    r.phiCond = std::isfinite(r.hTerm) ? cond : kInf;
    return r;
}

EntropyReport furstenberg_entropy(const MatrixEnsemble& mu, const ProjectiveMeasure& nu) {
    return entropy_decomposition(mu, nu, convolve_measure(mu, nu));
}

double additivity_check(const MatrixEnsemble& mu, const MatrixEnsemble& muPrime, const ProjectiveMeasure& nu) {
    const double left   = furstenberg_entropy(convolve(muPrime, mu), nu).phi;
    const double first  = furstenberg_entropy(mu, nu).phi;
    const double second = furstenberg_entropy(muPrime, convolve_measure(mu, nu)).phi;
    return std::abs(left - first - second);
}

// ---------------------------------------------------------------- minimizer

namespace {

struct State {
    std::vector<Vector> locs;
    std::vector<double> weights;
};

Vector random_direction(int d, Stream& s) {
    for (;;) {
        Vector v(d);
        for (int i = 0; i < d; ++i) v[i] = s.normal();
        if (v.norm() > 1e-6) return v.normalized();
    }
}

/// Dominant eigenvector by power iteration; empty if it fails to settle
/// (complex or repeated dominant eigenvalues).
std::optional<Vector> dominant_eigenvector(const Matrix& m) {
    const int d = m.dim();
    Vector    v(d);
    for (int i = 0; i < d; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(d)) + 0.01 * i;
    v = v.normalized();
    for (int it = 0; it < 2000; ++it) {
        Vector w = (m * v);
        if (w.norm() < 1e-300) return std::nullopt;
        w = w.normalized();
        if (w.dot(v) < 0) w *= -1.0;
        if ((w - v).norm() < 1e-15) return w;
        v = w;
    }
    const Vector w = (m * v).normalized();
    return std::abs(std::abs(w.dot(v)) - 1.0) < 1e-12 ? std::optional<Vector>(w) : std::nullopt;
}

/// Real eigenvectors: closed form in d = 2, power iteration on M and M^-1 otherwise.
void eigen_candidates(const Matrix& m, std::vector<Vector>& out) {
    if (m.dim() == 2) {
        const double a = m(0, 0), b = m(0, 1), c = m(1, 0), e = m(1, 1);
        const double tr = a + e, det = a * e - b * c;
        const double disc = tr * tr / 4.0 - det;
        if (disc < 0.0) return;
        const double root = std::sqrt(disc);
        for (double lambda : {tr / 2.0 + root, tr / 2.0 - root}) {
            // (M - lambda) v = 0: pick the better-conditioned row.
            Vector v{b, lambda - a};
            Vector w{lambda - e, c};
            const Vector& best = v.norm() >= w.norm() ? v : w;
            if (best.norm() > 1e-12) out.push_back(best.normalized());
            else {
                out.push_back(Vector::basis(2, 0));
                out.push_back(Vector::basis(2, 1));
            }
        }
        return;
    }
    if (auto v = dominant_eigenvector(m)) out.push_back(*v);
    if (auto v = dominant_eigenvector(m.inverse())) out.push_back(*v);
}

ProjectiveMeasure to_measure(const State& s) {
    std::vector<Atom<ProjectivePoint>> atoms;
    double                             total = 0.0;
    for (double w : s.weights) total += w;
    for (std::size_t i = 0; i < s.locs.size(); ++i)
        atoms.push_back({ProjectivePoint(s.locs[i]), s.weights[i] / total});
    return ProjectiveMeasure::unchecked(merge_atoms(atoms, kMergeTol), 0.0);
}

State from_measure(const ProjectiveMeasure& nu) {
    State s;
    for (const auto& a : nu.atoms()) {
        s.locs.push_back(a.loc.rep());
        s.weights.push_back(a.weight);
    }
    return s;
}

double objective(const MatrixEnsemble& mu, const State& s) { return furstenberg_entropy(mu, to_measure(s)).phi; }

/// One exponentiated-gradient step on the weights with backtracking.
/// dPhi/dm_i = log m_i - sum_f w_f log nu'(f x_i), from Phi = H(mu * nu) - H(nu).
double weight_step(const MatrixEnsemble& mu, State& s, double current) {
    const ProjectiveMeasure nu      = to_measure(s);
    const ProjectiveMeasure nuPrime = convolve_measure(mu, nu);
    s                               = from_measure(nu);
    std::vector<double> grad(s.locs.size(), 0.0);
    for (std::size_t i = 0; i < s.locs.size(); ++i) {
        double g = std::log(s.weights[i]);
        for (const auto& f : mu.support().atoms)
            g -= f.weight * std::log(nuPrime.mass_at(projective_apply(f.matrix, ProjectivePoint(s.locs[i]))));
        grad[i] = g;
    }
    const double base = furstenberg_entropy(mu, nu).phi;
    current           = std::min(current, base);
    for (double eta = 1.0; eta > 1e-6; eta *= 0.5) {
        State  trial = s;
        double total = 0.0;
        double gmin  = *std::min_element(grad.begin(), grad.end());
        for (std::size_t i = 0; i < grad.size(); ++i) {
            trial.weights[i] *= std::exp(-eta * (grad[i] - gmin));
            total += trial.weights[i];
        }
        for (auto& w : trial.weights) w /= total;
        // Drop negligible atoms so the support can shrink.
        State kept;
        for (std::size_t i = 0; i < trial.weights.size(); ++i) {
            if (trial.weights[i] > 1e-14) {
                kept.locs.push_back(trial.locs[i]);
                kept.weights.push_back(trial.weights[i]);
            }
        }
        const double value = objective(mu, kept);
        if (value < current) {
            s = std::move(kept);
            return value;
        }
    }
    return current;
}

}  // namespace

PsiApprox minimize_entropy(const MatrixEnsemble& mu, const MinimizeOptions& opt) {
    const auto& sup = mu.support();
    const int   d   = mu.dim();
    if (opt.supportSize < 1 || opt.supportSize > 16)
        throw InvalidInputError("minimize_entropy: support size must lie in [1, 16]");
    if (opt.restarts < 1) throw InvalidInputError("minimize_entropy: need at least one restart");

    // Structural candidates: fixed directions of the maps and of f_i^-1 f_j.
    std::vector<Vector> fixed;
    for (const auto& f : sup.atoms) eigen_candidates(f.matrix, fixed);
    for (std::size_t i = 0; i < sup.atoms.size(); ++i)
        for (std::size_t j = 0; j < sup.atoms.size(); ++j)
            if (i != j) eigen_candidates(sup.atoms[i].matrix.inverse() * sup.atoms[j].matrix, fixed);
    std::vector<Matrix> inverses;
    for (const auto& f : sup.atoms) inverses.push_back(f.matrix.inverse());

    auto run = [&](std::size_t r) {
        Stream s(opt.seed, r, StreamTag::Restart);
        State  st;
        const int k = 1 + static_cast<int>(s.below(static_cast<std::uint64_t>(opt.supportSize)));
        for (int i = 0; i < k; ++i) {
            const bool useFixed = !fixed.empty() && s.uniform() < 0.5;
            st.locs.push_back(useFixed ? fixed[s.below(fixed.size())] : random_direction(d, s));
            st.weights.push_back(0.5 + s.uniform());
        }
        double value = objective(mu, st);
        double sigma = 0.3;
        for (int it = 0; it < opt.iterations && value > 0.0; ++it) {
            value = weight_step(mu, st, value);
            if (st.locs.empty()) break;

            // Location move for one atom, cycling through the support.
            const std::size_t i     = static_cast<std::size_t>(it) % st.locs.size();
            State             trial = st;
            const double      u     = s.uniform();
            if (u < 0.3 && !fixed.empty()) {
                trial.locs[i] = fixed[s.below(fixed.size())];
            } else if (u < 0.6) {
                // Preimage f^-1 g(x_j): aligns one image of x_i with one image of x_j.
                const std::size_t j = s.below(st.locs.size());
                const Matrix&     g = sup.atoms[s.below(sup.atoms.size())].matrix;
                const Matrix&     h = inverses[s.below(inverses.size())];
                trial.locs[i]       = (h * (g * st.locs[j])).normalized();
            } else if (u < 0.7 && static_cast<int>(st.locs.size()) < opt.supportSize) {
                trial.locs.push_back(random_direction(d, s));
                trial.weights.push_back(st.weights[i] * 0.5);
            } else {
                Vector v = st.locs[i];
                for (int c = 0; c < d; ++c) v[c] += sigma * s.normal();
                if (v.norm() < 1e-9) continue;
                trial.locs[i] = v.normalized();
            }
            const double tv = objective(mu, trial);
            if (tv < value) {
                st    = std::move(trial);
                value = tv;
            } else {
                sigma = std::max(sigma * 0.97, 1e-6);
            }
        }
        PsiApprox out;
        out.nu      = to_measure(st);
        out.value   = furstenberg_entropy(mu, out.nu).phi;
        out.restart = r;
        return out;
    };

    auto results = parallel_map(opt.restarts, opt.workers, run);
    auto best    = std::min_element(results.begin(), results.end(), [](const PsiApprox& a, const PsiApprox& b) {
        return a.value < b.value || (a.value == b.value && a.restart < b.restart);
    });
    return *best;
}

}  // namespace furst
