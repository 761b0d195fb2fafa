#include "furst/dissolve.hpp"

#include "furst/errors.hpp"
#include "furst/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <tuple>

namespace furst {

template <class Loc>
DissolveStep<Loc> push_measure(const MatrixEnsemble& mu, const AtomicMeasure<Loc>& nu, const DissolveOptions& opt) {
    const auto&       sup   = mu.support();
    const std::size_t atoms = nu.size();
    const std::size_t maps  = sup.atoms.size();

    std::vector<Atom<Loc>> raw;
    raw.reserve(atoms * maps);
    for (std::size_t f = 0; f < maps; ++f)
        for (std::size_t i = 0; i < atoms; ++i) {
            const auto& a = nu.atoms()[i];
            raw.push_back({act(sup.atoms[f].matrix, a.loc), sup.atoms[f].weight * a.weight});
        }
    MergeResult<Loc> merged = merge_atoms(raw, opt.mergeTol);

    DissolveStep<Loc> step;
    step.energyBefore = nu.energy();

    // p_ij = sum of w_f over maps f with f(x_i) = y_j; rows sorted by (j, i).
    struct Entry {
        std::size_t j, i;
        double      p;
    };
    std::vector<Entry> entries;
    entries.reserve(raw.size());
    for (std::size_t f = 0; f < maps; ++f)
        for (std::size_t i = 0; i < atoms; ++i)
            entries.push_back({merged.target[f * atoms + i], i, sup.atoms[f].weight});
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return std::tie(a.j, a.i) < std::tie(b.j, b.i); });

    std::vector<double> rowSum(atoms, 0.0);
    double              variance = 0.0;
    for (std::size_t e = 0; e < entries.size();) {
        const std::size_t j = entries[e].j;
        // Aggregate p_ij over the maps that send x_i to y_j.
        std::vector<std::pair<std::size_t, double>> col;
        for (; e < entries.size() && entries[e].j == j; ++e) {
            if (!col.empty() && col.back().first == entries[e].i) col.back().second += entries[e].p;
            else col.emplace_back(entries[e].i, entries[e].p);
        }
        const double mj     = merged.atoms[j].weight;
        double       colSum = 0.0, predicted = 0.0, dj = 0.0;
        for (const auto& [i, p] : col) {
            const double mi = nu.atoms()[i].weight;
            colSum += p;
            predicted += p * mi;
            dj += p * (mi - mj) * (mi - mj);
            rowSum[i] += p;
        }
        const double p0 = 1.0 - colSum;
        if (p0 < -1e-12) ++step.collisions;
        dj += p0 * mj * mj;
        variance += dj;
        step.maxWeightDefect = std::max(step.maxWeightDefect, std::abs(predicted - mj));
    }
    for (double r : rowSum) step.maxRowDefect = std::max(step.maxRowDefect, std::abs(r - 1.0));
    step.variance = variance;

    // Pruning into the diffuse remainder.
    std::vector<std::size_t> renumber(merged.atoms.size(), kPruned);
    MergeResult<Loc>         kept;
    for (std::size_t j = 0; j < merged.atoms.size(); ++j) {
        if (merged.atoms[j].weight < opt.pruneTol) {
            step.prunedMass += merged.atoms[j].weight;
            ++step.prunedCount;
            continue;
        }
        renumber[j] = kept.atoms.size();
        kept.atoms.push_back(std::move(merged.atoms[j]));
        kept.keys.push_back(merged.keys[j]);
    }
    if (kept.atoms.size() > opt.capacity) {
        std::ostringstream os;
        os << "push_measure: " << kept.atoms.size() << " atoms exceed the capacity " << opt.capacity
           << "; raise pruneTol (now " << opt.pruneTol << ") or shorten the run";
        throw CapacityError(os.str());
    }
    if (opt.keepTransitions) {
        step.transitions.reserve(raw.size());
        for (std::size_t f = 0; f < maps; ++f)
            for (std::size_t i = 0; i < atoms; ++i)
                step.transitions.push_back({i, f, renumber[merged.target[f * atoms + i]], sup.atoms[f].weight});
    }
    step.before = nu;
    step.after  = AtomicMeasure<Loc>::unchecked(std::move(kept), nu.diffuse() + step.prunedMass, nu.merge_tol());
    step.energyAfter = step.after.energy();
    return step;
}

template DissolveStep<ProjectivePoint> push_measure(const MatrixEnsemble&, const ProjectiveMeasure&,
                                                    const DissolveOptions&);
template DissolveStep<Subspace>        push_measure(const MatrixEnsemble&, const GrassmannMeasure&,
                                                    const DissolveOptions&);

void fit_rates(DissolveReport& rep) {
    if (rep.rows.empty()) return;
    const double max0 = rep.rows.front().maxAtom, e0 = rep.rows.front().energy;
    double       sxy = 0.0, sxx = 0.0, exy = 0.0;
    double       envelope = 0.0;
    for (std::size_t k = 1; k < rep.rows.size(); ++k) {
        const auto& r = rep.rows[k];
        if (!(r.maxAtom > 0.0) || !(r.energy > 0.0)) break;  // everything pruned
        const double n = static_cast<double>(r.step);
        const double y = std::log(r.maxAtom / max0);
        sxy += n * y;
        exy += n * std::log(r.energy / e0);
        sxx += n * n;
        envelope = std::max(envelope, std::exp(y / n));
    }
    if (sxx > 0.0) {
        rep.maxRate     = std::exp(sxy / sxx);
        rep.energyRate  = std::exp(exy / sxx);
        rep.maxEnvelope = envelope;
    }
}

namespace {

template <class Loc>
DissolveReport run_dissolve(const Schedule& s, const AtomicMeasure<Loc>& nu0, long n, DissolveOptions opt) {
    if (n < 0) throw InvalidInputError("dissolve_run: negative step count");
    opt.keepTransitions = false;
    DissolveReport rep;
    rep.rows.push_back({0, nu0.max_atom(), nu0.energy(), 0.0, nu0.size(), nu0.diffuse(), 0.0, 0.0});
    AtomicMeasure<Loc> nu = nu0;
    for (long k = 1; k <= n; ++k) {
        const auto   step = push_measure(s.at(k), nu, opt);
        DissolveRow  row{k,
                        step.after.max_atom(),
                        step.energyAfter,
                        step.variance,
                        step.after.size(),
                        step.after.diffuse(),
                        step.prunedMass,
                        step.identity_gap()};
        const auto& prev = rep.rows.back();
        std::ostringstream os;
        os.precision(17);
        if (row.identityGap > 1e-10 + step.prunedMass)
            os << "energy identity gap " << row.identityGap << " at step " << k;
        else if (row.maxAtom > prev.maxAtom + 1e-12)
            os << "maximal atom grew from " << prev.maxAtom << " to " << row.maxAtom << " at step " << k;
        else if (row.energy > prev.energy + 1e-12)
            os << "energy grew from " << prev.energy << " to " << row.energy << " at step " << k;
        else if (step.maxWeightDefect > 1e-12 || step.maxRowDefect > 1e-12)
            os << "transition table inconsistent at step " << k;
        if (!os.str().empty()) throw InternalConsistencyError("dissolve_run: " + os.str());
        rep.rows.push_back(row);
        nu = step.after;
    }
    fit_rates(rep);
    return rep;
}

}  // namespace

DissolveReport dissolve_run(const Schedule& s, const ProjectiveMeasure& nu0, long n, const DissolveOptions& opt) {
    return run_dissolve(s, nu0, n, opt);
}

DissolveReport grassmann_dissolve(const Schedule& s, const Subspace& l0, long n, const DissolveOptions& opt) {
    return run_dissolve(s, GrassmannMeasure::dirac(l0), n, opt);
}

// ---------------------------------------------------------------- subspace avoidance

bool in_neighbourhood(const ProjectivePoint& x, const Subspace& l, double rho) {
    if (rho >= 1.0) return true;
    const double dist = proj_distance(x, l);
    return dist < rho || dist <= kMergeTol;
}

double neighbourhood_mass(const ProjectiveMeasure& nu, const Subspace& l, double rho) {
    double mass = 0.0;
    for (const auto& a : nu.atoms())
        if (in_neighbourhood(a.loc, l, rho)) mass += a.weight;
    return mass;
}

namespace {
void check_rho(double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidInputError("subspace_hit: rho must lie in [0, 1]");
}
}  // namespace

ProjectiveMeasure image_law(const Schedule& s, const ProjectivePoint& x0, long k, std::size_t capacity) {
    DissolveOptions opt;
    opt.pruneTol        = 0.0;
    opt.capacity        = capacity;
    opt.keepTransitions = false;
    ProjectiveMeasure nu = ProjectiveMeasure::dirac(x0);
    for (long step = 1; step <= k; ++step) nu = push_measure(s.at(step), nu, opt).after;
    return nu;
}

HitEstimate subspace_hit_exact(const Schedule& s, const ProjectivePoint& x0, const Subspace& l, long k, double rho,
                               std::size_t capacity) {
    check_rho(rho);
    const ProjectiveMeasure nu = image_law(s, x0, k, capacity);
    HitEstimate             h;
    h.mode        = HitMode::Exact;
    h.probability = neighbourhood_mass(nu, l, rho);
    h.trials      = nu.size();
    return h;
}

HitEstimate subspace_hit_mc(const Schedule& s, const ProjectivePoint& x0, const Subspace& l, long k, double rho,
                            std::size_t trials, std::uint64_t seed, int workers) {
    check_rho(rho);
    if (trials == 0) throw InvalidInputError("subspace_hit: need at least one trial");
    const auto hits = parallel_map(trials, workers, [&](std::size_t i) {
        Stream          stream(seed, i, StreamTag::Sampling);
        ProjectivePoint x = x0;
        for (long step = 1; step <= k; ++step) x = projective_apply(s.at(step).draw(stream).matrix, x);
        return in_neighbourhood(x, l, rho) ? 1 : 0;
    });
    double count = 0.0;
    for (int h : hits) count += h;
    HitEstimate h;
    h.mode        = HitMode::MonteCarlo;
    h.trials      = trials;
    h.probability = count / static_cast<double>(trials);
    h.stdError    = std::sqrt(h.probability * (1.0 - h.probability) / static_cast<double>(trials));
    return h;
}

WorstHit worst_line_hit(const Schedule& s, const ProjectivePoint& x0, long k, double rho, int grid) {
    check_rho(rho);
    if (s.dim() != 2) throw InvalidInputError("worst_line_hit: lines of R^2 only");
    if (grid < 1) throw InvalidInputError("worst_line_hit: empty grid");
    const ProjectiveMeasure nu = image_law(s, x0, k);
    WorstHit                worst{-1.0, 0.0};
    for (int i = 0; i < grid; ++i) {
        const double angle = M_PI * i / grid;
        const double p     = neighbourhood_mass(nu, Subspace::span_of({ProjectivePoint::from_angle(angle).rep()}), rho);
        if (p > worst.probability) worst = {p, angle};
    }
    return worst;
}

// ---------------------------------------------------------------- heavy subspaces

long lm_bound(int m, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InvalidInputError("lemma_LM: epsilon must lie in (0, 1]");
    const double n = std::ldexp(1.0, 2 * m - 1) / std::pow(epsilon, m);
    return static_cast<long>(std::floor(n * (1.0 + 1e-12)));
}

namespace {

/// Calls fn on every independent r-subset of the atom representatives, as a subspace.
void for_each_span(const std::vector<Vector>& pts, int r, const std::function<void(const Subspace&)>& fn) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(r));
    std::function<void(std::size_t, int)> rec = [&](std::size_t start, int depth) {
        if (depth == r) {
            std::vector<Vector> vs;
            for (std::size_t i : idx) vs.push_back(pts[i]);
            // Independence with margin: each vector must leave the span of the previous.
            for (int k = 1; k < r; ++k) {
                const Subspace prev(std::span<const Vector>(vs.data(), static_cast<std::size_t>(k)));
                if (prev.residual(vs[static_cast<std::size_t>(k)]) <= 1e-9) return;
            }
            fn(Subspace(vs));
            return;
        }
        for (std::size_t i = start; i < pts.size(); ++i) {
            idx[static_cast<std::size_t>(depth)] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
}

double subspace_mass(const ProjectiveMeasure& nu, const Subspace& l) {
    double m = 0.0;
    for (const auto& a : nu.atoms())
        if (l.residual(a.loc.rep()) <= kMergeTol) m += a.weight;
    return m;
}

}  // namespace

LMReport lemma_LM_check(const ProjectiveMeasure& nu, int m, double epsilon, std::size_t samples, std::uint64_t seed) {
    const int d = nu.space_dim();
    if (m < 2 || m > d - 1) throw InvalidInputError("lemma_LM_check: need 2 <= m <= d - 1");
    LMReport rep;
    rep.m        = m;
    rep.epsilon  = epsilon;
    rep.bound    = lm_bound(m, epsilon);
    rep.hitBound = std::pow(epsilon, m) / std::ldexp(1.0, 2 * m - 1);
    rep.samples  = samples;

    std::vector<Vector> pts;
    for (const auto& a : nu.atoms()) pts.push_back(a.loc.rep());

    // Hypothesis: nu([L]) <= eps/4 on every L of dimension m - 1. The heaviest such L
    // is spanned by atoms (or contains fewer independent atoms, then a smaller span).
    for (int r = 1; r <= m - 1; ++r)
        for_each_span(pts, r, [&](const Subspace& l) { rep.lowerMass = std::max(rep.lowerMass, subspace_mass(nu, l)); });
    if (rep.lowerMass > epsilon / 4.0 + 1e-12) {
        rep.status = LMStatus::HypothesisNotMet;
        return rep;
    }

    std::vector<Subspace> seen;
    for_each_span(pts, m, [&](const Subspace& l) {
        for (const auto& s : seen)
            if (subspace_distance(s, l) <= kMergeTol) return;
        seen.push_back(l);
        const double mass = subspace_mass(nu, l);
        if (mass >= epsilon / 2.0 - 1e-12) rep.heavy.push_back({l, mass, 0.0, 0.0});
    });
    if (static_cast<long>(rep.heavy.size()) > rep.bound) rep.status = LMStatus::BoundViolated;

    if (samples > 0 && !rep.heavy.empty()) {
        // Xi = span(y_1, ..., y_m) for i.i.d. y_k ~ nu when the span has dimension m.
        std::vector<double> cumulative;
        double              acc = 0.0;
        for (const auto& a : nu.atoms()) cumulative.push_back(acc += a.weight);
        Stream                   stream(seed, 0, StreamTag::Sampling);
        std::vector<std::size_t> hits(rep.heavy.size(), 0);
        for (std::size_t t = 0; t < samples; ++t) {
            std::vector<Vector> ys;
            for (int k = 0; k < m; ++k) {
                const double u  = stream.uniform() * acc;
                const auto   it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
                ys.push_back(pts[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), pts.size() - 1)]);
            }
            bool independent = true;
            for (int k = 1; k < m && independent; ++k) {
                const Subspace prev(std::span<const Vector>(ys.data(), static_cast<std::size_t>(k)));
                independent = prev.residual(ys[static_cast<std::size_t>(k)]) > 1e-9;
            }
            if (!independent) continue;
            for (std::size_t h = 0; h < rep.heavy.size(); ++h) {
                bool inside = true;
                for (const auto& y : ys) inside = inside && rep.heavy[h].span.residual(y) <= kMergeTol;
                if (inside) ++hits[h];
            }
        }
        const double n     = static_cast<double>(samples);
        const double sigma = std::sqrt(rep.hitBound * (1.0 - rep.hitBound) / n);
        for (std::size_t h = 0; h < rep.heavy.size(); ++h) {
            auto& hv       = rep.heavy[h];
            hv.hitRate     = static_cast<double>(hits[h]) / n;
            hv.hitStdError = std::sqrt(hv.hitRate * (1.0 - hv.hitRate) / n);
            if (hv.hitRate < rep.hitBound - 3.0 * sigma) rep.hitsOk = false;
        }
    }
    return rep;
}

}  // namespace furst
