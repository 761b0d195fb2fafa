#pragma once

#include "furst/ensemble.hpp"
#include "furst/measure.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace furst {

struct DissolveOptions {
    double      mergeTol = kMergeTol;
    double      pruneTol = kPruneTol;
    std::size_t capacity = 1'000'000;
    bool        keepTransitions = true;
};

inline constexpr std::size_t kPruned = std::numeric_limits<std::size_t>::max();

/// Atom `source` of the old measure mapped by support map `map` onto atom `target`
/// of the new one (kPruned if that atom went to the diffuse remainder).
struct Transition {
    std::size_t source = 0;
    std::size_t map    = 0;
    std::size_t target = 0;
    double      weight = 0.0;  // w_f
};

template <class Loc>
struct DissolveStep {
    AtomicMeasure<Loc>      before;
    AtomicMeasure<Loc>      after;
    std::vector<Transition> transitions;  // when keepTransitions
    double energyBefore = 0.0;
    double energyAfter  = 0.0;  // after pruning
    double variance     = 0.0;  // D = sum_j D_j over all images, pruned ones included
    double prunedMass   = 0.0;
    std::size_t prunedCount = 0;
    /// Images where sum_i p_ij > 1, i.e. p_0j < 0: two atoms sent to one point by the same
    /// map. Impossible for invertible maps unless the merge tolerance glued distinct images.
    std::size_t collisions = 0;
    double maxRowDefect = 0.0;     // max_i |sum_j p_ij - 1|
    double maxWeightDefect = 0.0;  // max_j |m'_j - sum_i p_ij m_i|

    /// |E - E' - D|, bounded by 1e-10 plus the pruned mass.
    double identity_gap() const { return std::abs(energyBefore - energyAfter - variance); }
};

/// One exact convolution step nu -> mu * nu with the p_ij bookkeeping.
template <class Loc>
DissolveStep<Loc> push_measure(const MatrixEnsemble& mu, const AtomicMeasure<Loc>& nu,
                               const DissolveOptions& options = {});

struct DissolveRow {
    long        step     = 0;
    double      maxAtom  = 0.0;
    double      energy   = 0.0;
    double      variance = 0.0;  // D of the step that produced this row (0 at step 0)
    std::size_t atomCount = 0;
    double      diffuse   = 0.0;
    double      prunedMass = 0.0;
    double      identityGap = 0.0;
};

struct DissolveReport {
    std::vector<DissolveRow> rows;  // rows[0] is the initial measure
    /// exp of the least-squares slope of log(Max_n / Max_0) against n through the origin.
    double maxRate    = 1.0;
    double energyRate = 1.0;
    /// max_n (Max_n / Max_0)^(1/n): the smallest rate with Max_n <= rate^n Max_0 for every n.
    double maxEnvelope = 1.0;
};

/// Iterates push_measure along steps 1..n of the schedule. Throws InternalConsistencyError
/// if the energy identity or the monotonicity of Max and E fail beyond pruning slack.
DissolveReport dissolve_run(const Schedule& s, const ProjectiveMeasure& nu0, long n,
                            const DissolveOptions& options = {});
DissolveReport grassmann_dissolve(const Schedule& s, const Subspace& l0, long n,
                                  const DissolveOptions& options = {});

/// Rate fits shared by the two runs.
void fit_rates(DissolveReport& report);

// ---------------------------------------------------------------- subspace avoidance

enum class HitMode { Exact, MonteCarlo };

struct HitEstimate {
    double      probability = 0.0;
    double      stdError    = 0.0;  // binomial, Monte Carlo only
    HitMode     mode        = HitMode::Exact;
    std::size_t trials      = 0;    // exact: number of atoms enumerated
};

/// proj_distance(x, L) < rho, with points inside [L] (within mergeTol) always counted.
bool in_neighbourhood(const ProjectivePoint& x, const Subspace& l, double rho);
double neighbourhood_mass(const ProjectiveMeasure& nu, const Subspace& l, double rho);

/// Exact law of the k-step image of x0 (no pruning).
ProjectiveMeasure image_law(const Schedule& s, const ProjectivePoint& x0, long k, std::size_t capacity = 1'000'000);

HitEstimate subspace_hit_exact(const Schedule& s, const ProjectivePoint& x0, const Subspace& l, long k,
                               double rho, std::size_t capacity = 1'000'000);
HitEstimate subspace_hit_mc(const Schedule& s, const ProjectivePoint& x0, const Subspace& l, long k, double rho,
                            std::size_t trials, std::uint64_t seed, int workers = 1);

struct WorstHit {
    double probability = 0.0;
    double angle       = 0.0;  // of the worst line
};
/// d = 2: max over lines at angles i pi / grid, i < grid, of the exact hit probability.
WorstHit worst_line_hit(const Schedule& s, const ProjectivePoint& x0, long k, double rho, int grid = 100);

// ---------------------------------------------------------------- heavy subspaces

enum class LMStatus { Ok, HypothesisNotMet, BoundViolated };

struct HeavySubspace {
    Subspace span;
    double   mass        = 0.0;
    double   hitRate     = 0.0;
    double   hitStdError = 0.0;
};

struct LMReport {
    LMStatus    status = LMStatus::Ok;
    int         m      = 2;
    double      epsilon = 0.0;
    long        bound   = 0;   // N = floor(2^(2m-1) / eps^m)
    double      lowerMass = 0.0;  // max nu([L]) over atom-spanned L of dimension < m
    std::vector<HeavySubspace> heavy;
    double      hitBound  = 0.0;  // eps^m / 2^(2m-1)
    std::size_t samples   = 0;
    bool        hitsOk    = true;  // every heavy hit rate >= hitBound - 3 sigma
};

long lm_bound(int m, double epsilon);

/// Checks the heavy-subspace counting bound on an atomic measure in RP^(d-1).
/// Subspaces of dimension m carrying mass >= eps/2 are spanned by atoms once the
/// hypothesis (mass <= eps/4 on every (m-1)-subspace) holds, so enumerating
/// atom-spanned candidates is exhaustive.
LMReport lemma_LM_check(const ProjectiveMeasure& nu, int m, double epsilon, std::size_t samples = 0,
                        std::uint64_t seed = 1);

}  // namespace furst
