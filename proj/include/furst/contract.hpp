#pragma once

#include "furst/ensemble.hpp"
#include "furst/product.hpp"

#include <cstdint>
#include <vector>

namespace furst {

enum class DirectionStatus { Ok, Degenerate };

struct ContractedDirection {
    DirectionStatus status = DirectionStatus::Ok;
    ProjectivePoint vBar;         // bottom right-singular direction of T_n
    ProjectivePoint top;          // top right-singular direction
    double          logVec = 0.0;  // log |T_n vBar| (= -log ||T_n|| for det 1)
};

/// d = 2 only. Degenerate when sigma_1 = sigma_2 within 1e-9 (log scale below 5e-10).
ContractedDirection contracted_direction(const ScaledMatrix& product);

/// log |T u| for T = exp(s) F in SL(2), ||F|| = 1, evaluated without forming F u so the
/// contracted component (size exp(-2s)) is not lost to cancellation.
double log_image_length(const ScaledMatrix& product, const Vector& u);

/// f(n) = min_{m >= n} (L_m - (lambda/2)(m - n)) by a right-to-left running minimum.
std::vector<double> f_schedule(const std::vector<double>& lhat, double lambda);

struct LsCheckpoint {
    long   k        = 0;
    double sumNorms = 0.0;  // sum_{n=0}^{k-1} ||A_{n+1}||^2 / ||T_n||^2, T_0 = Id
    double sumExp   = 0.0;  // sum_{n=1}^{k} exp(-eps f(n))
    double ratio    = 0.0;  // log ||T_k|| / f(k)
};

enum class LsStatus { Ok, NotApplicable };

struct LsReport {
    LsStatus                  status = LsStatus::Ok;
    std::vector<LsCheckpoint> checkpoints;
    bool normsBounded = true;  // final sumNorms below normThreshold
    bool expBounded   = true;  // final sumExp below expThreshold
    bool ratioNearOne = true;  // final ratio within [1 - ratioBand, 1 + ratioBand]
};

struct LsThresholds {
    double epsilon       = 0.1;
    double normThreshold = 1e6;
    double expThreshold  = 1e6;
    double ratioBand     = 0.2;
};

/// Trend report of the three series hypotheses. `rec` needs recordSteps; f[k-1] = f(k).
/// NotApplicable when f is not positive on the tail (e.g. isometric products).
LsReport ls_hypotheses_check(const TrajectoryRecord& rec, const std::vector<double>& f,
                             const LsThresholds& thresholds = {});

struct ContractionRow {
    std::size_t trial     = 0;
    long        n         = 0;
    double      logVecBar = 0.0;
    double      lhat      = 0.0;
    double      defect    = 0.0;  // (log |T_n vBar| + L_n) / n
    bool        degenerate = false;
};

struct ContractionStats {
    long        n              = 0;
    double      lhat           = 0.0;  // from the disjoint reference block
    double      meanDefect     = 0.0;
    double      meanAbsDefect  = 0.0;
    double      maxAbsDefect   = 0.0;
    std::size_t degenerate     = 0;
    bool        unsuitable     = false;  // degenerate in more than 1% of trials
    /// Mean sin-distance between the horizon-n direction and the one at n/2.
    double      meanStabilization = 0.0;
    std::vector<ContractionRow> rows;
};

/// Per-trial defect with vBar taken at the horizon n. Trials use Stream(seed, i);
/// L_n is estimated from the same number of trials in the Reference domain.
ContractionStats verify_contraction(const Schedule& s, long n, std::size_t trials, std::uint64_t seed,
                                    int workers = 1);

}  // namespace furst
