#pragma once

#include "furst/ensemble.hpp"
#include "furst/linalg.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace furst {

struct TrajectoryOptions {
    long            n = 1;
    ProjectivePoint v0;            // defaults to e_1 when left empty
    int             blockSize   = 0;  // 0 disables block statistics; otherwise must divide n
    int             splitPrefix = 0;  // k' < blockSize: split each block as B' Q with |Q| = k'
    std::vector<long> checkpoints;    // extra checkpoints; geometric ones are always added
    bool            geometricCheckpoints = true;
    bool            recordSteps  = false;  // per-step log||T_k|| and log||A_k||
    bool            recordFrames = false;  // renormalized product at each checkpoint
    bool            recordTags   = false;  // per-step draw tags
};

struct Checkpoint {
    long   k       = 0;
    double logNorm = 0.0;  // log ||T_k||
    double logVec  = 0.0;  // log |T_k v0|
};

struct BlockStat {
    double xi = 0.0;  // log ||B_j||
    double r  = 0.0;  // log ||B_j|| - log |B_j v_{j-1}|
    // Only with splitPrefix > 0: B_j = B'_j Q_j.
    double thetaOuter     = 0.0;  // Theta(B'_j, Q_j v_{j-1} / |.|)
    double thetaInner     = 0.0;  // Theta(Q_j, v_{j-1})
    double hyperplaneSine = 1.0;  // sine of the angle between Q_j v_{j-1} and the top-direction hyperplane of B'_j
};

/// A renormalized product: the matrix equals exp(logScale) * frame, ||frame|| = 1.
struct ScaledMatrix {
    Matrix frame;
    double logScale = 0.0;
};

struct TrajectoryRecord {
    long                    n = 0;
    int                     blockSize = 0;
    int                     splitPrefix = 0;
    std::vector<Checkpoint> checkpoints;  // ascending k, always ends with k = n
    std::vector<BlockStat>  blocks;
    ScaledMatrix            final;
    double                  logVec = 0.0;        // log |T_n v0|
    double                  maxStepLogNorm = 0.0;  // max_k log ||A_k||
    double                  maxIncrement = 0.0;    // max_k |log||T_k|| - log||T_{k-1}|||
    std::vector<double>     stepLogNorm;  // [k-1] = log ||T_k||, when recorded
    std::vector<double>     stepLogA;     // [k-1] = log ||A_k||, when recorded
    std::vector<ScaledMatrix> frames;     // parallel to checkpoints, when recorded
    std::vector<std::uint32_t> tags;      // [k-1] = tag of A_k, when recorded

    const Checkpoint& at(long k) const;
};

struct LnEstimate {
    long        n      = 0;
    double      mean   = 0.0;  // nats
    double      stdError = 0.0;
    std::size_t trials = 0;
};

/// Geometric checkpoints floor(n 2^-j) >= 1 merged with `extra`, sorted, unique, ending at n.
std::vector<long> checkpoint_schedule(long n, const std::vector<long>& extra, bool geometric);

/// Runs T_n = A_n ... A_1 keeping the product as (unit-norm frame, log scale).
TrajectoryRecord run_trajectory(const Schedule& s, const TrajectoryOptions& options, Stream& stream);

/// Unrenormalized product log-norm, used to cross-check renormalization on short runs.
double direct_log_norm(const Schedule& s, long n, Stream& stream);

LnEstimate summarize(long n, const std::vector<double>& samples);

/// log ||T_n|| over `trials` independent trajectories; trial i uses Stream(seed, i).
std::vector<double> sample_log_norms(const Schedule& s, long n, std::size_t trials, std::uint64_t seed,
                                     int workers, StreamTag tag = StreamTag::Trial);

LnEstimate estimate_Ln(const Schedule& s, long n, std::size_t trials, std::uint64_t seed, int workers = 1);

/// L_k estimates at every step k = 1..n from shared trajectories.
std::vector<LnEstimate> estimate_Ln_series(const Schedule& s, long n, std::size_t trials, std::uint64_t seed,
                                           int workers = 1);

/// Single long trajectory: returns log||T_n|| / n and a batch-means standard error.
struct LongRunEstimate {
    double      rate    = 0.0;
    double      stdError = 0.0;
    std::size_t batches = 0;
};
LongRunEstimate long_run_rate(const Schedule& s, long n, std::size_t batches, std::uint64_t seed);

enum class TailMode { Norm, Vector };

struct TailEstimate {
    long        n         = 0;
    double      epsilon   = 0.0;
    double      frequency = 0.0;
    double      reference = 0.0;  // L_n estimate from the disjoint seed block
    std::size_t trials    = 0;
};

/// Empirical P(|X_n - L_n| > eps n), X_n = log||T_n|| (Norm) or log|T_n e_1| (Vector).
/// L_n comes from a disjoint stream domain of the same seed.
TailEstimate ld_tail(const Schedule& s, long n, double epsilon, std::size_t trials, std::uint64_t seed,
                     TailMode mode, int workers = 1);

struct BlockReport {
    double sumXi   = 0.0;
    double sumR    = 0.0;
    double logNorm = 0.0;
    double logVec  = 0.0;
    double meanR   = 0.0;  // sum R_j / n
    double minR    = 0.0;
    // The next two are only populated for split blocks.
    /// max_j (R_j - thetaOuter_j - thetaInner_j); <= ~0 by subadditivity.
    double worstSubadditivity = 0.0;
    /// max_j (thetaOuter_j + log hyperplaneSine_j); <= ~0 since |B' u| >= ||B'|| sin rho.
    double worstHyperplaneBound = 0.0;
};

/// Checks Sum xi >= log||T_n|| >= log|T_n v0| = Sum xi - Sum R within 1e-6 n and
/// R_j >= -1e-9. Throws InternalConsistencyError on violation.
BlockReport block_diagnostics(const TrajectoryRecord& rec);

}  // namespace furst
