#pragma once

#include <cstdint>
#include <vector>

namespace furst {

/// Exact 1-D two-means: the split of the sorted sample minimizing the within-cluster sum of squares.
struct TwoMeans {
    double      low       = 0.0;  // centre of the lower cluster
    double      high      = 0.0;
    double      threshold = 0.0;  // values > threshold belong to the upper cluster
    std::size_t lowCount  = 0;
    std::size_t highCount = 0;
    double      withinSS  = 0.0;
};
TwoMeans two_means(std::vector<double> sample);

enum class HorizonRule { Double, Stretch };

struct AppendixConfig {
    std::vector<long> levels{50, 5000};  // n_m, strictly increasing
    HorizonRule       horizon  = HorizonRule::Double;
    double            c        = 1.0;  // Stretch: n'_m = ceil((1 + c) n_m)
    double            minRatio = 4.0;  // n_{m+1} / n_m >= minRatio >= 4
    std::size_t       trials   = 200;
    long              lambdaSteps  = 10000;  // 2x2 run for the base exponent
    std::size_t       lambdaTrials = 200;

    long horizon_for(long n) const;
    /// Throws ValidationError on a malformed configuration.
    void validate() const;
};

struct AppendixLevel {
    long                n      = 0;
    long                nPrime = 0;
    std::vector<double> values;   // (1/n') log ||T_{n'}|| per trial
    std::vector<bool>   swapped;  // Q drawn at step n was the block swap
    TwoMeans            split;
    double              separation = 0.0;  // high - low
    double              meanId     = 0.0;  // conditional means given the logged Q
    double              meanSwap   = 0.0;
    std::size_t         countId    = 0;
    std::size_t         countSwap  = 0;
    double              agreement  = 0.0;  // fraction with (upper cluster) == (Q = Id)
    double              etaId      = 0.0;  // predicted lambda + log 100
    double              etaSwap    = 0.0;  // predicted lambda + |1-c|/(1+c) log 100
};

struct AppendixReport {
    double                     lambda         = 0.0;  // base 2x2 exponent estimate
    double                     lambdaStdError = 0.0;
    double                     c              = 1.0;
    std::vector<AppendixLevel> levels;
};

/// Runs the SL(4) bimodality construction: alpha (block scaling) everywhere except at the
/// levels, where Q * alpha is used with Q the block swap with probability 1/2.
AppendixReport appendix_experiment(const AppendixConfig& config, std::uint64_t seed, int workers = 1);

}  // namespace furst
