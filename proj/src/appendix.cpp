#include "furst/appendix.hpp"

#include "furst/ensemble.hpp"
#include "furst/errors.hpp"
#include "furst/parallel.hpp"
#include "furst/product.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace furst {

TwoMeans two_means(std::vector<double> x) {
    if (x.size() < 2) throw InvalidInputError("two_means: need at least two values");
    std::sort(x.begin(), x.end());
    const std::size_t   n = x.size();
    std::vector<double> s(n + 1, 0.0), q(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        s[i + 1] = s[i] + x[i];
        q[i + 1] = q[i] + x[i] * x[i];
    }
    auto ss = [&](std::size_t a, std::size_t b) {  // [a, b)
        const double cnt = static_cast<double>(b - a);
        const double sum = s[b] - s[a];
        return std::max(0.0, (q[b] - q[a]) - sum * sum / cnt);
    };
    TwoMeans best;
    best.withinSS = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < n; ++k) {
        const double w = ss(0, k) + ss(k, n);
        if (w < best.withinSS) {
            best.withinSS  = w;
            best.lowCount  = k;
            best.highCount = n - k;
            best.low       = s[k] / static_cast<double>(k);
            best.high      = (s[n] - s[k]) / static_cast<double>(n - k);
            best.threshold = 0.5 * (x[k - 1] + x[k]);
        }
    }
    return best;
}

long AppendixConfig::horizon_for(long n) const {
    if (horizon == HorizonRule::Double) return 2 * n;
    return static_cast<long>(std::ceil((1.0 + c) * static_cast<double>(n)));
}

void AppendixConfig::validate() const {
    if (levels.empty()) throw ValidationError("appendix.levels: at least one level required");
    if (!(minRatio >= 4.0)) throw ValidationError("appendix.min_ratio: must be >= 4");
    if (horizon == HorizonRule::Stretch && !(c > 0.0)) throw ValidationError("appendix.c: must be > 0");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 1) throw ValidationError("appendix.levels[" + std::to_string(i) + "]: must be >= 1");
        if (i > 0 && static_cast<double>(levels[i]) < minRatio * static_cast<double>(levels[i - 1]))
            throw ValidationError("appendix.levels[" + std::to_string(i) + "]: ratio to the previous level below " +
                                  std::to_string(minRatio));
    }
    if (trials < 20) throw ValidationError("appendix.trials: at least 20 trials are needed for the split");
    if (lambdaSteps < 1 || lambdaTrials < 2) throw ValidationError("appendix.lambda: need steps >= 1, trials >= 2");
}

AppendixReport appendix_experiment(const AppendixConfig& cfg, std::uint64_t seed, int workers) {
    cfg.validate();
    AppendixReport rep;
    rep.c = cfg.horizon == HorizonRule::Double ? 1.0 : cfg.c;

    // Base exponent of the 2x2 blocks, from its own seed domain.
    const Schedule base = Schedule::stationary(MatrixEnsemble::hyperbolic_rotation_mix(2.0, 0.5));
    const auto     lam  = estimate_Ln(base, cfg.lambdaSteps, cfg.lambdaTrials, child_seed(seed, 1), workers);
    rep.lambda          = lam.mean / static_cast<double>(cfg.lambdaSteps);
    rep.lambdaStdError  = lam.stdError / static_cast<double>(cfg.lambdaSteps);

    std::vector<long> horizons;
    for (long n : cfg.levels) horizons.push_back(cfg.horizon_for(n));
    const long     last = *std::max_element(horizons.begin(), horizons.end());
    const Schedule sched({MatrixEnsemble::appendix_alpha(), MatrixEnsemble::appendix_beta()},
                         AppendixLevels{cfg.levels, 0, 1}, last);

    struct Trial {
        std::vector<double> values;
        std::vector<char>   swapped;
    };
    const std::uint64_t trialSeed = child_seed(seed, 2);
    const auto          trials    = parallel_map(cfg.trials, workers, [&](std::size_t i) {
        Stream            stream(trialSeed, i, StreamTag::Trial);
        TrajectoryOptions opt;
        opt.n                    = last;
        opt.geometricCheckpoints = false;
        opt.checkpoints          = horizons;
        opt.recordTags           = true;
        const auto rec           = run_trajectory(sched, opt, stream);
        Trial      t;
        for (std::size_t m = 0; m < cfg.levels.size(); ++m) {
            t.values.push_back(rec.at(horizons[m]).logNorm / static_cast<double>(horizons[m]));
            t.swapped.push_back((rec.tags[static_cast<std::size_t>(cfg.levels[m] - 1)] & kTagSwapped) != 0);
        }
        return t;
    });

    const double log100 = std::log(100.0);
    for (std::size_t m = 0; m < cfg.levels.size(); ++m) {
        AppendixLevel lv;
        lv.n      = cfg.levels[m];
        lv.nPrime = horizons[m];
        double sumId = 0.0, sumSwap = 0.0;
        for (const auto& t : trials) {
            lv.values.push_back(t.values[m]);
            lv.swapped.push_back(t.swapped[m] != 0);
            if (t.swapped[m]) {
                sumSwap += t.values[m];
                ++lv.countSwap;
            } else {
                sumId += t.values[m];
                ++lv.countId;
            }
        }
        lv.meanId     = lv.countId ? sumId / static_cast<double>(lv.countId) : 0.0;
        lv.meanSwap   = lv.countSwap ? sumSwap / static_cast<double>(lv.countSwap) : 0.0;
        lv.split      = two_means(lv.values);
        lv.separation = lv.split.high - lv.split.low;
        std::size_t agree = 0;
        for (std::size_t i = 0; i < lv.values.size(); ++i)
            if ((lv.values[i] > lv.split.threshold) == !lv.swapped[i]) ++agree;
        lv.agreement = static_cast<double>(agree) / static_cast<double>(lv.values.size());
        const double nPrime = static_cast<double>(lv.nPrime), n = static_cast<double>(lv.n);
        // Q = M: the norm picks the better of the two block itineraries.
        const double stretch = nPrime / n - 1.0;
        lv.etaId   = rep.lambda + log100;
        lv.etaSwap = rep.lambda + std::abs(1.0 - stretch) / (1.0 + stretch) * log100;
        rep.levels.push_back(std::move(lv));
    }
    return rep;
}

}  // namespace furst
