#include "furst/product.hpp"

#include "furst/errors.hpp"
#include "furst/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace furst {

namespace {

/// Neumaier-compensated running sum; long products add thousands of logs.
struct CompensatedSum {
    double hi = 0.0;
    double lo = 0.0;
    void add(double x) {
        const double t = hi + x;
        lo += std::abs(hi) >= std::abs(x) ? (hi - t) + x : (x - t) + hi;
        hi = t;
    }
    double value() const { return hi + lo; }
};

/// Running product T = U diag(exp(l)) W, multiplied on the left.
///
/// U is orthogonal, W has unit rows and the log-grades l carry the scale, so
/// directions that are exp(-1000) times weaker than the top one are still
/// represented exactly (a single unit-norm frame would flush them to zero and
/// lose them if a later step swaps them back to the top). Each step is a
/// column-pivoted QR of A U; log||T|| is folded out separately.
struct Accumulator {
    Matrix u;
    Matrix w;
    std::array<double, kMaxDim> grade{};
    std::array<CompensatedSum, kMaxDim> gradeSum{};  // grade[k] = gradeSum[k].value()
    double logScale = 0.0;  // log ||T||

    explicit Accumulator(int d) : u(Matrix::identity(d)), w(Matrix::identity(d)) {}

    int dim() const { return u.dim(); }

    /// exp(-logScale) T without the orthogonal factor: rows of W scaled by exp(l - logScale).
    Matrix scaled_core() const {
        const int d = dim();
        Matrix    s(d);
        for (int r = 0; r < d; ++r) {
            const double f = std::exp(grade[static_cast<std::size_t>(r)] - logScale);
            for (int c = 0; c < d; ++c) s(r, c) = f * w(r, c);
        }
        return s;
    }
    /// Unit-norm representative of T.
    Matrix frame() const { return u * scaled_core(); }

    /// Returns the change in log-norm.
    double push(const Matrix& a) {
        const int d = dim();
        Matrix    b = a * u;
        // Pivot columns by their graded size log|b_j| + l_j.
        std::array<int, kMaxDim>    perm{};
        std::array<double, kMaxDim> size{};
        for (int j = 0; j < d; ++j) {
            perm[static_cast<std::size_t>(j)] = j;
            size[static_cast<std::size_t>(j)] = std::log(b.column(j).norm()) + grade[static_cast<std::size_t>(j)];
        }
        std::stable_sort(perm.begin(), perm.begin() + d, [&](int x, int y) {
            return size[static_cast<std::size_t>(x)] > size[static_cast<std::size_t>(y)];
        });
        // Modified Gram-Schmidt with one re-orthogonalization pass.
        Matrix q(d), r(d);
        for (int k = 0; k < d; ++k) {
            Vector v = b.column(perm[static_cast<std::size_t>(k)]);
            for (int pass = 0; pass < 2; ++pass) {
                for (int i = 0; i < k; ++i) {
                    const Vector qi = q.column(i);
                    const double c  = qi.dot(v);
                    r(i, k) += c;
                    v -= c * qi;
                }
            }
            const double n = v.norm();
            if (!(n > 0.0)) throw DegenerateFrameError("product accumulator: singular step");
            r(k, k) = n;
            q.set_column(k, (1.0 / n) * v);
        }
        // R diag(exp(l_P)) = diag(r_kk exp(l_P,k)) X, X unit upper triangular.
        std::array<double, kMaxDim>         lp{};
        std::array<CompensatedSum, kMaxDim> next{};
        for (int k = 0; k < d; ++k) {
            const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(k)]);
            lp[static_cast<std::size_t>(k)]   = grade[src];
            next[static_cast<std::size_t>(k)] = gradeSum[src];
        }
        Matrix x(d);
        for (int k = 0; k < d; ++k) {
            const auto kk = static_cast<std::size_t>(k);
            x(k, k)       = 1.0;
            for (int j = k + 1; j < d; ++j)
                x(k, j) = r(k, j) / r(k, k) * std::exp(lp[static_cast<std::size_t>(j)] - lp[kk]);
            next[kk].add(std::log(r(k, k)));
        }
        // W' = X P^T W, then unit rows.
        Matrix pw(d);
        for (int k = 0; k < d; ++k)
            for (int c = 0; c < d; ++c) pw(k, c) = w(perm[static_cast<std::size_t>(k)], c);
        w = x * pw;
        for (int k = 0; k < d; ++k) {
            const double n = w.row(k).norm();
            for (int c = 0; c < d; ++c) w(k, c) /= n;
            next[static_cast<std::size_t>(k)].add(std::log(n));
        }
        u        = q;
        gradeSum = next;
        for (int k = 0; k < d; ++k) grade[static_cast<std::size_t>(k)] = next[static_cast<std::size_t>(k)].value();

        const double top = *std::max_element(grade.begin(), grade.begin() + d);
        const double old = logScale;
        logScale         = top;
        logScale         = top + std::log(operator_norm(scaled_core()));
        return logScale - old;
    }
    void reset() {
        u        = Matrix::identity(dim());
        w        = Matrix::identity(dim());
        grade    = {};
        gradeSum = {};
        logScale = 0.0;
    }
};

}  // namespace

const Checkpoint& TrajectoryRecord::at(long k) const {
    const auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), k,
                                     [](const Checkpoint& c, long key) { return c.k < key; });
    if (it == checkpoints.end() || it->k != k) throw RangeError("no checkpoint at k = " + std::to_string(k));
    return *it;
}

std::vector<long> checkpoint_schedule(long n, const std::vector<long>& extra, bool geometric) {
    std::vector<long> out;
    if (geometric) {
        for (long k = n; k >= 1; k /= 2) out.push_back(k);
    }
    for (long k : extra) {
        if (k < 1 || k > n) throw RangeError("checkpoint " + std::to_string(k) + " outside [1, n]");
        out.push_back(k);
    }
    out.push_back(n);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

TrajectoryRecord run_trajectory(const Schedule& s, const TrajectoryOptions& opt, Stream& stream) {
    const long n = opt.n;
    const int  d = s.dim();
    if (n < 1) throw InvalidInputError("run_trajectory: n must be >= 1");
    if (n > s.length()) throw RangeError("run_trajectory: n exceeds the schedule length");
    const int bs = opt.blockSize;
    if (bs < 0 || (bs > 0 && n % bs != 0)) {
        throw InvalidInputError("run_trajectory: block size " + std::to_string(bs) + " must divide n = " +
                                std::to_string(n));
    }
    const int split = opt.splitPrefix;
    if (split < 0 || (split > 0 && split >= bs)) {
        throw InvalidInputError("run_trajectory: split prefix must satisfy 0 < k' < block size");
    }

    Vector v = opt.v0.dim() == 0 ? Vector::basis(d, 0) : opt.v0.rep();
    if (v.dim() != d) throw InvalidInputError("run_trajectory: v0 dimension mismatch");

    const std::vector<long> cps = checkpoint_schedule(n, opt.checkpoints, opt.geometricCheckpoints);

    TrajectoryRecord rec;
    rec.n         = n;
    rec.blockSize = bs;
    rec.splitPrefix = split;
    rec.checkpoints.reserve(cps.size());
    if (bs > 0) rec.blocks.reserve(static_cast<std::size_t>(n / bs));
    if (opt.recordSteps) {
        rec.stepLogNorm.reserve(static_cast<std::size_t>(n));
        rec.stepLogA.reserve(static_cast<std::size_t>(n));
    }
    if (opt.recordTags) rec.tags.reserve(static_cast<std::size_t>(n));

    Accumulator total(d);
    Accumulator block(d);
    Accumulator outer(d);
    CompensatedSum logVecSum;
    double         logVec = 0.0;
    // Block bookkeeping.
    double    vecAtBlockStart = 0.0;
    double    vecAtSplit      = 0.0;
    double    innerLogNorm    = 0.0;
    Vector    atSplit         = v;
    std::size_t nextCp        = 0;

    for (long k = 1; k <= n; ++k) {
        const Draw draw = s.at(k).draw(stream);
        const Matrix& a = draw.matrix;
        if (!a.finite()) throw InvalidInputError("run_trajectory: non-finite draw at step " + std::to_string(k));

        const double stepLog = std::log(operator_norm(a));
        rec.maxStepLogNorm   = std::max(rec.maxStepLogNorm, stepLog);
        rec.maxIncrement     = std::max(rec.maxIncrement, std::abs(total.push(a)));

        const Vector w  = a * v;
        const double lw = w.norm();
        logVecSum.add(std::log(lw));
        logVec = logVecSum.value();
        v = (1.0 / lw) * w;

        if (bs > 0) {
            const long t = (k - 1) % bs + 1;
            block.push(a);
            if (split > 0 && t > split) outer.push(a);
            if (split > 0 && t == split) {
                innerLogNorm = block.logScale;
                vecAtSplit   = logVec;
                atSplit      = v;
            }
            if (t == bs) {
                BlockStat b;
                b.xi = block.logScale;
                b.r  = b.xi - (logVec - vecAtBlockStart);
                if (split > 0) {
                    b.thetaInner = innerLogNorm - (vecAtSplit - vecAtBlockStart);
                    b.thetaOuter = outer.logScale - (logVec - vecAtSplit);
                    const SingularData sd = svd(outer.frame());
                    b.hyperplaneSine      = std::abs(atSplit.dot(sd.right.column(0)));
                }
                rec.blocks.push_back(b);
                block.reset();
                outer.reset();
                vecAtBlockStart = logVec;
            }
        }

        if (opt.recordSteps) {
            rec.stepLogNorm.push_back(total.logScale);
            rec.stepLogA.push_back(stepLog);
        }
        if (opt.recordTags) rec.tags.push_back(draw.tag);
        if (nextCp < cps.size() && cps[nextCp] == k) {
            rec.checkpoints.push_back({k, total.logScale, logVec});
            if (opt.recordFrames) rec.frames.push_back({total.frame(), total.logScale});
            ++nextCp;
        }
    }
    rec.final  = {total.frame(), total.logScale};
    rec.logVec = logVec;
    return rec;
}

double direct_log_norm(const Schedule& s, long n, Stream& stream) {
    Matrix t = Matrix::identity(s.dim());
    for (long k = 1; k <= n; ++k) t = s.at(k).draw(stream).matrix * t;
    return std::log(operator_norm(t));
}

LnEstimate summarize(long n, const std::vector<double>& samples) {
    LnEstimate e;
    e.n      = n;
    e.trials = samples.size();
    if (samples.empty()) return e;
    // Shifted by the first sample: constant samples give their value and zero spread exactly.
    const double count = static_cast<double>(samples.size());
    const double shift = samples.front();
    double       dev   = 0.0;
    for (double x : samples) dev += x - shift;
    e.mean = shift + dev / count;
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double x : samples) ss += (x - e.mean) * (x - e.mean);
        e.stdError = std::sqrt(ss / (count - 1.0)) / std::sqrt(count);
    }
    return e;
}

namespace {

struct Endpoint {
    double logNorm = 0.0;
    double logVec  = 0.0;
};

std::vector<Endpoint> sample_endpoints(const Schedule& s, long n, std::size_t trials, std::uint64_t seed,
                                       int workers, StreamTag tag) {
    return parallel_map(trials, workers, [&](std::size_t i) {
        Stream            stream(seed, i, tag);
        TrajectoryOptions opt;
        opt.n                    = n;
        opt.geometricCheckpoints = false;
        const auto rec           = run_trajectory(s, opt, stream);
        return Endpoint{rec.final.logScale, rec.logVec};
    });
}

}  // namespace

std::vector<double> sample_log_norms(const Schedule& s, long n, std::size_t trials, std::uint64_t seed,
                                     int workers, StreamTag tag) {
    const auto          ends = sample_endpoints(s, n, trials, seed, workers, tag);
    std::vector<double> out;
    out.reserve(ends.size());
    for (const auto& e : ends) out.push_back(e.logNorm);
    return out;
}

LnEstimate estimate_Ln(const Schedule& s, long n, std::size_t trials, std::uint64_t seed, int workers) {
    if (trials < 2) throw InvalidInputError("estimate_Ln: at least 2 trials required");
    return summarize(n, sample_log_norms(s, n, trials, seed, workers));
}

std::vector<LnEstimate> estimate_Ln_series(const Schedule& s, long n, std::size_t trials, std::uint64_t seed,
                                           int workers) {
    if (trials < 2) throw InvalidInputError("estimate_Ln_series: at least 2 trials required");
    const auto series = parallel_map(trials, workers, [&](std::size_t i) {
        Stream            stream(seed, i, StreamTag::Trial);
        TrajectoryOptions opt;
        opt.n                    = n;
        opt.geometricCheckpoints = false;
        opt.recordSteps          = true;
        return run_trajectory(s, opt, stream).stepLogNorm;
    });
    std::vector<LnEstimate> out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<double> column(trials);
    for (long k = 1; k <= n; ++k) {
        for (std::size_t i = 0; i < trials; ++i) column[i] = series[i][static_cast<std::size_t>(k - 1)];
        out.push_back(summarize(k, column));
    }
    return out;
}

LongRunEstimate long_run_rate(const Schedule& s, long n, std::size_t batches, std::uint64_t seed) {
    if (batches < 2 || n % static_cast<long>(batches) != 0) {
        throw InvalidInputError("long_run_rate: batches must be >= 2 and divide n");
    }
    const long        len = n / static_cast<long>(batches);
    TrajectoryOptions opt;
    opt.n                    = n;
    opt.geometricCheckpoints = false;
    for (long k = len; k < n; k += len) opt.checkpoints.push_back(k);
    Stream     stream(seed, 0, StreamTag::LongRun);
    const auto rec = run_trajectory(s, opt, stream);

    std::vector<double> rates;
    double              prev = 0.0;
    for (const auto& cp : rec.checkpoints) {
        rates.push_back((cp.logNorm - prev) / static_cast<double>(len));
        prev = cp.logNorm;
    }
    const LnEstimate batch = summarize(len, rates);
    return {rec.final.logScale / static_cast<double>(n), batch.stdError, batches};
}

TailEstimate ld_tail(const Schedule& s, long n, double epsilon, std::size_t trials, std::uint64_t seed,
                     TailMode mode, int workers) {
    if (!(epsilon > 0.0)) throw InvalidInputError("ld_tail: epsilon must be > 0");
    if (trials < 2) throw InvalidInputError("ld_tail: at least 2 trials required");
    const auto reference = sample_log_norms(s, n, trials, seed, workers, StreamTag::Reference);
    const double ln      = summarize(n, reference).mean;
    const auto   ends    = sample_endpoints(s, n, trials, seed, workers, StreamTag::Trial);

    const double threshold = epsilon * static_cast<double>(n);
    std::size_t  hits      = 0;
    for (const auto& e : ends) {
        const double x = mode == TailMode::Norm ? e.logNorm : e.logVec;
        if (std::abs(x - ln) > threshold) ++hits;
    }
    return {n, epsilon, static_cast<double>(hits) / static_cast<double>(trials), ln, trials};
}

BlockReport block_diagnostics(const TrajectoryRecord& rec) {
    if (rec.blockSize <= 0) throw InvalidInputError("block_diagnostics: blocks were not recorded");
    BlockReport rep;
    rep.logNorm = rec.final.logScale;
    rep.logVec  = rec.logVec;
    rep.minR    = rec.blocks.empty() ? 0.0 : rec.blocks.front().r;
    const bool split = rec.splitPrefix > 0;
    if (split) {
        rep.worstSubadditivity   = -std::numeric_limits<double>::infinity();
        rep.worstHyperplaneBound = -std::numeric_limits<double>::infinity();
    }
    for (const auto& b : rec.blocks) {
        rep.sumXi += b.xi;
        rep.sumR += b.r;
        rep.minR = std::min(rep.minR, b.r);
        if (!split) continue;
        rep.worstSubadditivity = std::max(rep.worstSubadditivity, b.r - b.thetaOuter - b.thetaInner);
        rep.worstHyperplaneBound =
            std::max(rep.worstHyperplaneBound, b.thetaOuter + std::log(std::max(b.hyperplaneSine, 1e-300)));
    }
    rep.meanR = rep.sumR / static_cast<double>(rec.n);

    const double tol = 1e-6 * static_cast<double>(rec.n);
    auto fail = [&](const std::string& what) {
        std::ostringstream os;
        os.precision(17);
        os << "block_diagnostics: " << what << " (sum xi = " << rep.sumXi << ", log||T_n|| = " << rep.logNorm
           << ", log|T_n v0| = " << rep.logVec << ", sum R = " << rep.sumR << ")";
        throw InternalConsistencyError(os.str());
    };
    if (rep.sumXi < rep.logNorm - tol) fail("sum of block log-norms below log||T_n||");
    if (rep.logNorm < rep.logVec - tol) fail("log|T_n v0| exceeds log||T_n||");
    if (std::abs((rep.sumXi - rep.sumR) - rep.logVec) > tol) fail("sum xi - sum R differs from log|T_n v0|");
    if (rep.minR < -1e-9) fail("negative R_j");
    return rep;
}

}  // namespace furst
