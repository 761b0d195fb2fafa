#include "furst/contract.hpp"

#include "furst/errors.hpp"
#include "furst/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace furst {

namespace {
void require_plane(int d, const char* what) {
    if (d != 2) throw InvalidInputError(std::string(what) + ": only defined for d = 2");
}
}  // namespace

double log_image_length(const ScaledMatrix& product, const Vector& u) {
    require_plane(product.frame.dim(), "log_image_length");
    const SingularData sd  = svd(product.frame);
    const double       s1  = sd.sigma[0];
    // det T = 1 fixes the small singular value of the frame: s1 * s2 = exp(-2 logScale).
    const double logS2 = -2.0 * product.logScale - std::log(s1);
    const double c1    = std::abs(sd.right.column(0).dot(u)) * s1;
    const double c2    = std::abs(sd.right.column(1).dot(u));
    const double a     = c1 > 0.0 ? std::log(c1) : -std::numeric_limits<double>::infinity();
    const double b     = c2 > 0.0 ? logS2 + std::log(c2) : -std::numeric_limits<double>::infinity();
    const double hi    = std::max(a, b);
    const double lo    = std::min(a, b);
    const double lse   = hi + 0.5 * std::log1p(std::exp(2.0 * (lo - hi)));
    return product.logScale + lse - 0.5 * std::log(u.dot(u));
}

ContractedDirection contracted_direction(const ScaledMatrix& product) {
    require_plane(product.frame.dim(), "contracted_direction");
    ContractedDirection out;
    const SingularData  sd = svd(product.frame);
    out.top                = ProjectivePoint(sd.right.column(0));
    out.vBar               = ProjectivePoint(sd.right.column(1));
    if (product.logScale < 5e-10) {
        out.status = DirectionStatus::Degenerate;
        out.logVec = 0.0;
        return out;
    }
    // At the exact bottom direction |T vBar| = sigma_2 = exp(-log||T||) because det T = 1.
    // Evaluating the computed vector instead would measure its 1e-16 leakage onto the top
    // direction, amplified by ||T||.
    out.logVec = -product.logScale;
    return out;
}

std::vector<double> f_schedule(const std::vector<double>& lhat, double lambda) {
    if (lhat.empty()) throw RangeError("f_schedule: empty series");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidInputError("f_schedule: lambda must be positive");
    std::vector<double> f(lhat.size());
    f.back() = lhat.back();
    for (std::size_t i = lhat.size() - 1; i-- > 0;) f[i] = std::min(lhat[i], f[i + 1] - lambda / 2.0);
    return f;
}

LsReport ls_hypotheses_check(const TrajectoryRecord& rec, const std::vector<double>& f, const LsThresholds& th) {
    LsReport rep;
    const std::size_t n = static_cast<std::size_t>(rec.n);
    if (rec.stepLogNorm.size() != n || rec.stepLogA.size() != n)
        throw InvalidInputError("ls_hypotheses_check: trajectory must record per-step norms");
    if (f.size() != n) throw InvalidInputError("ls_hypotheses_check: f must cover 1..n");
    if (f.empty() || !(f.back() > 1e-12)) {
        rep.status = LsStatus::NotApplicable;
        return rep;
    }
    double      sumNorms = 0.0, sumExp = 0.0;
    std::size_t next     = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double prevLog = k == 1 ? 0.0 : rec.stepLogNorm[k - 2];
        sumNorms += std::exp(2.0 * (rec.stepLogA[k - 1] - prevLog));
        sumExp += std::exp(-th.epsilon * f[k - 1]);
        while (next < rec.checkpoints.size() && rec.checkpoints[next].k < static_cast<long>(k)) ++next;
        if (next < rec.checkpoints.size() && rec.checkpoints[next].k == static_cast<long>(k)) {
            LsCheckpoint c;
            c.k        = static_cast<long>(k);
            c.sumNorms = sumNorms;
            c.sumExp   = sumExp;
            c.ratio    = f[k - 1] != 0.0 ? rec.stepLogNorm[k - 1] / f[k - 1]
                                         : std::numeric_limits<double>::quiet_NaN();
            rep.checkpoints.push_back(c);
        }
    }
    const LsCheckpoint& last = rep.checkpoints.back();
    rep.normsBounded = last.sumNorms < th.normThreshold;
    rep.expBounded   = last.sumExp < th.expThreshold;
    rep.ratioNearOne = std::abs(last.ratio - 1.0) <= th.ratioBand;
    return rep;
}

ContractionStats verify_contraction(const Schedule& s, long n, std::size_t trials, std::uint64_t seed, int workers) {
    require_plane(s.dim(), "verify_contraction");
    if (n < 2) throw InvalidInputError("verify_contraction: n must be >= 2");
    if (trials < 2) throw InvalidInputError("verify_contraction: need at least two trials");

    ContractionStats st;
    st.n = n;
    const auto reference = sample_log_norms(s, n, trials, seed, workers, StreamTag::Reference);
    st.lhat              = summarize(n, reference).mean;

    struct Out {
        ContractionRow row;
        double         stabilization = 0.0;
    };
    const auto outs = parallel_map(trials, workers, [&](std::size_t i) {
        Stream            stream(seed, i, StreamTag::Trial);
        TrajectoryOptions opt;
        opt.n                    = n;
        opt.geometricCheckpoints = false;
        opt.checkpoints          = {n / 2};
        opt.recordFrames         = true;
        const auto rec           = run_trajectory(s, opt, stream);
        const auto dir           = contracted_direction(rec.final);
        Out        o;
        o.row.trial      = i;
        o.row.n          = n;
        o.row.lhat       = st.lhat;
        o.row.degenerate = dir.status == DirectionStatus::Degenerate;
        o.row.logVecBar  = dir.logVec;
        o.row.defect     = (dir.logVec + st.lhat) / static_cast<double>(n);
        const auto half  = contracted_direction(rec.frames.front());
        o.stabilization  = point_distance(half.vBar, dir.vBar);
        return o;
    });

    double sum = 0.0, sumAbs = 0.0, stab = 0.0;
    std::size_t used = 0;
    for (const auto& o : outs) {
        st.rows.push_back(o.row);
        if (o.row.degenerate) {
            ++st.degenerate;
            continue;
        }
        ++used;
        sum += o.row.defect;
        sumAbs += std::abs(o.row.defect);
        stab += o.stabilization;
        st.maxAbsDefect = std::max(st.maxAbsDefect, std::abs(o.row.defect));
    }
    if (used > 0) {
        st.meanDefect        = sum / static_cast<double>(used);
        st.meanAbsDefect     = sumAbs / static_cast<double>(used);
        st.meanStabilization = stab / static_cast<double>(used);
    }
    st.unsuitable = static_cast<double>(st.degenerate) > 0.01 * static_cast<double>(trials);
    return st;
}

}  // namespace furst
