#include "furst/experiments.hpp"

#include "furst/appendix.hpp"
#include "furst/contract.hpp"
#include "furst/dissolve.hpp"
#include "furst/entropy.hpp"
#include "furst/errors.hpp"
#include "furst/parallel.hpp"
#include "furst/product.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace furst {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k{"simulate", "ld-tail",  "dissolve", "entropy",
                                            "contract", "appendix", "lemma-lm", "subspace-hit"};
    return k;
}

std::string default_out_dir() {
    const char* env = std::getenv("FURSTLAB_OUT_DIR");
    return env && *env ? std::string(env) : std::string("furstlab_out");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const BudgetError*>(&e)) return 3;
    if (dynamic_cast<const InternalConsistencyError*>(&e)) return 4;
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const InvalidInputError*>(&e) ||
        dynamic_cast<const RangeError*>(&e) || dynamic_cast<const UnsupportedOperationError*>(&e) ||
        dynamic_cast<const CapacityError*>(&e))
        return 2;
    return 1;
}

// ---------------------------------------------------------------- CSV

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::string& path, std::initializer_list<const char*> header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()), path_(path) {
    if (!out_) throw ValidationError(path + ": cannot open for writing");
    bool first = true;
    for (const char* h : header) {
        out_ << (first ? "" : ",") << h;
        first = false;
    }
    out_ << '\n';
}

void CsvWriter::row(std::initializer_list<Cell> cells) {
    if (cells.size() != columns_) throw InternalConsistencyError(path_ + ": row width mismatch");
    bool first = true;
    for (const Cell& c : cells) {
        out_ << (first ? "" : ",");
        first = false;
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, double>) out_ << format_double(v);
                else out_ << v;
            },
            c);
    }
    out_ << '\n';
}

// ---------------------------------------------------------------- random instances

MatrixEnsemble random_finite_ensemble(int atoms, Stream& s) {
    std::vector<WeightedMatrix> wm;
    double                      total = 0.0;
    for (int i = 0; i < atoms; ++i) {
        const double sigma = 1.0 + 2.0 * s.uniform();
        const double d[]   = {sigma, 1.0 / sigma};
        const Matrix m     = Matrix::rotation2(s.uniform(0.0, 2.0 * M_PI)) * Matrix::diagonal(d) *
                         Matrix::rotation2(s.uniform(0.0, 2.0 * M_PI));
        const double w = 0.2 + s.uniform();
        wm.push_back({w, m});
        total += w;
    }
    for (auto& a : wm) a.weight /= total;
    return MatrixEnsemble::finite(std::move(wm));
}

namespace {
Vector random_unit(int d, Stream& s) {
    for (;;) {
        Vector v(d);
        for (int i = 0; i < d; ++i) v[i] = s.normal();
        if (v.norm() > 1e-3) return v.normalized();
    }
}

std::vector<Atom<ProjectivePoint>> normalized(std::vector<Atom<ProjectivePoint>> atoms) {
    double total = 0.0;
    for (const auto& a : atoms) total += a.weight;
    for (auto& a : atoms) a.weight /= total;
    return atoms;
}
}  // namespace

ProjectiveMeasure random_measure(int atoms, int d, Stream& s) {
    std::vector<Atom<ProjectivePoint>> raw;
    for (int i = 0; i < atoms; ++i) raw.push_back({ProjectivePoint(random_unit(d, s)), 0.2 + s.uniform()});
    return ProjectiveMeasure::from_atoms(normalized(std::move(raw)));
}

ProjectiveMeasure random_heavy_line_measure(Stream& s) {
    std::vector<Atom<ProjectivePoint>> raw;
    const int lines = static_cast<int>(s.below(4));
    double    used  = 0.0;
    for (int l = 0; l < lines; ++l) {
        const Vector a = random_unit(3, s), b = random_unit(3, s);
        const int    k = 3 + static_cast<int>(s.below(3));
        const double mass = 0.26 + 0.04 * s.uniform();
        for (int i = 0; i < k; ++i) {
            const double t = s.uniform(0.0, M_PI);
            raw.push_back({ProjectivePoint(std::cos(t) * a + std::sin(t) * b), mass / k});
        }
        used += mass;
    }
    const double rest = 1.0 - used;
    const int    generic = static_cast<int>(std::ceil(rest / 0.1)) + 1;
    for (int i = 0; i < generic; ++i) raw.push_back({ProjectivePoint(random_unit(3, s)), rest / generic});
    return ProjectiveMeasure::from_atoms(normalized(std::move(raw)));
}

// ---------------------------------------------------------------- dispatch helpers

namespace {

struct Context {
    explicit Context(const RunConfig& config) : cfg(config) {}
    const RunConfig& cfg;
    std::uint64_t    seed    = 1;
    int              workers = 1;
    double           budget  = kDefaultBudget;
    fs::path         dir;
    RunResult        result;

    std::string file(const std::string& name) {
        result.files.push_back(name);
        return (dir / name).string();
    }
    void charge(double ops) {
        result.estimatedOps = ops;
        if (ops > budget) {
            std::ostringstream os;
            os << "estimated cost " << ops << " ops exceeds the budget " << budget << " (raise --budget)";
            throw BudgetError(os.str());
        }
    }
    const Schedule& schedule() const {
        if (!cfg.schedule) throw ValidationError("schedule: missing required section");
        return *cfg.schedule;
    }
};

std::string section_key(const std::string& kind) {
    std::string k = kind;
    std::replace(k.begin(), k.end(), '-', '_');
    if (k == "estimate_Ln" || k == "estimate_ln") return "simulate";
    return k;
}

double cube(int d) { return static_cast<double>(d) * d * d; }

long positive(const Section& s, const std::string& key, long fallback) {
    const long v = s.integer(key, fallback);
    if (v < 1) throw ValidationError(s.child_path(key) + ": must be >= 1");
    return v;
}

ProjectivePoint parse_point(const Section& s, const std::string& key, int d, double defaultAngle) {
    if (s.has(key)) {
        const auto v = s.numbers(key);
        if (static_cast<int>(v.size()) != d)
            throw ValidationError(s.child_path(key) + ": expected " + std::to_string(d) + " coordinates");
        Vector x(d);
        for (int i = 0; i < d; ++i) x[i] = v[static_cast<std::size_t>(i)];
        if (!(x.norm() > 0.0)) throw ValidationError(s.child_path(key) + ": zero vector");
        return ProjectivePoint(x);
    }
    const double angle = s.number(key + "_angle", defaultAngle);
    if (d == 2) return ProjectivePoint::from_angle(angle);
    Vector x(d);
    x[0] = std::cos(angle);
    x[1] = std::sin(angle);
    return ProjectivePoint(x);
}

// ---------------------------------------------------------------- experiments

void run_simulate(Context& c, const Section& p) {
    const Schedule& s       = c.schedule();
    const auto      ns      = p.integers("n", {1000});
    const long      trials  = positive(p, "trials", 200);
    const long      dump    = p.integer("dump_trials", 2);
    const long      block   = p.integer("block_size", 0);
    double          ops     = 0.0;
    for (long n : ns) ops += static_cast<double>(n) * static_cast<double>(trials) * cube(s.dim()) * 4.0;
    c.charge(ops);
    if (trials < 2) throw ValidationError(p.child_path("trials") + ": need at least 2");

    CsvWriter est(c.file("estimate.csv"), {"n", "mean", "stderr", "trials"});
    for (long n : ns) {
        if (n < 1) throw ValidationError(p.child_path("n") + ": entries must be >= 1");
        const LnEstimate e = estimate_Ln(s, n, static_cast<std::size_t>(trials), c.seed, c.workers);
        est.row({n, e.mean, e.stdError, e.trials});
    }

    const long nmax = *std::max_element(ns.begin(), ns.end());
    CsvWriter  traj(c.file("trajectory.csv"), {"trial", "k", "log_norm", "log_vec"});
    for (long t = 0; t < std::min(dump, trials); ++t) {
        Stream            stream(c.seed, static_cast<std::uint64_t>(t), StreamTag::Trial);
        TrajectoryOptions opt;
        opt.n          = nmax;
        const auto rec = run_trajectory(s, opt, stream);
        for (const auto& cp : rec.checkpoints) traj.row({t, cp.k, cp.logNorm, cp.logVec});
    }

    if (block > 0) {
        if (nmax % block != 0) throw ValidationError(p.child_path("block_size") + ": must divide max n");
        const auto reports = parallel_map(static_cast<std::size_t>(trials), c.workers, [&](std::size_t t) {
            Stream            stream(c.seed, t, StreamTag::Trial);
            TrajectoryOptions opt;
            opt.n                    = nmax;
            opt.blockSize            = static_cast<int>(block);
            opt.splitPrefix          = static_cast<int>(p.integer("split_prefix", 0));
            opt.geometricCheckpoints = false;
            return block_diagnostics(run_trajectory(s, opt, stream));
        });
        CsvWriter b(c.file("blocks.csv"),
                    {"trial", "sum_xi", "sum_r", "log_norm", "log_vec", "mean_r", "min_r", "worst_subadditivity"});
        for (std::size_t t = 0; t < reports.size(); ++t) {
            const auto& r = reports[t];
            b.row({t, r.sumXi, r.sumR, r.logNorm, r.logVec, r.meanR, r.minR, r.worstSubadditivity});
        }
    }
}

void run_ld_tail(Context& c, const Section& p) {
    const Schedule& s      = c.schedule();
    const auto      ns     = p.integers("n", {50, 100, 200});
    const long      trials = positive(p, "trials", 10000);
    double          ops    = 0.0;
    for (long n : ns) ops += 4.0 * static_cast<double>(n) * static_cast<double>(trials) * cube(s.dim()) * 4.0;
    c.charge(ops);

    double epsilon = 0.0;
    if (p.has("epsilon")) {
        epsilon = p.number("epsilon");
    } else {
        // eps = factor * lambda_hat, lambda_hat from its own seed domain at the longest n.
        const double factor = p.number("epsilon_factor", 0.2);
        const long   nmax   = *std::max_element(ns.begin(), ns.end());
        const auto   e      = estimate_Ln(s, nmax, static_cast<std::size_t>(std::min<long>(trials, 1000)),
                                          child_seed(c.seed, 11), c.workers);
        epsilon             = factor * e.mean / static_cast<double>(nmax);
    }
    if (!(epsilon > 0.0))
        throw ValidationError(p.path() + ": epsilon must be positive (give \"epsilon\" explicitly when L_n ~ 0)");

    std::vector<std::string> modes = p.has("modes") ? p.strings("modes") : std::vector<std::string>{"norm", "vector"};
    CsvWriter out(c.file("tail.csv"), {"n", "epsilon", "mode", "frequency", "reference", "trials"});
    for (const auto& m : modes) {
        if (m != "norm" && m != "vector") throw ValidationError(p.child_path("modes") + ": unknown mode '" + m + "'");
        for (long n : ns) {
            const auto t = ld_tail(s, n, epsilon, static_cast<std::size_t>(trials), c.seed,
                                   m == "norm" ? TailMode::Norm : TailMode::Vector, c.workers);
            out.row({n, epsilon, m, t.frequency, t.reference, t.trials});
        }
    }
}

void write_dissolve(Context& c, const DissolveReport& rep) {
    CsvWriter out(c.file("dissolve.csv"), {"step", "max_atom", "energy", "variance_D", "atom_count", "diffuse"});
    for (const auto& r : rep.rows) out.row({r.step, r.maxAtom, r.energy, r.variance, r.atomCount, r.diffuse});
    CsvWriter fit(c.file("dissolve_fit.csv"),
                  {"max_rate", "energy_rate", "max_envelope", "max_identity_gap", "pruned_mass"});
    double gap = 0.0, pruned = 0.0;
    for (const auto& r : rep.rows) {
        gap = std::max(gap, r.identityGap);
        pruned += r.prunedMass;
    }
    fit.row({rep.maxRate, rep.energyRate, rep.maxEnvelope, gap, pruned});
}

void run_dissolve(Context& c, const Section& p) {
    const Schedule& s     = c.schedule();
    const long      steps = p.integer("steps", 20);
    DissolveOptions opt;
    opt.pruneTol = p.number("prune_tol", kPruneTol);
    opt.mergeTol = p.number("merge_tol", kMergeTol);
    opt.capacity = static_cast<std::size_t>(positive(p, "capacity", 1'000'000));
    if (!(opt.pruneTol >= 0.0)) throw ValidationError(p.child_path("prune_tol") + ": must be >= 0");
    if (!(opt.mergeTol > 0.0)) throw ValidationError(p.child_path("merge_tol") + ": must be > 0");
    if (steps < 0) throw ValidationError(p.child_path("steps") + ": must be >= 0");
    c.charge(static_cast<double>(steps) * static_cast<double>(opt.capacity) * 50.0);

    if (p.has("grassmann")) {
        const Section       g = p.section("grassmann");
        const json&         v = g.node().contains("span") ? g.node()["span"] : json();
        std::vector<Vector> span;
        if (!v.is_array() || v.empty()) throw ValidationError(g.child_path("span") + ": expected a list of vectors");
        for (std::size_t i = 0; i < v.size(); ++i) {
            const json& row = v[i];
            if (!row.is_array() || static_cast<int>(row.size()) != s.dim())
                throw ValidationError(g.child_path("span") + "[" + std::to_string(i) + "]: expected " +
                                      std::to_string(s.dim()) + " coordinates");
            Vector x(s.dim());
            for (int k = 0; k < s.dim(); ++k) x[k] = row[static_cast<std::size_t>(k)].get<double>();
            span.push_back(x);
        }
        write_dissolve(c, grassmann_dissolve(s, Subspace(span), steps, opt));
        return;
    }
    const ProjectivePoint x0 = parse_point(p, "x0", s.dim(), 0.3);
    write_dissolve(c, dissolve_run(s, ProjectiveMeasure::dirac(x0), steps, opt));
}

void run_entropy(Context& c, const Section& p) {
    const long instances = p.integer("instances", 100);
    const int  maps      = static_cast<int>(positive(p, "maps", 3));
    const int  atoms     = static_cast<int>(positive(p, "atoms", 4));
    c.charge(static_cast<double>(instances) * maps * maps * atoms * 1e4);

    CsvWriter dec(c.file("entropy.csv"), {"case", "phi", "h_term", "phi_cond", "residual"});
    CsvWriter add(c.file("additivity.csv"), {"case", "phi_composite", "phi_mu", "phi_mu_prime", "residual"});
    for (long i = 0; i < instances; ++i) {
        Stream                  st(c.seed, static_cast<std::uint64_t>(i), StreamTag::Construction);
        const MatrixEnsemble    mu      = random_finite_ensemble(maps, st);
        const MatrixEnsemble    muPrime = random_finite_ensemble(maps, st);
        const ProjectiveMeasure nu      = random_measure(atoms, 2, st);
        // Target: the atoms of mu * nu with fresh weights (absolutely continuous case).
        const ProjectiveMeasure image = convolve_measure(mu, nu);
        std::vector<Atom<ProjectivePoint>> t;
        for (const auto& a : image.atoms()) t.push_back({a.loc, 0.1 + st.uniform()});
        double total = 0.0;
        for (const auto& a : t) total += a.weight;
        for (auto& a : t) a.weight /= total;
        const ProjectiveMeasure target = ProjectiveMeasure::from_atoms(std::move(t));

        const EntropyReport r = entropy_decomposition(mu, nu, target);
        dec.row({i, r.phi, r.hTerm, r.phiCond, std::abs(r.phiCond - r.phi - r.hTerm)});

        const double composite = furstenberg_entropy(convolve(muPrime, mu), nu).phi;
        const double first     = furstenberg_entropy(mu, nu).phi;
        const double second    = furstenberg_entropy(muPrime, image).phi;
        add.row({i, composite, first, second, std::abs(composite - first - second)});
    }

    if (p.has("minimize")) {
        const Section   m    = p.section("minimize");
        const std::string name = m.string("ensemble");
        const auto      it   = c.cfg.ensembles.find(name);
        if (it == c.cfg.ensembles.end()) throw ValidationError(m.child_path("ensemble") + ": unknown ensemble '" + name + "'");
        if (!it->second.is_finite()) throw ValidationError(m.child_path("ensemble") + ": must be a finite ensemble");
        MinimizeOptions mo;
        mo.supportSize = static_cast<int>(m.integer("support_size", 4));
        mo.restarts    = static_cast<std::size_t>(positive(m, "restarts", 8));
        mo.iterations  = static_cast<int>(positive(m, "iterations", 200));
        mo.seed        = child_seed(c.seed, 5);
        mo.workers     = c.workers;
        const PsiApprox psi = minimize_entropy(it->second, mo);
        CsvWriter       out(c.file("psi.csv"), {"ensemble", "psi_upper_bound", "atoms", "restart"});
        out.row({name, psi.value, psi.nu.size(), psi.restart});
    }
}

void run_contract(Context& c, const Section& p) {
    const Schedule& s      = c.schedule();
    const long      n      = positive(p, "n", 2000);
    const long      trials = positive(p, "trials", 100);
    const bool      dbl    = p.boolean("doubling", true);
    c.charge(static_cast<double>(n) * static_cast<double>(trials) * (dbl ? 6.0 : 2.0) * 40.0);

    CsvWriter out(c.file("contract.csv"), {"trial", "n", "log_vec_bar", "L_hat", "defect"});
    std::vector<long> horizons{n};
    if (dbl) horizons.push_back(2 * n);
    CsvWriter summary(c.file("contract_summary.csv"),
                      {"n", "L_hat", "mean_defect", "mean_abs_defect", "max_abs_defect", "degenerate", "stabilization"});
    for (long h : horizons) {
        const auto st = verify_contraction(s, h, static_cast<std::size_t>(trials), c.seed, c.workers);
        for (const auto& r : st.rows) out.row({r.trial, r.n, r.logVecBar, r.lhat, r.defect});
        summary.row({h, st.lhat, st.meanDefect, st.meanAbsDefect, st.maxAbsDefect, st.degenerate,
                     st.meanStabilization});
    }

    if (p.boolean("ls", false)) {
        const long      lsTrials = positive(p, "ls_trials", 50);
        const auto      series   = estimate_Ln_series(s, n, static_cast<std::size_t>(lsTrials), child_seed(c.seed, 3),
                                                      c.workers);
        std::vector<double> lhat;
        for (const auto& e : series) lhat.push_back(e.mean);
        const double lambda = p.number("lambda", 0.5 * lhat.back() / static_cast<double>(n));
        CsvWriter    ls(c.file("ls.csv"), {"k", "sum_norms", "sum_exp", "ratio", "status"});
        if (!(lambda > 0.0)) {
            ls.row({n, 0.0, 0.0, 0.0, std::string("not-applicable")});
            return;
        }
        const auto        f = f_schedule(lhat, lambda);
        Stream            stream(c.seed, 0, StreamTag::Trial);
        TrajectoryOptions opt;
        opt.n           = n;
        opt.recordSteps = true;
        const auto rec  = run_trajectory(s, opt, stream);
        LsThresholds th;
        th.epsilon      = p.number("ls_epsilon", 0.1);
        const auto rep  = ls_hypotheses_check(rec, f, th);
        const std::string status = rep.status == LsStatus::NotApplicable ? "not-applicable" : "ok";
        for (const auto& cp : rep.checkpoints) ls.row({cp.k, cp.sumNorms, cp.sumExp, cp.ratio, status});
    }
}

void run_appendix(Context& c, const Section& p) {
    AppendixConfig a;
    a.levels = p.integers("levels", {50, 5000});
    const std::string h = p.string("horizon", "double");
    if (h == "double") a.horizon = HorizonRule::Double;
    else if (h == "stretch") a.horizon = HorizonRule::Stretch;
    else throw ValidationError(p.child_path("horizon") + ": expected \"double\" or \"stretch\"");
    a.c            = p.number("c", 1.0);
    a.minRatio     = p.number("min_ratio", 4.0);
    a.trials       = static_cast<std::size_t>(positive(p, "trials", 200));
    a.lambdaSteps  = positive(p, "lambda_steps", 10000);
    a.lambdaTrials = static_cast<std::size_t>(positive(p, "lambda_trials", 200));
    a.validate();
    double last = 0.0;
    for (long n : a.levels) last = std::max(last, static_cast<double>(a.horizon_for(n)));
    c.charge(last * static_cast<double>(a.trials) * 64.0 * 6.0 +
             static_cast<double>(a.lambdaSteps) * static_cast<double>(a.lambdaTrials) * 8.0 * 4.0);

    const AppendixReport rep = appendix_experiment(a, c.seed, c.workers);
    CsvWriter samples(c.file("appendix.csv"), {"level", "n", "n_prime", "trial", "value", "q_swapped", "cluster"});
    CsvWriter summary(c.file("appendix_summary.csv"),
                      {"level", "n", "n_prime", "lambda", "low", "high", "separation", "mean_id", "mean_swap",
                       "count_id", "count_swap", "agreement", "eta_id", "eta_swap"});
    for (std::size_t m = 0; m < rep.levels.size(); ++m) {
        const auto& lv = rep.levels[m];
        for (std::size_t t = 0; t < lv.values.size(); ++t)
            samples.row({m, lv.n, lv.nPrime, t, lv.values[t], static_cast<long>(lv.swapped[t]),
                         std::string(lv.values[t] > lv.split.threshold ? "high" : "low")});
        summary.row({m, lv.n, lv.nPrime, rep.lambda, lv.split.low, lv.split.high, lv.separation, lv.meanId,
                     lv.meanSwap, lv.countId, lv.countSwap, lv.agreement, lv.etaId, lv.etaSwap});
    }
}

void run_lemma_lm(Context& c, const Section& p) {
    const long   cases   = positive(p, "cases", 50);
    const double eps     = p.number("epsilon", 0.5);
    const int    m       = static_cast<int>(p.integer("m", 2));
    const long   samples = p.integer("samples", 20000);
    if (m != 2) throw ValidationError(p.child_path("m") + ": the built-in generator produces RP^2 instances (m = 2)");
    if (samples < 0) throw ValidationError(p.child_path("samples") + ": must be >= 0");
    c.charge(static_cast<double>(cases) * (static_cast<double>(samples) * 20.0 + 1e5));

    CsvWriter out(c.file("lemma_lm.csv"),
                  {"case", "status", "atoms", "heavy_count", "bound", "lower_mass", "min_hit_rate", "hit_bound",
                   "hits_ok"});
    for (long i = 0; i < cases; ++i) {
        Stream                  st(c.seed, static_cast<std::uint64_t>(i), StreamTag::Construction);
        const ProjectiveMeasure nu  = random_heavy_line_measure(st);
        const LMReport          rep = lemma_LM_check(nu, m, eps, static_cast<std::size_t>(samples),
                                                     child_seed(c.seed, static_cast<std::uint64_t>(i)));
        double minHit = rep.heavy.empty() ? 0.0 : 1.0;
        for (const auto& h : rep.heavy) minHit = std::min(minHit, h.hitRate);
        const char* status = rep.status == LMStatus::Ok               ? "ok"
                             : rep.status == LMStatus::HypothesisNotMet ? "hypothesis-not-met"
                                                                        : "bound-violated";
        out.row({i, std::string(status), nu.size(), rep.heavy.size(), rep.bound, rep.lowerMass, minHit, rep.hitBound,
                 static_cast<long>(rep.hitsOk)});
    }
}

void run_subspace_hit(Context& c, const Section& p) {
    const Schedule&   s      = c.schedule();
    const auto        ks     = p.integers("k", {2, 4, 6, 8});
    const double      rho    = p.number("rho", 0.05);
    const int         grid   = static_cast<int>(positive(p, "grid", 100));
    const std::string mode   = p.string("mode", "exact");
    const long        trials = positive(p, "trials", 20000);
    if (mode != "exact" && mode != "mc" && mode != "both")
        throw ValidationError(p.child_path("mode") + ": expected exact, mc or both");
    const long kmax = *std::max_element(ks.begin(), ks.end());
    c.charge(static_cast<double>(trials) * static_cast<double>(kmax) * 100.0 +
             (mode != "mc" ? std::pow(static_cast<double>(s.all_finite() && s.dim() > 0
                                                            ? s.table().front().support().atoms.size()
                                                            : 1),
                                      static_cast<double>(kmax)) * 200.0
                           : 0.0));
    const ProjectivePoint x0 = parse_point(p, "x0", s.dim(), 0.3);

    std::vector<double> angles;
    if (p.has("line_angle")) angles.push_back(p.number("line_angle"));
    else {
        if (s.dim() != 2) throw ValidationError(p.path() + ": give line_angle, the worst-line grid needs d = 2");
        for (int i = 0; i < grid; ++i) angles.push_back(M_PI * i / grid);
    }
    auto line = [&](double a) {
        Vector v(s.dim());
        v[0] = std::cos(a);
        v[1] = std::sin(a);
        return Subspace::span_of({v});
    };

    CsvWriter out(c.file("subspace_hit.csv"), {"k", "rho", "line_angle", "probability", "stderr", "mode"});
    for (long k : ks) {
        if (mode != "mc") {
            const ProjectiveMeasure nu = image_law(s, x0, k);
            double                  best = -1.0, bestAngle = 0.0;
            for (double a : angles) {
                const double pr = neighbourhood_mass(nu, line(a), rho);
                if (pr > best) {
                    best      = pr;
                    bestAngle = a;
                }
            }
            out.row({k, rho, bestAngle, best, 0.0, std::string("exact")});
        }
        if (mode != "exact") {
            // One batch of sampled endpoints serves every line of the grid.
            const auto pts = parallel_map(static_cast<std::size_t>(trials), c.workers, [&](std::size_t i) {
                Stream          stream(c.seed, i, StreamTag::Sampling);
                ProjectivePoint x = x0;
                for (long step = 1; step <= k; ++step) x = projective_apply(s.at(step).draw(stream).matrix, x);
                return x;
            });
            double best = -1.0, bestAngle = 0.0;
            for (double a : angles) {
                const Subspace l    = line(a);
                double         hits = 0.0;
                for (const auto& x : pts) hits += in_neighbourhood(x, l, rho) ? 1.0 : 0.0;
                const double pr = hits / static_cast<double>(trials);
                if (pr > best) {
                    best      = pr;
                    bestAngle = a;
                }
            }
            out.row({k, rho, bestAngle, best, std::sqrt(best * (1.0 - best) / static_cast<double>(trials)),
                     std::string("mc")});
        }
    }
}

void write_manifest(Context& c, const std::string& kind) {
    json m;
    m["experiment"]  = kind;
    m["seed"]        = c.seed;
    std::ostringstream h;
    h << std::hex << c.cfg.hash;
    m["config_hash"] = "fnv1a64:" + h.str();
    m["config"]      = fs::path(c.cfg.source).filename().string();
    m["version"]     = kVersion;
    m["compiler"]    = __VERSION__;
    m["files"]       = c.result.files;
    m["estimated_ops"] = c.result.estimatedOps;
    std::ofstream out(c.dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << m.dump(2) << '\n';
}

}  // namespace

RunResult run_experiment(const std::string& kind, const RunConfig& cfg, const RunOptions& opt) {
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
        throw ValidationError("unknown experiment '" + kind + "'");
    const std::string key = section_key(kind);
    if (!cfg.experiment.empty() && section_key(cfg.experiment) != key)
        throw ValidationError("experiment: config declares '" + cfg.experiment + "' but '" + kind + "' was requested");

    Context c{cfg};
    c.seed    = opt.seed.value_or(cfg.seed.value_or(1));
    c.workers = opt.workers.value_or(cfg.workers.value_or(1));
    c.budget  = opt.budget.value_or(cfg.budget.value_or(kDefaultBudget));
    c.dir     = opt.out.value_or(cfg.out.value_or(default_out_dir()));
    if (c.workers < 0) throw ValidationError("--workers: must be >= 0");
    std::error_code ec;
    fs::create_directories(c.dir, ec);
    if (ec) throw ValidationError(c.dir.string() + ": cannot create output directory: " + ec.message());

    const Section root(cfg.root, "");
    const Section p = root.section(key);
    if (key == "simulate") run_simulate(c, p);
    else if (key == "ld_tail") run_ld_tail(c, p);
    else if (key == "dissolve") run_dissolve(c, p);
    else if (key == "entropy") run_entropy(c, p);
    else if (key == "contract") run_contract(c, p);
    else if (key == "appendix") run_appendix(c, p);
    else if (key == "lemma_lm") run_lemma_lm(c, p);
    else run_subspace_hit(c, p);

    write_manifest(c, kind);
    c.result.outDir = c.dir.string();
    c.result.seed   = c.seed;
    return c.result;
}

}  // namespace furst
