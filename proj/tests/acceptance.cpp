// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include "furst/config.hpp"
#include "furst/dissolve.hpp"
#include "furst/entropy.hpp"
#include "furst/errors.hpp"
#include "furst/experiments.hpp"
#include "furst/parallel.hpp"
#include "furst/product.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifndef FURST_CONFIG_DIR
#define FURST_CONFIG_DIR "configs"
#endif

using namespace furst;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool        pass = true;
    std::string detail;
};

using Row = std::map<std::string, std::string>;

std::vector<Row> read_csv(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("missing " + p.string());
    std::vector<Row>         rows;
    std::vector<std::string> header;
    std::string              line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream        ss(s);
        for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
        return out;
    };
    std::getline(in, line);
    header = split(line);
    while (std::getline(in, line)) {
        const auto cols = split(line);
        Row        r;
        for (std::size_t i = 0; i < header.size() && i < cols.size(); ++i) r[header[i]] = cols[i];
        rows.push_back(r);
    }
    return rows;
}

double num(const Row& r, const std::string& key) { return std::stod(r.at(key)); }

std::string slurp(const fs::path& p) {
    std::ifstream      in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double x, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    return buf;
}

const fs::path kConfigs = FURST_CONFIG_DIR;
const fs::path kScratch = fs::temp_directory_path() / "furst_acceptance";
int            gWorkers = 0;

fs::path run_config(const std::string& name, int workers, const std::string& tag = "") {
    const RunConfig cfg = load_config((kConfigs / name).string());
    std::string     kind = cfg.experiment;
    std::replace(kind.begin(), kind.end(), '_', '-');
    const fs::path dir = kScratch / (fs::path(name).stem().string() + tag);
    fs::remove_all(dir);
    RunOptions opt;
    opt.out     = dir.string();
    opt.workers = workers;
    run_experiment(kind, cfg, opt);
    return dir;
}

std::vector<std::string> shipped_configs() {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(kConfigs))
        if (e.path().extension() == ".json") out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

Matrix random_sl(int d, Stream& s) {
    for (;;) {
        Matrix m(d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) m(r, c) = s.normal();
        double det = m.determinant();
        if (std::abs(det) < 1e-3) continue;
        if (det < 0) {
            for (int c = 0; c < d; ++c) m(0, c) = -m(0, c);
            det = -det;
        }
        m *= std::pow(det, -1.0 / d);
        return m;
    }
}

// ---------------------------------------------------------------- criteria

Outcome jacobian_identity() {
    double worstRel = 0.0, worstExcess = -1.0;
    long   samples  = 0;
    for (int d = 2; d <= 4; ++d) {
        Stream st(1, static_cast<std::uint64_t>(d), StreamTag::Construction);
        for (int i = 0; i < 1000; ++i) {
            const Matrix a     = random_sl(d, st);
            const auto   sd    = svd(a);
            const double normD = std::pow(sd.sigma[0], d);
            const double inv   = 1.0 / projective_jacobian(a, ProjectivePoint(sd.right.column(0)));
            worstRel           = std::max(worstRel, std::abs(inv / normD - 1.0));
            Vector v(d);
            for (int k = 0; k < 10000; ++k) {
                for (int j = 0; j < d; ++j) v[j] = st.normal();
                const double x = 1.0 / projective_jacobian(a, ProjectivePoint(v));
                worstExcess    = std::max(worstExcess, x / normD - 1.0);
                ++samples;
            }
        }
    }
    Outcome o;
    o.pass   = worstRel <= 1e-9 && worstExcess <= 1e-12;
    o.detail = "3000 matrices in SL(2..4): max rel error at top direction " + fmt(worstRel) +
               " (<= 1e-9); " + std::to_string(samples) + " sampled directions, max (Jac^-1/||A||^d - 1) = " +
               fmt(worstExcess);
    return o;
}

Outcome entropy_additivity() {
    const RunConfig cfg  = load_config((kConfigs / "entropy.json").string());
    const auto      seed = cfg.seed.value_or(1);
    double          add = 0.0, dec = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        Stream                  st(seed, i, StreamTag::Construction);
        const MatrixEnsemble    mu      = random_finite_ensemble(3, st);
        const MatrixEnsemble    muPrime = random_finite_ensemble(3, st);
        const ProjectiveMeasure nu      = random_measure(4, 2, st);
        const ProjectiveMeasure image   = convolve_measure(mu, nu);
        std::vector<Atom<ProjectivePoint>> t;
        double                             total = 0.0;
        for (const auto& a : image.atoms()) {
            t.push_back({a.loc, 0.1 + st.uniform()});
            total += t.back().weight;
        }
        for (auto& a : t) a.weight /= total;
        const auto target = ProjectiveMeasure::from_atoms(std::move(t));

        add = std::max(add, additivity_check(mu, muPrime, nu));
        // Phi(nu | target) against Phi(nu) + h(mu * nu | target), the latter two evaluated separately.
        const double cond = entropy_decomposition(mu, nu, target).phiCond;
        dec               = std::max(dec, std::abs(cond - furstenberg_entropy(mu, nu).phi - kl(image, target)));
    }
    Outcome o;
    o.pass   = add <= 1e-10 && dec <= 1e-10;
    o.detail = "100 random instances: max additivity residual " + fmt(add) + ", max decomposition residual " +
               fmt(dec) + " (<= 1e-10)";
    return o;
}

Outcome dissolving_energy() {
    Outcome     o;
    std::string notes;
    for (const auto& name : shipped_configs()) {
        if (name.rfind("dissolve", 0) != 0) continue;
        const auto dir  = run_config(name, gWorkers);
        const auto rows = read_csv(dir / "dissolve.csv");
        double     worstGap = 0.0, worstGrowth = -1.0;
        for (std::size_t n = 1; n < rows.size(); ++n) {
            const double pruned = num(rows[n], "diffuse") - num(rows[n - 1], "diffuse");
            const double gap    = std::abs(num(rows[n - 1], "energy") - num(rows[n], "energy") - num(rows[n], "variance_D"));
            worstGap            = std::max(worstGap, gap - pruned);
            worstGrowth = std::max({worstGrowth, num(rows[n], "max_atom") - num(rows[n - 1], "max_atom"),
                                    num(rows[n], "energy") - num(rows[n - 1], "energy")});
        }
        const bool ok = worstGap <= 1e-10 && worstGrowth <= 0.0;
        o.pass        = o.pass && ok;
        notes += name + ": max(gap - pruned) " + fmt(worstGap) + ", max step growth " + fmt(worstGrowth) + "; ";
        if (name == "dissolve_generic3.json") {
            // Least-squares slope of log(Max_n / Max_0) through the origin, recomputed here.
            double sxy = 0.0, sxx = 0.0;
            for (std::size_t n = 1; n < rows.size(); ++n) {
                const double x = static_cast<double>(n);
                sxy += x * std::log(num(rows[n], "max_atom") / num(rows[0], "max_atom"));
                sxx += x * x;
            }
            const double rate = std::exp(sxy / sxx);
            const auto   fit  = read_csv(dir / "dissolve_fit.csv");
            o.pass            = o.pass && rows.size() == 21 && rate <= 0.97 &&
                     std::abs(rate - num(fit.front(), "max_rate")) <= 1e-12;
            notes += "3-map fitted decay " + fmt(rate) + " over n = " + std::to_string(rows.size() - 1) +
                     " (<= 0.97); ";
        }
    }
    o.detail = notes;
    return o;
}

Outcome sandwich() {
    // Every distinct (schedule, ensembles) pair among the shipped configs.
    std::set<std::string> seen;
    std::vector<std::pair<std::string, Schedule>> schedules;
    for (const auto& name : shipped_configs()) {
        const RunConfig cfg = load_config((kConfigs / name).string());
        if (!cfg.schedule) continue;
        const std::string key = cfg.root["schedule"].dump() + cfg.root["ensembles"].dump();
        if (seen.insert(key).second) schedules.emplace_back(name, *cfg.schedule);
    }
    const long n = 1000, trials = 1000;
    const double slack = 1e-6 * static_cast<double>(n);
    double       worst = -1e300;
    Outcome      o;
    for (const auto& [name, s] : schedules) {
        const auto reports = parallel_map(static_cast<std::size_t>(trials), gWorkers, [&](std::size_t i) {
            Stream            st(17, i, StreamTag::Trial);
            TrajectoryOptions opt;
            opt.n                    = n;
            opt.blockSize            = 10;
            opt.geometricCheckpoints = false;
            return block_diagnostics(run_trajectory(s, opt, st));
        });
        for (const auto& b : reports) {
            const double gap = b.sumXi - b.logNorm;
            // violations are positive
            worst = std::max({worst, -gap - slack, gap - b.sumR - slack, b.logVec - b.logNorm - slack,
                              std::abs(b.logVec - (b.sumXi - b.sumR)) - slack});
        }
    }
    o.pass   = worst <= 0.0;
    o.detail = std::to_string(schedules.size()) + " distinct shipped schedules x 1000 trajectories, n = 1000, k = 10: "
               "max violation beyond 1e-6 n is " + fmt(worst) + " (<= 0)";
    return o;
}

Outcome linear_growth() {
    const auto dir  = run_config("simulate_hrm.json", gWorkers);
    const auto rows = read_csv(dir / "estimate.csv");
    std::vector<double> rate, se;
    std::string         list;
    for (const auto& r : rows) {
        rate.push_back(num(r, "mean") / num(r, "n"));
        se.push_back(num(r, "stderr") / num(r, "n"));
        list += r.at("n") + ":" + fmt(rate.back(), 5) + " ";
    }
    const double lo = *std::min_element(rate.begin(), rate.end());
    const double hi = *std::max_element(rate.begin(), rate.end());

    const RunConfig cfg  = load_config((kConfigs / "simulate_hrm.json").string());
    const auto      lr   = long_run_rate(*cfg.schedule, 1000000, 100, child_seed(cfg.seed.value_or(1), 99));
    const double    sig  = std::hypot(se.back(), lr.stdError);
    const double    diff = std::abs(rate.back() - lr.rate);
    Outcome         o;
    o.pass   = rows.size() == 3 && lo > 0.0 && hi / lo - 1.0 <= 0.10 && diff <= 3.0 * sig;
    o.detail = "L_n/n at " + list + "(spread " + fmt(100 * (hi / lo - 1.0), 3) + "% <= 10%); n = 1e6 time average " +
               fmt(lr.rate, 5) + " +- " + fmt(lr.stdError, 2) + ", |diff| = " + fmt(diff, 3) + " <= 3 sigma = " +
               fmt(3 * sig, 3);
    return o;
}

Outcome large_deviations() {
    const auto dir  = run_config("ld_tail_hrm.json", gWorkers);
    const auto rows = read_csv(dir / "tail.csv");
    std::map<std::string, std::vector<std::pair<long, double>>> byMode;
    for (const auto& r : rows) byMode[r.at("mode")].push_back({std::stol(r.at("n")), num(r, "frequency")});
    Outcome     o;
    std::string notes = "eps = " + fmt(num(rows.front(), "epsilon"), 4) + "; ";
    for (const char* mode : {"norm", "vector"}) {
        auto& v = byMode[mode];
        std::sort(v.begin(), v.end());
        bool dec = v.size() == 3 && v[0].first == 50 && v[1].first == 100 && v[2].first == 200;
        for (std::size_t i = 1; i < v.size(); ++i) dec = dec && v[i].second < v[i - 1].second;
        o.pass = o.pass && dec;
        notes += std::string(mode) + ":";
        for (const auto& [n, f] : v) notes += " " + fmt(f, 4);
        notes += dec ? " (strictly decreasing); " : " (NOT strictly decreasing); ";
    }
    o.detail = notes;
    return o;
}

Outcome contracted_direction() {
    const auto dir  = run_config("contract_hrm.json", gWorkers);
    const auto rows = read_csv(dir / "contract_summary.csv");
    Outcome    o;
    if (rows.size() != 2) return {false, "expected the n and 2n summaries"};
    const double a = num(rows[0], "mean_abs_defect"), b = num(rows[1], "mean_abs_defect");
    o.pass         = rows[0].at("n") == "2000" && a <= 0.05 && b <= a;
    o.detail       = "mean |defect| " + fmt(a) + " at n = 2000 (<= 0.05), " + fmt(b) + " at n = 4000 (not larger)";
    return o;
}

Outcome appendix() {
    Outcome o;
    const double ln100 = std::log(100.0), ln10 = std::log(10.0);
    auto top = [](const fs::path& dir) {
        const auto rows = read_csv(dir / "appendix_summary.csv");
        for (const auto& r : rows)
            if (r.at("n") == "5000") return r;
        throw std::runtime_error("no level 5000 in " + dir.string());
    };
    const Row    d      = top(run_config("appendix.json", gWorkers));
    const double lambda = num(d, "lambda");
    const double sep    = num(d, "separation");
    const double mid    = num(d, "mean_id");
    const double msw    = num(d, "mean_swap");
    const bool   ok1    = d.at("n_prime") == "10000" && std::abs(sep - ln100) <= 0.3 &&
                     std::abs(mid - (lambda + ln100)) <= 0.15 && std::abs(msw - lambda) <= 0.15;

    const Row    c    = top(run_config("appendix_c3.json", gWorkers));
    const double low  = num(c, "low");
    const bool   ok2  = std::abs(low - (num(c, "lambda") + ln10)) <= 0.15;
    const double frac = num(d, "count_id") / (num(d, "count_id") + num(d, "count_swap"));
    o.pass            = ok1 && ok2;
    o.detail = "lambda_hat " + fmt(lambda, 5) + "; n' = 1e4: separation " + fmt(sep, 5) + " vs ln100 = 4.605 (+-0.3), "
               "mean|Q=Id " + fmt(mid, 5) + " vs " + fmt(lambda + ln100, 5) + ", mean|Q=M " + fmt(msw, 5) + " vs " +
               fmt(lambda, 5) + " (+-0.15); c = 3 second mode " + fmt(low, 5) + " (mean|Q=M " +
               fmt(num(c, "mean_swap"), 5) + ") vs " + fmt(num(c, "lambda") + ln10, 5) + " (+-0.15); info: Q=Id fraction " +
               fmt(frac, 3) + ", cluster/Q agreement " + fmt(num(d, "agreement"), 3);
    return o;
}

Outcome heavy_subspaces() {
    const RunConfig cfg  = load_config((kConfigs / "lemma_lm.json").string());
    const auto      seed = cfg.seed.value_or(1);
    const double    eps  = 0.5;
    const long      N    = static_cast<long>(std::floor(8.0 / (eps * eps)));
    const double    hit  = eps * eps / 8.0;
    long            maxHeavy = 0, totalHeavy = 0;
    double          worstHit = 1e300;
    Outcome         o;
    for (std::uint64_t i = 0; i < 50; ++i) {
        Stream     st(seed, i, StreamTag::Construction);
        const auto nu  = random_heavy_line_measure(st);
        const auto rep = lemma_LM_check(nu, 2, eps, 20000, child_seed(seed, i));
        if (rep.status == LMStatus::HypothesisNotMet) {
            o.pass = false;
            o.detail += "case " + std::to_string(i) + " violates the hypothesis; ";
        }
        const long count = static_cast<long>(rep.heavy.size());
        maxHeavy         = std::max(maxHeavy, count);
        totalHeavy += count;
        o.pass = o.pass && count <= N;
        for (const auto& h : rep.heavy) {
            worstHit = std::min(worstHit, (h.hitRate - hit) / std::max(h.hitStdError, 1e-300));
            o.pass   = o.pass && h.hitRate >= hit - 3.0 * h.hitStdError;
        }
    }
    o.detail += "50 measures: max heavy count " + std::to_string(maxHeavy) + " <= N = " + std::to_string(N) + " (" +
                std::to_string(totalHeavy) + " heavy lines in total); min (hit rate - " + fmt(hit) +
                ") / sigma = " + fmt(worstHit, 3) + " (>= -3)";
    return o;
}

Outcome reproducibility() {
    Outcome o;
    int     files = 0;
    for (const auto& name : shipped_configs()) {
        std::map<std::string, std::string> reference;
        for (int w : {1, 4, 16}) {
            const auto dir = run_config(name, w, "_w" + std::to_string(w));
            for (const auto& e : fs::directory_iterator(dir)) {
                const std::string key   = e.path().filename().string();
                const std::string bytes = slurp(e.path());
                if (w == 1) {
                    reference[key] = bytes;
                    ++files;
                } else if (reference[key] != bytes) {
                    o.pass = false;
                    o.detail += name + "/" + key + " differs at " + std::to_string(w) + " workers; ";
                }
            }
        }
    }
    o.detail += std::to_string(shipped_configs().size()) + " configs, " + std::to_string(files) +
                " output files compared bytewise at 1, 4 and 16 workers";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) gWorkers = std::stoi(argv[1]);
    struct Criterion {
        int                      id;
        const char*              name;
        double                   limit;  // seconds, 0 = none
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "Jacobian identity", 10, jacobian_identity},
        {2, "entropy additivity and decomposition", 5, entropy_additivity},
        {3, "dissolving energy identity and decay", 60, dissolving_energy},
        {4, "sandwich inequality", 30, sandwich},
        {5, "linear growth", 120, linear_growth},
        {6, "large deviations tail", 120, large_deviations},
        {7, "contracted direction", 120, contracted_direction},
        {8, "bimodal counterexample", 600, appendix},
        {9, "heavy-subspace counting", 30, heavy_subspaces},
        {10, "reproducibility", 0, reproducibility},
    };
    fs::create_directories(kScratch);
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome    o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::string  time = fmt(secs, 3) + " s";
        if (c.limit > 0) {
            time += " / limit " + fmt(c.limit, 3) + " s";
            if (secs >= c.limit) {
                o.pass = false;
                o.detail += " [runtime limit exceeded]";
            }
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << time << "): " << o.detail
                  << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
