#include "furst/ensemble.hpp"

#include "furst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

namespace furst {

namespace {

constexpr double kWeightTol    = 1e-12;
constexpr double kCoincideTol  = 1e-12;
constexpr double kAppendixGain = 100.0;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

std::vector<double> cumulative_of(const std::vector<double>& weights, const char* what) {
    if (weights.empty()) throw InvalidInputError(std::string(what) + ": empty support");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw ValidationError(std::string(what) + ": weights must be positive and finite");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > kWeightTol) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": weights sum to " << total << ", expected 1";
        throw ValidationError(os.str());
    }
    std::vector<double> cum(weights.size());
    std::partial_sum(weights.begin(), weights.end(), cum.begin());
    cum.back() = 1.0;
    return cum;
}

std::size_t pick(const std::vector<double>& cumulative, double u) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

Matrix uniform_rotation(Stream& stream) {
    return Matrix::rotation2(stream.uniform(0.0, 2.0 * std::numbers::pi));
}

}  // namespace

// ---------------------------------------------------------------- construction

MatrixEnsemble MatrixEnsemble::finite(std::vector<WeightedMatrix> atoms) {
    if (atoms.empty()) throw InvalidInputError("finite ensemble: empty support");
    const int           d = atoms.front().matrix.dim();
    std::vector<double> weights;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (atoms[i].matrix.dim() != d) throw InvalidInputError("finite ensemble: mixed dimensions");
        require_special_linear(atoms[i].matrix, "support matrix " + std::to_string(i));
        weights.push_back(atoms[i].weight);
    }
    auto cum = cumulative_of(weights, "finite ensemble");
    return MatrixEnsemble(d, FiniteSupport{std::move(atoms)}, std::move(cum));
}

MatrixEnsemble MatrixEnsemble::single(const Matrix& m) { return finite({{1.0, m}}); }

MatrixEnsemble MatrixEnsemble::rotation_uniform() { return MatrixEnsemble(2, RotationUniform{}, {}); }

MatrixEnsemble MatrixEnsemble::hyperbolic_rotation_mix(double expansion, double probability) {
    if (!(expansion > 1.0) || !std::isfinite(expansion)) {
        throw ValidationError("hyperbolic_rotation_mix: expansion must be > 1");
    }
    if (!(probability >= 0.0 && probability <= 1.0)) {
        throw ValidationError("hyperbolic_rotation_mix: probability must lie in [0, 1]");
    }
    return MatrixEnsemble(2, HyperbolicRotationMix{expansion, probability}, {});
}

MatrixEnsemble MatrixEnsemble::appendix_alpha() { return MatrixEnsemble(4, AppendixAlpha{}, {}); }
MatrixEnsemble MatrixEnsemble::appendix_beta() { return MatrixEnsemble(4, AppendixBeta{}, {}); }

MatrixEnsemble MatrixEnsemble::composite(std::vector<std::pair<double, MatrixEnsemble>> parts) {
    if (parts.empty()) throw InvalidInputError("composite ensemble: no parts");
    const int           d = parts.front().second.dim();
    std::vector<double> weights;
    Composite           c;
    for (auto& [w, mu] : parts) {
        if (mu.dim() != d) throw InvalidInputError("composite ensemble: mixed dimensions");
        weights.push_back(w);
        c.parts.emplace_back(w, std::make_shared<const MatrixEnsemble>(std::move(mu)));
    }
    auto cum = cumulative_of(weights, "composite ensemble");
    return MatrixEnsemble(d, std::move(c), std::move(cum));
}

const FiniteSupport& MatrixEnsemble::support() const {
    if (const auto* f = std::get_if<FiniteSupport>(&kind_)) return *f;
    throw UnsupportedOperationError("operation requires a finite-support ensemble, got " + describe());
}

double MatrixEnsemble::support_norm_bound() const {
    return std::visit(
        Overloaded{
            [](const FiniteSupport& f) {
                double m = 0.0;
                for (const auto& a : f.atoms) m = std::max(m, operator_norm(a.matrix));
                return m;
            },
            [](const RotationUniform&) { return 1.0; },
            [](const HyperbolicRotationMix& h) { return h.probability > 0.0 ? h.expansion : 1.0; },
            [](const AppendixAlpha&) { return 2.0 * kAppendixGain; },
            [](const AppendixBeta&) { return 2.0 * kAppendixGain; },
            [](const Composite& c) {
                double m = 0.0;
                for (const auto& [w, mu] : c.parts) m = std::max(m, mu->support_norm_bound());
                return m;
            },
        },
        kind_);
}

std::string MatrixEnsemble::describe() const {
    return std::visit(Overloaded{
                          [](const FiniteSupport& f) {
                              return "finite(" + std::to_string(f.atoms.size()) + " atoms)";
                          },
                          [](const RotationUniform&) { return std::string("rotation_uniform"); },
                          [](const HyperbolicRotationMix& h) {
                              std::ostringstream os;
                              os << "hyperbolic_rotation_mix(a=" << h.expansion << ", p=" << h.probability << ")";
                              return os.str();
                          },
                          [](const AppendixAlpha&) { return std::string("appendix_alpha"); },
                          [](const AppendixBeta&) { return std::string("appendix_beta"); },
                          [](const Composite& c) {
                              return "composite(" + std::to_string(c.parts.size()) + " parts)";
                          },
                      },
                      kind_);
}

// ---------------------------------------------------------------- sampling

Draw draw_hyperbolic_rotation(double expansion, double probability, Stream& stream) {
    // One coin, then (for rotations) one angle: every draw consumes a fixed pattern.
    if (stream.uniform() < probability) {
        const double d[] = {expansion, 1.0 / expansion};
        return {Matrix::diagonal(d), 1u};
    }
    return {uniform_rotation(stream), 0u};
}

Draw build_appendix_alpha(Stream& stream) {
    const Draw upper = draw_hyperbolic_rotation(2.0, 0.5, stream);
    const Draw lower = draw_hyperbolic_rotation(2.0, 0.5, stream);
    Draw       out{block_diagonal((1.0 / kAppendixGain) * upper.matrix, kAppendixGain * lower.matrix), 0u};
    if (upper.tag) out.tag |= kTagUpperDiagonal;
    if (lower.tag) out.tag |= kTagLowerDiagonal;
    return out;
}

Matrix block_swap_matrix() {
    Matrix m(4);
    m(0, 2) = m(1, 3) = m(2, 0) = m(3, 1) = 1.0;
    return m;
}

Draw build_appendix_beta(Stream& stream) {
    Draw b = build_appendix_alpha(stream);
    if (stream.uniform() < 0.5) {
        b.matrix = block_swap_matrix() * b.matrix;
        b.tag |= kTagSwapped;
    }
    return b;
}

Draw MatrixEnsemble::draw(Stream& stream) const {
    return std::visit(Overloaded{
                          [&](const FiniteSupport& f) {
                              const std::size_t i = f.atoms.size() == 1 ? 0 : pick(cumulative_, stream.uniform());
                              return Draw{f.atoms[i].matrix, static_cast<std::uint32_t>(i)};
                          },
                          [&](const RotationUniform&) { return Draw{uniform_rotation(stream), 0u}; },
                          [&](const HyperbolicRotationMix& h) {
                              return draw_hyperbolic_rotation(h.expansion, h.probability, stream);
                          },
                          [&](const AppendixAlpha&) { return build_appendix_alpha(stream); },
                          [&](const AppendixBeta&) { return build_appendix_beta(stream); },
                          [&](const Composite& c) {
                              const std::size_t i = pick(cumulative_, stream.uniform());
                              Draw              d = c.parts[i].second->draw(stream);
                              d.tag               = static_cast<std::uint32_t>(i);
                              return d;
                          },
                      },
                      kind_);
}

Matrix sample(const MatrixEnsemble& mu, Stream& stream) { return mu.draw(stream).matrix; }

// ---------------------------------------------------------------- convolution

MatrixEnsemble convolve(const MatrixEnsemble& mu1, const MatrixEnsemble& mu2) {
    const auto& a = mu1.support();
    const auto& b = mu2.support();
    if (mu1.dim() != mu2.dim()) throw InvalidInputError("convolve: dimension mismatch");

    std::vector<WeightedMatrix> products;
    products.reserve(a.atoms.size() * b.atoms.size());
    for (const auto& x : a.atoms)
        for (const auto& y : b.atoms) products.push_back({x.weight * y.weight, x.matrix * y.matrix});

    // Representatives keyed by their (0,0) entry; entrywise coincidence implies
    // the keys differ by at most the tolerance. First occurrence wins.
    std::vector<WeightedMatrix>       merged;
    std::multimap<double, std::size_t> byKey;
    for (const auto& p : products) {
        const double key   = p.matrix(0, 0);
        std::size_t  found = merged.size();
        for (auto it = byKey.lower_bound(key - kCoincideTol); it != byKey.end() && it->first <= key + kCoincideTol;
             ++it) {
            if (merged[it->second].matrix.max_abs_diff(p.matrix) <= kCoincideTol) {
                found = std::min(found, it->second);
            }
        }
        if (found == merged.size()) {
            byKey.emplace(key, merged.size());
            merged.push_back(p);
        } else {
            merged[found].weight += p.weight;
        }
    }
    // Renormalize away the round-off of the weight products.
    double total = 0.0;
    for (const auto& m : merged) total += m.weight;
    for (auto& m : merged) m.weight /= total;
    return MatrixEnsemble::finite(std::move(merged));
}

MomentDiagnostic moment_diagnostic(const MatrixEnsemble& mu, double gamma, std::size_t draws,
                                   std::uint64_t seed) {
    Stream           stream(seed, 0, StreamTag::Sampling);
    MomentDiagnostic out{gamma, 0.0, std::pow(mu.support_norm_bound(), gamma)};
    for (std::size_t i = 0; i < draws; ++i) out.empirical += std::pow(operator_norm(sample(mu, stream)), gamma);
    out.empirical /= static_cast<double>(std::max<std::size_t>(draws, 1));
    return out;
}

// ---------------------------------------------------------------- schedules

Schedule::Schedule(std::vector<MatrixEnsemble> table, Rule rule, long length)
    : table_(std::move(table)), rule_(std::move(rule)), length_(length) {
    if (table_.empty()) throw InvalidInputError("schedule: empty ensemble table");
    if (length_ < 1) throw InvalidInputError("schedule: run length must be >= 1");
    const int d = table_.front().dim();
    for (const auto& mu : table_)
        if (mu.dim() != d) throw InvalidInputError("schedule: ensembles of mixed dimension");

    auto check_index = [&](std::size_t i) {
        if (i >= table_.size()) {
            throw InvalidInputError("schedule: table index " + std::to_string(i) + " out of range");
        }
    };
    std::visit(Overloaded{
                   [&](const Stationary& s) { check_index(s.index); },
                   [&](const Periodic& p) {
                       if (p.pattern.empty()) throw InvalidInputError("schedule: empty periodic pattern");
                       for (auto i : p.pattern) check_index(i);
                   },
                   [&](const AppendixLevels& a) {
                       check_index(a.alpha);
                       check_index(a.beta);
                       for (std::size_t i = 1; i < a.levels.size(); ++i)
                           if (a.levels[i] <= a.levels[i - 1])
                               throw InvalidInputError("schedule: appendix levels must increase strictly");
                       if (!a.levels.empty() && a.levels.front() < 1)
                           throw InvalidInputError("schedule: appendix levels must be >= 1");
                   },
                   [&](const Explicit& e) {
                       if (e.sequence.empty()) throw InvalidInputError("schedule: empty explicit sequence");
                       for (auto i : e.sequence) check_index(i);
                       length_ = std::min<long>(length_, static_cast<long>(e.sequence.size()));
                   },
               },
               rule_);
}

Schedule Schedule::stationary(MatrixEnsemble mu, long length) {
    std::vector<MatrixEnsemble> t;
    t.push_back(std::move(mu));
    return Schedule(std::move(t), Stationary{0}, length);
}

std::size_t Schedule::index_at(long n) const {
    if (n < 1 || n > length_) {
        throw RangeError("schedule index " + std::to_string(n) + " outside [1, " + std::to_string(length_) + "]");
    }
    return std::visit(Overloaded{
                          [](const Stationary& s) { return s.index; },
                          [&](const Periodic& p) {
                              return p.pattern[static_cast<std::size_t>(n - 1) % p.pattern.size()];
                          },
                          [&](const AppendixLevels& a) {
                              return std::binary_search(a.levels.begin(), a.levels.end(), n) ? a.beta : a.alpha;
                          },
                          [&](const Explicit& e) { return e.sequence[static_cast<std::size_t>(n - 1)]; },
                      },
                      rule_);
}

bool Schedule::all_finite() const {
    return std::all_of(table_.begin(), table_.end(), [](const MatrixEnsemble& m) { return m.is_finite(); });
}

const MatrixEnsemble& schedule_at(const Schedule& s, long n) { return s.at(n); }

}  // namespace furst
