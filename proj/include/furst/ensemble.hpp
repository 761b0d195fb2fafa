#pragma once

#include "furst/linalg.hpp"
#include "furst/rng.hpp"

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace furst {

class MatrixEnsemble;

struct WeightedMatrix {
    double weight = 0.0;
    Matrix matrix;
};

struct FiniteSupport {
    std::vector<WeightedMatrix> atoms;
};

/// d = 2 rotation by a uniform angle in [0, 2 pi).
struct RotationUniform {};

/// d = 2: diag(a, 1/a) with probability p, otherwise a uniform rotation.
struct HyperbolicRotationMix {
    double expansion   = 2.0;
    double probability = 0.5;
};

/// 4 x 4 block matrix blockdiag(B1 / 100, 100 B2), B1 and B2 i.i.d. copies of the
/// HyperbolicRotationMix(2, 1/2) law.
struct AppendixAlpha {};

/// Q * AppendixAlpha, with Q the block swap with probability 1/2 and Id otherwise.
struct AppendixBeta {};

struct Composite {
    std::vector<std::pair<double, std::shared_ptr<const MatrixEnsemble>>> parts;
};

/// A drawn matrix plus a per-kind tag recording the discrete choices made.
struct Draw {
    Matrix        matrix;
    std::uint32_t tag = 0;
};

// Tag bits for the appendix constructions.
inline constexpr std::uint32_t kTagUpperDiagonal = 1u;  // B1 drawn as diag(2, 1/2)
inline constexpr std::uint32_t kTagLowerDiagonal = 2u;  // B2 drawn as diag(2, 1/2)
inline constexpr std::uint32_t kTagSwapped       = 4u;  // Q = M
// HyperbolicRotationMix: tag 1 for the hyperbolic draw, 0 for a rotation.
// FiniteSupport: tag is the atom index. Composite: tag of the chosen part.

/// A distribution on SL(d, R). Immutable after construction.
class MatrixEnsemble {
public:
    using Kind = std::variant<FiniteSupport, RotationUniform, HyperbolicRotationMix, AppendixAlpha,
                              AppendixBeta, Composite>;

    /// Validates weights (positive, normalized to 1 within 1e-12) and SL membership.
    static MatrixEnsemble finite(std::vector<WeightedMatrix> atoms);
    static MatrixEnsemble single(const Matrix& m);
    static MatrixEnsemble rotation_uniform();
    static MatrixEnsemble hyperbolic_rotation_mix(double expansion, double probability);
    static MatrixEnsemble appendix_alpha();
    static MatrixEnsemble appendix_beta();
    static MatrixEnsemble composite(std::vector<std::pair<double, MatrixEnsemble>> parts);

    int         dim() const noexcept { return dim_; }
    const Kind& kind() const noexcept { return kind_; }
    bool        is_finite() const noexcept { return std::holds_alternative<FiniteSupport>(kind_); }
    /// Throws UnsupportedOperationError for non-finite ensembles.
    const FiniteSupport& support() const;
    /// sup ||A|| over the support (exact for every built-in kind).
    double support_norm_bound() const;
    std::string describe() const;

    Draw draw(Stream& stream) const;

private:
    MatrixEnsemble(int dim, Kind kind, std::vector<double> cumulative)
        : dim_(dim), kind_(std::move(kind)), cumulative_(std::move(cumulative)) {}

    int                 dim_ = 0;
    Kind                kind_;
    std::vector<double> cumulative_;  // FiniteSupport / Composite selection
};

Matrix sample(const MatrixEnsemble& mu, Stream& stream);

/// Law of A1 * A2 with A1 ~ mu1, A2 ~ mu2 (mu1 applied after mu2). Products
/// agreeing entrywise within 1e-12 are merged. Both inputs must be finite.
MatrixEnsemble convolve(const MatrixEnsemble& mu1, const MatrixEnsemble& mu2);

/// Base 2 x 2 law: diag(a, 1/a) with probability p, else uniform rotation.
Draw   draw_hyperbolic_rotation(double expansion, double probability, Stream& stream);
Draw   build_appendix_alpha(Stream& stream);
Draw   build_appendix_beta(Stream& stream);
/// Swap of the two R^2 blocks of R^4.
Matrix block_swap_matrix();

struct MomentDiagnostic {
    double gamma     = 1.0;
    double empirical = 0.0;  // mean of ||A||^gamma over the draws
    double bound     = 0.0;  // sup ||A||^gamma
};
MomentDiagnostic moment_diagnostic(const MatrixEnsemble& mu, double gamma, std::size_t draws,
                                   std::uint64_t seed);

// ---------------------------------------------------------------- schedules

struct Stationary {
    std::size_t index = 0;
};
struct Periodic {
    std::vector<std::size_t> pattern;
};
/// beta at the given steps, alpha elsewhere.
struct AppendixLevels {
    std::vector<long> levels;
    std::size_t       alpha = 0;
    std::size_t       beta  = 1;
};
struct Explicit {
    std::vector<std::size_t> sequence;
};

/// A non-stationary sequence of ensembles indexed by step n = 1, 2, ... .
/// Table indices are 0-based.
class Schedule {
public:
    using Rule = std::variant<Stationary, Periodic, AppendixLevels, Explicit>;
    static constexpr long kUnbounded = std::numeric_limits<long>::max();

    Schedule(std::vector<MatrixEnsemble> table, Rule rule, long length = kUnbounded);
    static Schedule stationary(MatrixEnsemble mu, long length = kUnbounded);

    int                                dim() const noexcept { return table_.front().dim(); }
    long                               length() const noexcept { return length_; }
    const std::vector<MatrixEnsemble>& table() const noexcept { return table_; }
    const Rule&                        rule() const noexcept { return rule_; }

    /// Table position used at step n; RangeError outside [1, length].
    std::size_t           index_at(long n) const;
    const MatrixEnsemble& at(long n) const { return table_[index_at(n)]; }
    bool                  all_finite() const;

private:
    std::vector<MatrixEnsemble> table_;
    Rule                        rule_;
    long                        length_;
};

const MatrixEnsemble& schedule_at(const Schedule& s, long n);

}  // namespace furst
