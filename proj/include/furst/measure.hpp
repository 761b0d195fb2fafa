#pragma once

#include "furst/errors.hpp"
#include "furst/linalg.hpp"
#include "furst/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace furst {

/// Atom identity threshold, sin-angle metric.
inline constexpr double kMergeTol = 1e-9;
/// Weights below this are moved to the diffuse remainder.
inline constexpr double kPruneTol = 1e-15;

// ---------------------------------------------------------------- location traits

inline double atom_distance(const ProjectivePoint& a, const ProjectivePoint& b) { return point_distance(a, b); }
inline double atom_distance(const Subspace& a, const Subspace& b) { return subspace_distance(a, b); }

inline ProjectivePoint act(const Matrix& a, const ProjectivePoint& x) { return projective_apply(a, x); }
inline Subspace        act(const Matrix& a, const Subspace& l) { return grassmann_apply(a, l); }

inline int atom_rank(const ProjectivePoint&) { return 1; }
inline int atom_rank(const Subspace& l) { return l.rank(); }
inline int atom_dim(const ProjectivePoint& x) { return x.dim(); }
inline int atom_dim(const Subspace& l) { return l.dim(); }

/// Fixed pseudo-random symmetric direction (unit Frobenius norm) used to sort atoms.
/// The key <W, P> of the orthogonal projector P onto the atom is sign- and
/// basis-invariant and Lipschitz: |key(a) - key(b)| <= |P_a - P_b|_F <= sqrt(2m) dist(a, b).
inline const Matrix& sort_direction(int d) {
    static const auto table = [] {
        std::vector<Matrix> t(kMaxDim + 1);
        for (int n = 1; n <= kMaxDim; ++n) {
            Stream s(0x5EEDF00DULL, static_cast<std::uint64_t>(n), StreamTag::Construction);
            Matrix w(n);
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) w(i, j) = w(j, i) = s.uniform(-1.0, 1.0);
            t[static_cast<std::size_t>(n)] = (1.0 / w.frobenius()) * w;
        }
        return t;
    }();
    return table[static_cast<std::size_t>(d)];
}

inline double sort_key(const ProjectivePoint& x) {
    const Matrix& w = sort_direction(x.dim());
    return x.rep().dot(w * x.rep());
}
inline double sort_key(const Subspace& l) {
    const Matrix& w = sort_direction(l.dim());
    double        k = 0.0;
    for (int c = 0; c < l.rank(); ++c) {
        const Vector b = l.basis(c);
        k += b.dot(w * b);
    }
    return k;
}

template <class Loc>
struct Atom {
    Loc    loc;
    double weight = 0.0;
};

template <class Loc>
struct MergeResult {
    std::vector<Atom<Loc>>   atoms;   // ascending sort key
    std::vector<double>      keys;
    std::vector<std::size_t> target;  // raw index -> merged index
};

/// Merges atoms closer than `tol`. Deterministic: raw atoms are visited in
/// (key, index) order and join the first earlier representative within tol.
template <class Loc>
MergeResult<Loc> merge_atoms(const std::vector<Atom<Loc>>& raw, double tol) {
    MergeResult<Loc> out;
    out.target.assign(raw.size(), 0);
    if (raw.empty()) return out;
    std::vector<double> keys(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) keys[i] = sort_key(raw[i].loc);
    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return keys[a] < keys[b] || (keys[a] == keys[b] && a < b);
    });
    const double window = std::sqrt(2.0 * atom_rank(raw.front().loc)) * tol + 1e-15;
    out.atoms.reserve(raw.size());
    out.keys.reserve(raw.size());
    for (std::size_t i : order) {
        const double k     = keys[i];
        bool         found = false;
        for (std::size_t r = out.atoms.size(); r-- > 0;) {
            if (out.keys[r] < k - window) break;
            if (atom_distance(out.atoms[r].loc, raw[i].loc) <= tol) {
                out.atoms[r].weight += raw[i].weight;
                out.target[i] = r;
                found         = true;
                break;
            }
        }
        if (!found) {
            out.target[i] = out.atoms.size();
            out.atoms.push_back(raw[i]);
            out.keys.push_back(k);
        }
    }
    return out;
}

/// Finitely supported measure plus an untracked diffuse remainder.
template <class Loc>
class AtomicMeasure {
public:
    AtomicMeasure() = default;

    static AtomicMeasure dirac(const Loc& x) { return from_atoms({{x, 1.0}}); }

    /// Merges coinciding atoms and validates: weights > 0, total + diffuse = 1 within 1e-12.
    static AtomicMeasure from_atoms(std::vector<Atom<Loc>> atoms, double diffuse = 0.0,
                                    double mergeTol = kMergeTol) {
        if (atoms.empty() && diffuse <= 0.0) throw InvalidInputError("atomic measure: no atoms");
        if (diffuse < 0.0) throw InvalidInputError("atomic measure: negative diffuse mass");
        double total = diffuse;
        for (const auto& a : atoms) {
            if (!(a.weight > 0.0) || !std::isfinite(a.weight))
                throw InvalidInputError("atomic measure: weights must be positive and finite");
            if (atom_dim(a.loc) != atom_dim(atoms.front().loc) || atom_rank(a.loc) != atom_rank(atoms.front().loc))
                throw InvalidInputError("atomic measure: atoms live in different spaces");
            total += a.weight;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw InvalidInputError("atomic measure: total mass " + std::to_string(total) + " != 1");
        return unchecked(merge_atoms(atoms, mergeTol), diffuse, mergeTol);
    }

    /// Wraps an already merged atom list without normalization checks.
    static AtomicMeasure unchecked(MergeResult<Loc> merged, double diffuse, double mergeTol = kMergeTol) {
        AtomicMeasure m;
        m.atoms_    = std::move(merged.atoms);
        m.keys_     = std::move(merged.keys);
        m.diffuse_  = diffuse;
        m.mergeTol_ = mergeTol;
        return m;
    }

    const std::vector<Atom<Loc>>& atoms() const noexcept { return atoms_; }
    std::size_t                   size() const noexcept { return atoms_.size(); }
    double                        diffuse() const noexcept { return diffuse_; }
    double                        merge_tol() const noexcept { return mergeTol_; }
    int space_dim() const { return atoms_.empty() ? 0 : atom_dim(atoms_.front().loc); }

    /// Index of the atom within mergeTol of x, if any.
    std::optional<std::size_t> find(const Loc& x) const {
        const double k      = sort_key(x);
        const double window = std::sqrt(2.0 * atom_rank(x)) * mergeTol_ + 1e-15;
        auto         lo     = std::lower_bound(keys_.begin(), keys_.end(), k - window);
        for (auto it = lo; it != keys_.end() && *it <= k + window; ++it) {
            const auto i = static_cast<std::size_t>(it - keys_.begin());
            if (atom_distance(atoms_[i].loc, x) <= mergeTol_) return i;
        }
        return std::nullopt;
    }
    double mass_at(const Loc& x) const {
        const auto i = find(x);
        return i ? atoms_[*i].weight : 0.0;
    }

    double max_atom() const noexcept {
        double m = 0.0;
        for (const auto& a : atoms_) m = std::max(m, a.weight);
        return m;
    }
    /// Sum of squared atom weights; diffuse mass excluded.
    double energy() const noexcept {
        double e = 0.0;
        for (const auto& a : atoms_) e += a.weight * a.weight;
        return e;
    }
    double atom_mass() const noexcept {
        double t = 0.0;
        for (const auto& a : atoms_) t += a.weight;
        return t;
    }

private:
    std::vector<Atom<Loc>> atoms_;
    std::vector<double>    keys_;
    double                 diffuse_  = 0.0;
    double                 mergeTol_ = kMergeTol;
};

using ProjectiveMeasure = AtomicMeasure<ProjectivePoint>;
using GrassmannMeasure  = AtomicMeasure<Subspace>;

template <class Loc>
AtomicMeasure<Loc> pushforward(const Matrix& f, const AtomicMeasure<Loc>& nu) {
    std::vector<Atom<Loc>> raw;
    raw.reserve(nu.size());
    for (const auto& a : nu.atoms()) raw.push_back({act(f, a.loc), a.weight});
    return AtomicMeasure<Loc>::unchecked(merge_atoms(raw, nu.merge_tol()), nu.diffuse(), nu.merge_tol());
}

}  // namespace furst
