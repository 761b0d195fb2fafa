#pragma once

#include "furst/ensemble.hpp"
#include "furst/measure.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace furst {

/// Relative entropy h(nu | nuPrime) = sum m_i log(m_i / m'_{j(i)}); +inf when nu is not
/// absolutely continuous. Exact mode only: both diffuse masses must vanish.
double kl(const ProjectiveMeasure& nu, const ProjectiveMeasure& nuPrime);

/// mu * nu = sum_f w_f f_* nu, merged.
ProjectiveMeasure convolve_measure(const MatrixEnsemble& mu, const ProjectiveMeasure& nu);

/// Shannon entropy -sum m log m of the atoms.
double shannon(const ProjectiveMeasure& nu);

struct PsiApprox {
    double            value = 0.0;  // upper bound for Psi(mu)
    ProjectiveMeasure nu;
    std::size_t       restart = 0;
};

struct EntropyReport {
    double phi     = 0.0;  // Phi_mu(nu)
    double hTerm   = 0.0;  // h(mu * nu | target)
    double phiCond = 0.0;  // Phi_mu(nu | target)
    std::optional<PsiApprox> psiApprox;
};

/// Phi_mu(nu) = E_mu h(f_* nu | mu * nu). hTerm = 0 and phiCond = phi.
EntropyReport furstenberg_entropy(const MatrixEnsemble& mu, const ProjectiveMeasure& nu);

/// All three terms of Phi_mu(nu | target) = Phi_mu(nu) + h(mu * nu | target).
EntropyReport entropy_decomposition(const MatrixEnsemble& mu, const ProjectiveMeasure& nu,
                                    const ProjectiveMeasure& target);

/// |Phi_{mu' * mu}(nu) - Phi_mu(nu) - Phi_{mu'}(mu * nu)|.
double additivity_check(const MatrixEnsemble& mu, const MatrixEnsemble& muPrime, const ProjectiveMeasure& nu);

struct MinimizeOptions {
    int           supportSize = 4;   // 1..16
    std::size_t   restarts    = 8;
    int           iterations  = 200;
    std::uint64_t seed        = 1;
    int           workers     = 1;
};

/// Heuristic search over atomic nu with at most supportSize atoms. Upper bound only.
PsiApprox minimize_entropy(const MatrixEnsemble& mu, const MinimizeOptions& options);

}  // namespace furst
