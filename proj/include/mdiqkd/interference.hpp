#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <utility>
#include <vector>

#include "mdiqkd/error.hpp"
#include "mdiqkd/spectra.hpp"

// Two-port Hong-Ou-Mandel calculators. Beam splitter convention:
//   a+ -> (a+ + b+)/sqrt2,  b+ -> (a+ - b+)/sqrt2.
// Detectors are threshold detectors without dark counts.
namespace mdiqkd {

struct DetectorPair {
    double eta1 = 1.0;
    double eta2 = 1.0;

    void validate() const {
        if (!(eta1 >= 0.0 && eta1 <= 1.0) || !(eta2 >= 0.0 && eta2 <= 1.0))
            throw DomainError("DetectorPair: efficiencies must lie in [0, 1]");
    }
};

struct CoincidenceResult {
    double probability = 0.0;
    std::vector<double> breakdown;  // per-mode contributions when meaningful
};

// One photon per input port with overlap c:  eta1 eta2 (1 - |c|^2) / 2.
inline CoincidenceResult coincidence_single_photon(cdouble c, const DetectorPair& det) {
    det.validate();
    double c2 = std::norm(c);
    if (c2 > (1.0 + 1e-12) * (1.0 + 1e-12)) throw DomainError("coincidence_single_photon: |c| > 1");
    c2 = std::min(c2, 1.0);
    return {det.eta1 * det.eta2 * (1.0 - c2) / 2.0, {}};
}

// Coherent states alpha (port a, mode psi) and beta (port b, mode phi).
inline CoincidenceResult coincidence_coherent(cdouble alpha, cdouble beta, cdouble c, const DetectorPair& det) {
    det.validate();
    double c2 = std::norm(c);
    if (c2 > (1.0 + 1e-12) * (1.0 + 1e-12)) throw DomainError("coincidence_coherent: |c| > 1");
    c2 = std::min(c2, 1.0);
    const double b2 = std::norm(beta);
    const double mu_a = std::norm(alpha + beta * c) / 2.0 + b2 * (1.0 - c2) / 2.0;
    const double mu_b = std::norm(alpha - beta * c) / 2.0 + b2 * (1.0 - c2) / 2.0;
    const double p = (-std::expm1(-det.eta1 * mu_a)) * (-std::expm1(-det.eta2 * mu_b));
    return {p, {mu_a, mu_b}};
}

// SPDC pair with signal on port a and idler on port b, ideal detectors:
//   P = 1/2 - 1/2 * integral conj f(w2, w1) f(w1, w2).
inline CoincidenceResult coincidence_spdc_pair(const JointSpectralAmplitude& jsa) {
    if (!jsa.signal_grid.same_as(jsa.idler_grid))
        throw GridError("coincidence_spdc_pair: signal and idler grids must be identical");
    const auto& f = jsa.values;
    cdouble acc{0.0, 0.0};
    for (Eigen::Index j = 0; j < f.rows(); ++j)
        for (Eigen::Index k = 0; k < f.cols(); ++k) acc += std::conj(f(k, j)) * f(j, k);
    const double h = jsa.signal_grid.step();
    const double overlap = acc.real() * h * h;
    return {0.5 - 0.5 * overlap, {}};
}

// Same probability evaluated in the Schmidt basis,
//   1/2 - 1/2 sum_{m,n} sqrt(l_m l_n) <phi_m|psi_n> <psi_m|phi_n>,
// exact when the decomposition is full rank.
inline CoincidenceResult coincidence_spdc_pair_schmidt(const SchmidtDecomposition& sd) {
    const std::size_t n = sd.cutoff();
    if (n == 0) return {0.5, {}};
    if (!sd.signal_modes.front().grid.same_as(sd.idler_modes.front().grid))
        throw GridError("coincidence_spdc_pair_schmidt: signal and idler grids must be identical");
    const double h = sd.signal_modes.front().grid.step();
    const std::size_t len = sd.signal_modes.front().values.size();

    // g(m, n) = integral psi_n conj(phi_m)
    Eigen::MatrixXcd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k) {
            cdouble acc{0.0, 0.0};
            const auto& psi = sd.signal_modes[k].values;
            const auto& phi = sd.idler_modes[m].values;
            for (std::size_t t = 0; t < len; ++t) acc += psi[t] * std::conj(phi[t]);
            g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = acc * h;
        }
    cdouble total{0.0, 0.0};
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = 0; k < n; ++k) {
            const double w = std::sqrt(sd.lambdas[m] * sd.lambdas[k]);
            // <psi_m|phi_n> = conj(integral psi_m conj(phi_n)) = conj(g(n, m))
            total += w * g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) *
                     std::conj(g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)));
        }
    return {0.5 - 0.5 * total.real(), {}};
}

// Overlap of two sampled amplitudes with the second delayed by tau.
inline cdouble delayed_overlap(const SpectralAmplitude& a, const SpectralAmplitude& b, double tau) {
    if (!a.grid.same_as(b.grid)) throw GridError("delayed_overlap: grid mismatch");
    cdouble acc{0.0, 0.0};
    const double center = a.grid.center();
    // The carrier phase e^{i w0 tau} drops out of |c|; it is applied once at the end.
    for (std::size_t k = 0; k < a.values.size(); ++k)
        acc += std::conj(a.values[k]) * b.values[k] * std::polar(1.0, (a.grid[k] - center) * tau);
    return acc * a.grid.step() * std::polar(1.0, center * tau);
}

struct DipPoint {
    double delay = 0.0;
    double probability = 0.0;
};

inline std::vector<DipPoint> hom_dip_scan(const SpectralAmplitude& amp_a, const SpectralAmplitude& amp_b,
                                          std::span<const double> delays, const DetectorPair& det) {
    std::vector<DipPoint> out;
    out.reserve(delays.size());
    for (double tau : delays) {
        cdouble c = delayed_overlap(amp_a, amp_b, tau);
        // Quadrature can overshoot unit magnitude by rounding only.
        if (std::abs(c) > 1.0) c /= std::abs(c);
        out.push_back({tau, coincidence_single_photon(c, det).probability});
    }
    return out;
}

}  // namespace mdiqkd
