#pragma once

// Forward-simulated decoy data from planted yield and error tables. Shared by
// the decoy unit tests and the acceptance run.
#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "mdiqkd/decoy.hpp"

namespace planted {

using namespace mdiqkd;

inline constexpr std::size_t planted_cutoff = 40;

struct Planted {
    std::vector<std::vector<double>> y, e;  // [m][n]
};

inline Planted plant(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double ea = 0.01 + 0.5 * u(rng), eb = 0.01 + 0.5 * u(rng), dark = 1e-5 * u(rng);
    Planted p;
    p.y.assign(planted_cutoff + 1, std::vector<double>(planted_cutoff + 1));
    p.e = p.y;
    for (std::size_t m = 0; m <= planted_cutoff; ++m)
        for (std::size_t n = 0; n <= planted_cutoff; ++n) {
            // Threshold-like yields with a random multiplicative jitter.
            const double base = 1.0 - (1.0 - dark) * std::pow(1.0 - ea, m) * std::pow(1.0 - eb, n);
            p.y[m][n] = std::clamp(base * (0.3 + 0.7 * u(rng)), 0.0, 1.0);
            p.e[m][n] = m + n == 0 ? 0.5 : 0.5 * u(rng);
        }
    p.e[1][1] = 0.2 * u(rng);
    return p;
}

inline std::array<PhotonNumberDistribution, 3> poisson_set(double mu, double nu) {
    return {poisson_pnd(mu, planted_cutoff, 1.0), poisson_pnd(nu, planted_cutoff, 1.0), poisson_pnd(0.0, planted_cutoff, 1.0)};
}

// Expected gains and error gains of a cell from the planted tables.
inline std::pair<double, double> expected_cell(const Planted& p, const std::vector<double>& pa, const std::vector<double>& pb) {
    double q = 0.0, eq = 0.0;
    for (std::size_t m = 0; m <= planted_cutoff; ++m)
        for (std::size_t n = 0; n <= planted_cutoff; ++n) {
            const double w = pa[m] * pb[n] * p.y[m][n];
            q += w;
            eq += w * p.e[m][n];
        }
    return {q, eq};
}

// Counts are generated from the untruncated distributions.
inline DecoyObservations observe(const Planted& p, const std::array<PhotonNumberDistribution, 3>& a,
                          const std::array<PhotonNumberDistribution, 3>& b, double pulses, std::mt19937_64* rng) {
    DecoyObservations obs;
    for (Basis basis : all_bases)
        for (Intensity ia : all_intensities)
            for (Intensity ib : all_intensities) {
                const auto [q, eq] = expected_cell(p, a[static_cast<int>(ia)].probs, b[static_cast<int>(ib)].probs);
                auto& cell = obs.at(basis, ia, ib);
                cell.pulses = pulses;
                if (!rng) {
                    cell.gain = q;
                    cell.error_rate = q > 0.0 ? eq / q : 0.0;
                    continue;
                }
                const auto clicks = std::binomial_distribution<long long>(static_cast<long long>(pulses), q)(*rng);
                const auto errors =
                    clicks > 0 ? std::binomial_distribution<long long>(clicks, eq / q)(*rng) : 0LL;
                cell.gain = clicks / pulses;
                cell.error_rate = clicks > 0 ? static_cast<double>(errors) / clicks : 0.0;
            }
    return obs;
}


}  // namespace planted
