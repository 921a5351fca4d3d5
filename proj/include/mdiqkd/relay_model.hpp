#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "mdiqkd/error.hpp"
#include "mdiqkd/photon_stats.hpp"

// Relay model used to turn photon numbers arriving at the relay into
// detection statistics. It is a polarization Bell-state measurement with four
// threshold detectors (1H, 1V, 2H, 2V), each with dark-count probability d_S;
// detector efficiency is folded into the channel transmittance.
//
// A valid event is exactly two clicks, one H and one V detector. Photons are
// treated as independent particles (phase-randomized inputs), each landing on
// one detector:
//   Z basis  the sent polarization is flipped with probability p_f, where
//            2 p_f (1 - p_f) = e_d, then the photon picks port 1 or 2 at random.
//            Sending equal bits and still getting a valid event is an error.
//   X basis  every detector is equally likely. Valid events are random (error
//            1/2) except the photon-only part of the (1,1) term, whose error is
//            e_d + (1 - 2 e_d)(1 - V)/2 with V the two-source visibility.
//
// The probability that exactly the detector set S holds photons follows from
// inclusion-exclusion, P(S) = sum_{T subset S} (-1)^{|S\T|} pA(T)^k pB(T)^l.
namespace mdiqkd {

struct RelayModelParams {
    double dark_count = 1e-6;     // d_S
    double misalignment = 0.015;  // e_d
    double visibility = 1.0;      // V
    std::size_t k_max = 40;

    void validate() const {
        if (!(dark_count >= 0.0 && dark_count < 1.0)) throw DomainError("relay model: dark count outside [0,1)");
        if (!(misalignment >= 0.0 && misalignment <= 0.5)) throw DomainError("relay model: misalignment outside [0,0.5]");
        if (!(visibility >= 0.0 && visibility <= 1.0 + 1e-12)) throw DomainError("relay model: visibility outside [0,1]");
    }
};

// Detection table indexed by arriving photon numbers (k from A, l from B).
class DetectionTable {
public:
    DetectionTable() = default;
    explicit DetectionTable(std::size_t k_max) : n_(k_max + 1), v_(n_ * n_, 0.0) {}
    double& operator()(std::size_t k, std::size_t l) { return v_[k * n_ + l]; }
    double operator()(std::size_t k, std::size_t l) const { return v_[k * n_ + l]; }
    std::size_t size() const { return n_; }

private:
    std::size_t n_ = 0;
    std::vector<double> v_;
};

namespace detail {

using Landing = std::array<double, 4>;  // 1H, 1V, 2H, 2V

inline constexpr std::array<unsigned, 4> valid_masks{0b0011u, 0b1001u, 0b0110u, 0b1100u};

inline int popcount4(unsigned m) { return static_cast<int>((m & 1u) + ((m >> 1) & 1u) + ((m >> 2) & 1u) + ((m >> 3) & 1u)); }

inline double landing_mass(const Landing& p, unsigned mask) {
    double s = 0.0;
    for (unsigned j = 0; j < 4; ++j)
        if (mask & (1u << j)) s += p[j];
    return s;
}

// Probabilities of exactly the set S of detectors receiving photons, for all
// 16 sets, given k photons distributed by pa and l by pb.
inline std::array<double, 16> photon_sets(const Landing& pa, const Landing& pb, std::size_t k, std::size_t l) {
    std::array<double, 16> pw{};
    for (unsigned t = 0; t < 16; ++t) {
        const double a = landing_mass(pa, t), b = landing_mass(pb, t);
        pw[t] = std::pow(a, static_cast<double>(k)) * std::pow(b, static_cast<double>(l));
    }
    std::array<double, 16> out{};
    for (unsigned s = 0; s < 16; ++s) {
        double acc = 0.0;
        for (unsigned t = s;; t = (t - 1) & s) {
            acc += ((popcount4(s) - popcount4(t)) % 2 ? -1.0 : 1.0) * pw[t];
            if (t == 0) break;
        }
        out[s] = std::max(acc, 0.0);
    }
    return out;
}

// Probability that exactly the set F fires, dark counts included.
inline double fired(const std::array<double, 16>& ph, unsigned f, double d) {
    double acc = 0.0;
    for (unsigned s = f;; s = (s - 1) & f) {
        acc += ph[s] * std::pow(d, popcount4(f) - popcount4(s));
        if (s == 0) break;
    }
    return acc * std::pow(1.0 - d, 4 - popcount4(f));
}

inline double valid_probability(const std::array<double, 16>& ph, double d) {
    double v = 0.0;
    for (unsigned f : valid_masks) v += fired(ph, f, d);
    return v;
}

inline Landing polarized(bool horizontal, double flip) {
    const double keep = (1.0 - flip) / 2.0, swap = flip / 2.0;
    return horizontal ? Landing{keep, swap, keep, swap} : Landing{swap, keep, swap, keep};
}

}  // namespace detail

// Flip probability p_f in [0, 1/2] with 2 p_f (1 - p_f) = e_d.
inline double flip_probability(double e_d) {
    if (!(e_d >= 0.0 && e_d <= 0.5)) throw DomainError("flip_probability: e_d outside [0, 0.5]");
    return 0.5 * (1.0 - std::sqrt(1.0 - 2.0 * e_d));
}

inline double single_pair_x_error(double e_d, double visibility) {
    return e_d + (1.0 - 2.0 * e_d) * (1.0 - visibility) / 2.0;
}

class RelayModel {
public:
    explicit RelayModel(RelayModelParams p) : p_(p) {
        p_.validate();
        build();
    }

    const RelayModelParams& params() const { return p_; }
    // Valid-event and erroneous-valid-event probabilities per basis.
    const DetectionTable& valid(bool z_basis) const { return z_basis ? dz_ : dx_; }
    const DetectionTable& error(bool z_basis) const { return z_basis ? ez_ : ex_; }

    // Yield and error-weighted yield for m, n photons sent through
    // transmittances eta_a, eta_b (binomial thinning of the tables).
    double yield(bool z_basis, std::size_t m, std::size_t n, double eta_a, double eta_b) const {
        return thinned(valid(z_basis), m, n, eta_a, eta_b);
    }
    double error_yield(bool z_basis, std::size_t m, std::size_t n, double eta_a, double eta_b) const {
        return thinned(error(z_basis), m, n, eta_a, eta_b);
    }

private:
    double thinned(const DetectionTable& t, std::size_t m, std::size_t n, double eta_a, double eta_b) const {
        if (m >= t.size() || n >= t.size()) throw DomainError("relay model: photon number beyond table");
        auto binom = [](std::size_t n_, std::size_t k, double p) {
            return std::exp(std::lgamma(n_ + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_ - k + 1.0)) *
                   std::pow(p, static_cast<double>(k)) * std::pow(1.0 - p, static_cast<double>(n_ - k));
        };
        double acc = 0.0;
        for (std::size_t k = 0; k <= m; ++k)
            for (std::size_t l = 0; l <= n; ++l) acc += binom(m, k, eta_a) * binom(n, l, eta_b) * t(k, l);
        return acc;
    }

    void build() {
        const std::size_t n = p_.k_max + 1;
        dz_ = ez_ = dx_ = ex_ = DetectionTable(p_.k_max);
        const double d = p_.dark_count;
        const double pf = flip_probability(p_.misalignment);
        const auto h = detail::polarized(true, pf), v = detail::polarized(false, pf);
        const detail::Landing uniform{0.25, 0.25, 0.25, 0.25};
        const double e11 = single_pair_x_error(p_.misalignment, std::min(p_.visibility, 1.0));
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t l = 0; l < n; ++l) {
                const double right = detail::valid_probability(detail::photon_sets(h, v, k, l), d);
                const double wrong = detail::valid_probability(detail::photon_sets(h, h, k, l), d);
                dz_(k, l) = 0.5 * (right + wrong);
                ez_(k, l) = 0.5 * wrong;

                const auto ph = detail::photon_sets(uniform, uniform, k, l);
                const double total = detail::valid_probability(ph, d);
                dx_(k, l) = total;
                if (k == 1 && l == 1) {
                    // Both clicks from the photons themselves, the other two detectors silent.
                    double photon_only = 0.0;
                    for (unsigned f : detail::valid_masks) photon_only += ph[f];
                    photon_only *= (1.0 - d) * (1.0 - d);
                    ex_(k, l) = e11 * photon_only + 0.5 * (total - photon_only);
                } else {
                    ex_(k, l) = 0.5 * total;
                }
            }
    }

    RelayModelParams p_;
    DetectionTable dz_, ez_, dx_, ex_;
};

}  // namespace mdiqkd
