#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "mdiqkd/error.hpp"
#include "mdiqkd/spectra.hpp"

// Photon-number statistics of WCP and heralded SPDC sources before and after
// a lossy channel. Multimode distributions are products over temporal modes;
// totals over |k|_1 are obtained by discrete convolution (generating
// functions multiply).
namespace mdiqkd {

enum class SourceKind { wcp, spdc };

inline const char* to_string(SourceKind k) { return k == SourceKind::wcp ? "wcp" : "spdc"; }

inline constexpr std::size_t default_photon_cutoff = 20;
inline constexpr double default_tail_tolerance = 1e-10;

struct ModalIntensities {
    std::vector<double> mu;
    double total = 0.0;
    SourceKind source_kind = SourceKind::wcp;
    // Index of the orthogonal-complement mode of a decomposed WCP, if any. It
    // carries photons but takes no part in interference.
    std::optional<std::size_t> complement_index;
};

// probs[n] = P(n); tail is the mass beyond probs.size()-1. `mass` is the total
// probability the distribution accounts for: 1 for an emission distribution,
// the trigger probability for a heralded (joint) distribution.
struct PhotonNumberDistribution {
    std::vector<double> probs;
    double tail = 0.0;
    double mass = 1.0;

    std::size_t n_max() const { return probs.empty() ? 0 : probs.size() - 1; }
    double operator[](std::size_t n) const { return n < probs.size() ? probs[n] : 0.0; }
    double sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }
};

struct LocalDetector {
    double efficiency = 0.9;   // eta_I
    double dark_count = 1e-6;  // d_I, per gate

    void validate() const {
        if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("LocalDetector: efficiency outside [0,1]");
        if (!(dark_count >= 0.0 && dark_count <= 1.0)) throw DomainError("LocalDetector: dark count outside [0,1]");
    }
};

struct RelayDetector {
    double efficiency = 0.6;   // eta_S
    double dark_count = 1e-6;  // d_S

    void validate() const {
        if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("RelayDetector: efficiency outside [0,1]");
        if (!(dark_count >= 0.0 && dark_count < 1.0 + 1e-15)) throw DomainError("RelayDetector: dark count outside [0,1]");
    }
};

namespace detail {

inline PhotonNumberDistribution finish(std::vector<double> probs, double mass, double tolerance) {
    PhotonNumberDistribution d;
    d.probs = std::move(probs);
    d.mass = mass;
    d.tail = std::max(0.0, mass - d.sum());
    if (d.tail > tolerance) throw TruncationError("photon-number distribution tail exceeds tolerance");
    return d;
}

}  // namespace detail

inline PhotonNumberDistribution poisson_pnd(double mu, std::size_t n_max = default_photon_cutoff,
                                            double tolerance = default_tail_tolerance) {
    if (!(mu >= 0.0)) throw DomainError("poisson_pnd: negative intensity");
    std::vector<double> p(n_max + 1);
    p[0] = std::exp(-mu);
    for (std::size_t n = 1; n <= n_max; ++n) p[n] = p[n - 1] * mu / static_cast<double>(n);
    return detail::finish(std::move(p), 1.0, tolerance);
}

// P(n) = mu^n / (1+mu)^(n+1)
inline PhotonNumberDistribution thermal_pnd(double mu, std::size_t n_max = default_photon_cutoff,
                                            double tolerance = default_tail_tolerance) {
    if (!(mu >= 0.0)) throw DomainError("thermal_pnd: negative intensity");
    std::vector<double> p(n_max + 1);
    const double r = mu / (1.0 + mu);
    p[0] = 1.0 / (1.0 + mu);
    for (std::size_t n = 1; n <= n_max; ++n) p[n] = p[n - 1] * r;
    return detail::finish(std::move(p), 1.0, tolerance);
}

// Truncated discrete convolution of sequences of equal length.
inline std::vector<double> convolve_truncated(std::span<const double> a, std::span<const double> b) {
    const std::size_t len = std::min(a.size(), b.size());
    std::vector<double> out(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        if (a[i] == 0.0) continue;
        for (std::size_t j = 0; i + j < len; ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

// Distribution of the sum of independent per-mode photon numbers. The output
// tail is at least as large as any input tail.
inline PhotonNumberDistribution pnd_convolve(std::span<const PhotonNumberDistribution> per_mode,
                                             double tolerance = default_tail_tolerance) {
    if (per_mode.empty()) return detail::finish({1.0}, 1.0, tolerance);
    const std::size_t len = per_mode.front().probs.size();
    double mass = 1.0;
    double max_tail = 0.0;
    for (const auto& d : per_mode) {
        if (d.probs.size() != len) throw DomainError("pnd_convolve: inconsistent n_max");
        mass *= d.mass;
        max_tail = std::max(max_tail, d.tail);
    }
    std::vector<double> acc(per_mode.front().probs);
    for (std::size_t m = 1; m < per_mode.size(); ++m) acc = convolve_truncated(acc, per_mode[m].probs);
    auto out = detail::finish(std::move(acc), mass, tolerance);
    out.tail = std::max(out.tail, max_tail);
    if (out.tail > tolerance) throw TruncationError("pnd_convolve: tail exceeds tolerance");
    return out;
}

// Scalar C with sum_k sinh^2(C sqrt(lambda_k)) = mu; returns mu_k per mode.
inline ModalIntensities spdc_mode_intensities(std::span<const double> lambdas, double mu) {
    if (!(mu >= 0.0)) throw DomainError("spdc_mode_intensities: intensity must be non-negative");
    ModalIntensities out;
    out.source_kind = SourceKind::spdc;
    out.mu.assign(lambdas.size(), 0.0);
    if (lambdas.empty()) throw DomainError("spdc_mode_intensities: no modes");
    const double lmax = *std::max_element(lambdas.begin(), lambdas.end());
    if (!(lmax > 0.0)) throw DomainError("spdc_mode_intensities: all weights vanish");
    if (mu == 0.0) return out;

    auto excess = [&](double c) {
        double s = 0.0;
        for (double l : lambdas) {
            const double sh = std::sinh(c * std::sqrt(std::max(l, 0.0)));
            s += sh * sh;
        }
        return s - mu;
    };
    // The dominant mode alone reaches mu at asinh(sqrt(mu))/sqrt(lmax).
    const double hi = std::asinh(std::sqrt(mu)) / std::sqrt(lmax);
    const auto [lo_c, hi_c] =
        boost::math::tools::bisect(excess, 0.0, hi * (1.0 + 1e-12), boost::math::tools::eps_tolerance<double>(50));
    const double c = 0.5 * (lo_c + hi_c);
    double total = 0.0;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        const double sh = std::sinh(c * std::sqrt(std::max(lambdas[k], 0.0)));
        out.mu[k] = sh * sh;
        total += out.mu[k];
    }
    // Remove the bisection residual so that total == mu exactly.
    const double scale = mu / total;
    for (auto& m : out.mu) m *= scale;
    out.total = mu;
    return out;
}

// mu_i = |alpha c_i|^2 plus a complement mode carrying |alpha|^2 (1 - sum|c_i|^2).
inline ModalIntensities wcp_modal_intensities(cdouble alpha, const OverlapVector& overlaps) {
    ModalIntensities out;
    out.source_kind = SourceKind::wcp;
    const double a2 = std::norm(alpha);
    double captured = 0.0;
    for (const auto& c : overlaps.coefficients) {
        out.mu.push_back(a2 * std::norm(c));
        captured += std::norm(c);
    }
    if (captured > 1.0 + 1e-9) throw DomainError("wcp_modal_intensities: sum |c_i|^2 exceeds 1");
    out.complement_index = out.mu.size();
    out.mu.push_back(a2 * std::max(0.0, 1.0 - captured));
    out.total = a2;
    return out;
}

inline PhotonNumberDistribution spdc_total_pnd(const ModalIntensities& modal, std::size_t n_max = default_photon_cutoff,
                                               double tolerance = default_tail_tolerance) {
    if (modal.source_kind != SourceKind::spdc) throw DomainError("spdc_total_pnd: source is not SPDC");
    std::vector<PhotonNumberDistribution> per_mode;
    per_mode.reserve(modal.mu.size());
    for (double m : modal.mu) per_mode.push_back(thermal_pnd(m, n_max, 1.0));
    return pnd_convolve(per_mode, tolerance);
}

// Heralded SPDC after a channel of combined transmittance eta:
//   f(k) = prod (eta mu_i)^k_i / (1 + eta mu_i)^(1+k_i)
//        - (1-d_I) prod [(1-eta_I) eta mu_i]^k_i / [1 + (eta + eta_I - eta eta_I) mu_i]^(1+k_i)
class HeraldedChannelPnd {
public:
    HeraldedChannelPnd(std::vector<double> mu, LocalDetector local, double eta)
        : mu_(std::move(mu)), local_(local), eta_(eta) {}

    double joint(std::span<const int> k) const {
        if (k.size() != mu_.size()) throw DomainError("HeraldedChannelPnd: photon vector has wrong length");
        const double eta_i = local_.efficiency;
        double first = 1.0, second = 1.0;
        for (std::size_t i = 0; i < mu_.size(); ++i) {
            if (k[i] < 0) throw DomainError("HeraldedChannelPnd: negative photon number");
            const double a = eta_ * mu_[i];
            first *= std::pow(a, k[i]) / std::pow(1.0 + a, 1 + k[i]);
            const double num = (1.0 - eta_i) * eta_ * mu_[i];
            const double den = 1.0 + (eta_ + eta_i - eta_ * eta_i) * mu_[i];
            second *= std::pow(num, k[i]) / std::pow(den, 1 + k[i]);
        }
        const double f = first - (1.0 - local_.dark_count) * second;
        if (f < -1e-14) throw NumericError("HeraldedChannelPnd: negative joint probability");
        return std::max(f, 0.0);
    }

private:
    std::vector<double> mu_;
    LocalDetector local_;
    double eta_;
};

struct HeraldedChannelResult {
    HeraldedChannelPnd joint;
    PhotonNumberDistribution total;
    double trigger_probability = 0.0;
};

inline double trigger_probability(std::span<const double> mu, const LocalDetector& local) {
    double prod = 1.0;
    for (double m : mu) prod /= 1.0 + local.efficiency * m;
    return 1.0 - (1.0 - local.dark_count) * prod;
}

inline HeraldedChannelResult heralded_pnd_after_channel(const ModalIntensities& modal, const LocalDetector& local,
                                                        double eta, std::size_t k_max = default_photon_cutoff,
                                                        double tolerance = default_tail_tolerance) {
    if (modal.source_kind != SourceKind::spdc) throw DomainError("heralded_pnd_after_channel: source is not SPDC");
    local.validate();
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("heralded_pnd_after_channel: transmittance outside [0,1]");

    const std::size_t len = k_max + 1;
    std::vector<double> first(len, 0.0), second(len, 0.0);
    first[0] = second[0] = 1.0;
    const double eta_i = local.efficiency;
    // Each mode contributes a geometric factor a0 r^k; convolving with it is
    // the recurrence out[k] = a0 in[k] + r out[k-1].
    auto geometric = [len](std::vector<double>& v, double a0, double r) {
        double prev = 0.0;
        for (std::size_t k = 0; k < len; ++k) prev = v[k] = a0 * v[k] + r * prev;
    };
    for (double m : modal.mu) {
        const double x = eta * m;
        const double den = 1.0 + (eta + eta_i - eta * eta_i) * m;
        geometric(first, 1.0 / (1.0 + x), x / (1.0 + x));
        geometric(second, 1.0 / den, (1.0 - eta_i) * eta * m / den);
    }
    std::vector<double> f(len);
    for (std::size_t k = 0; k < len; ++k) {
        const double v = first[k] - (1.0 - local.dark_count) * second[k];
        if (v < -1e-14) throw NumericError("heralded_pnd_after_channel: negative probability");
        f[k] = std::max(v, 0.0);
    }
    const double p_trig = trigger_probability(modal.mu, local);
    auto total = detail::finish(std::move(f), p_trig, tolerance);
    return {HeraldedChannelPnd(modal.mu, local, eta), std::move(total), p_trig};
}

// Heralded emission distribution, P(n pairs) * P_n(trigger).
inline PhotonNumberDistribution heralded_emission_pnd(const ModalIntensities& modal, const LocalDetector& local,
                                                      std::size_t n_max = default_photon_cutoff,
                                                      double tolerance = default_tail_tolerance) {
    return heralded_pnd_after_channel(modal, local, 1.0, n_max, tolerance).total;
}

// f(k) = e^{-eta mu} prod (eta mu_i)^k_i / k_i!
class WcpChannelPnd {
public:
    WcpChannelPnd(std::vector<double> mu, double eta) : mu_(std::move(mu)), eta_(eta) {}

    double joint(std::span<const int> k) const {
        if (k.size() != mu_.size()) throw DomainError("WcpChannelPnd: photon vector has wrong length");
        double total = 0.0, log_f = 0.0;
        for (std::size_t i = 0; i < mu_.size(); ++i) {
            total += mu_[i];
            if (k[i] < 0) throw DomainError("WcpChannelPnd: negative photon number");
            if (k[i] == 0) continue;
            if (mu_[i] == 0.0 || eta_ == 0.0) return 0.0;
            log_f += k[i] * std::log(eta_ * mu_[i]) - std::lgamma(k[i] + 1.0);
        }
        return std::exp(log_f - eta_ * total);
    }

private:
    std::vector<double> mu_;
    double eta_;
};

inline PhotonNumberDistribution wcp_pnd_after_channel(const ModalIntensities& modal, double eta,
                                                      std::size_t k_max = default_photon_cutoff,
                                                      double tolerance = default_tail_tolerance) {
    if (modal.source_kind != SourceKind::wcp) throw DomainError("wcp_pnd_after_channel: source is not WCP");
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("wcp_pnd_after_channel: transmittance outside [0,1]");
    return poisson_pnd(eta * modal.total, k_max, tolerance);
}

// Click probability of the relay detector on path A when a decomposed WCP
// (amplitude alpha, overlaps c_i) meets a heralded multimode SPDC state.
// `spdc` holds the per-mode source intensities sinh^2|eta_i|; the modes are
// rescaled to sinh^2|eta_i sqrt(eta/2)| by the beam splitter and channel.
// The WCP complement mode, if present in `overlaps`, has no SPDC partner and
// is excluded from the product.
inline double mode_intensity_after_split(double mu_source, double eta) {
    const double r = std::asinh(std::sqrt(std::max(mu_source, 0.0))) * std::sqrt(eta / 2.0);
    const double sh = std::sinh(r);
    return sh * sh;
}

inline double click_probability_path(cdouble alpha, const OverlapVector& overlaps, const ModalIntensities& spdc,
                                     const LocalDetector& local, const RelayDetector& relay, double eta) {
    local.validate();
    relay.validate();
    if (overlaps.coefficients.size() < spdc.mu.size())
        throw DomainError("click_probability_path: fewer overlaps than SPDC modes");
    const double a2 = std::norm(alpha);
    double no_click = 1.0 - relay.dark_count;
    for (std::size_t i = 0; i < spdc.mu.size(); ++i) {
        const double mu = mode_intensity_after_split(spdc.mu[i], eta);
        const double x = eta * a2 * std::norm(overlaps.coefficients[i]) / (2.0 * (1.0 + mu));
        const double factor =
            (std::exp(-x) - (1.0 - local.dark_count) * std::exp(-(1.0 + local.efficiency * mu) * x)) / (1.0 + mu);
        no_click *= factor;
    }
    return 1.0 - no_click;
}

// Maximizer of f(x) = e^{-x} - (1-d_I) e^{-(1+eta_I mu) x} on x >= 0.
inline double herald_vacuum_maximizer(double mu, const LocalDetector& local) {
    const double a = local.efficiency * mu;
    if (!(a > 0.0)) throw DomainError("herald_vacuum_maximizer: eta_I mu must be positive");
    return std::log((1.0 - local.dark_count) * (1.0 + a)) / a;
}

// 1 - (1-d_S) max_i { eta_I mu_i / [(1+mu_i)(1+eta_I mu_i)] * [1/((1-d_I)(1+eta_I mu_i))]^(1/(eta_I mu_i)) }
inline double visibility_lower_bound(const ModalIntensities& spdc, const LocalDetector& local,
                                     const RelayDetector& relay) {
    local.validate();
    relay.validate();
    double best = 0.0;
    bool any = false;
    for (double mu : spdc.mu) {
        const double a = local.efficiency * mu;
        if (!(a > 0.0)) continue;
        any = true;
        const double g = a / ((1.0 + mu) * (1.0 + a)) * std::pow(1.0 / ((1.0 - local.dark_count) * (1.0 + a)), 1.0 / a);
        best = std::max(best, g);
    }
    if (!any) throw DomainError("visibility_lower_bound: no mode with eta_I mu > 0");
    return 1.0 - (1.0 - relay.dark_count) * best;
}

}  // namespace mdiqkd
