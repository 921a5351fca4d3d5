#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "mdiqkd/decoy.hpp"
#include "mdiqkd/error.hpp"
#include "mdiqkd/photon_stats.hpp"
#include "mdiqkd/relay_model.hpp"
#include "mdiqkd/spectra.hpp"
#include "mdiqkd/units.hpp"

namespace mdiqkd {

inline constexpr double error_correction_efficiency = 1.16;
// Post-channel photon numbers are tracked to this cutoff so that the tail
// stays below 1e-10 for every intensity up to 1.
inline constexpr std::size_t relay_photon_cutoff = 40;

// Photon source of one party. Interference weights live on a mode basis
// shared by both parties (the Schmidt signal modes of the SPDC source).
class SourceModel {
public:
    // Plain WCP: a single mode, used when both parties hold identical lasers.
    static SourceModel wcp() {
        SourceModel s;
        s.kind_ = SourceKind::wcp;
        s.weights_ = {1.0};
        return s;
    }

    // WCP decomposed onto the partner's SPDC modes; |c_i|^2 are its weights
    // and the remainder 1 - sum |c_i|^2 sits in a non-interfering complement.
    static SourceModel wcp_decomposed(const OverlapVector& overlaps) {
        SourceModel s;
        s.kind_ = SourceKind::wcp;
        for (const auto& c : overlaps.coefficients) s.weights_.push_back(std::norm(c));
        s.decomposed_ = true;
        return s;
    }

    // Heralded SPDC with Schmidt weights lambda (renormalized to sum 1).
    static SourceModel spdc(std::vector<double> lambdas, LocalDetector local) {
        local.validate();
        const double sum = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
        if (lambdas.empty() || !(sum > 0.0)) throw DomainError("SourceModel::spdc: empty Schmidt spectrum");
        for (double& l : lambdas) l /= sum;
        SourceModel s;
        s.kind_ = SourceKind::spdc;
        s.weights_ = std::move(lambdas);
        s.local_ = local;
        return s;
    }

    SourceKind kind() const { return kind_; }
    const std::vector<double>& weights() const { return weights_; }
    const LocalDetector& local() const { return local_; }
    bool decomposed() const { return decomposed_; }

    ModalIntensities modal(double mu) const {
        if (kind_ == SourceKind::spdc) return spdc_mode_intensities(weights_, mu);
        ModalIntensities m;
        m.source_kind = SourceKind::wcp;
        m.mu = {mu};
        m.total = mu;
        return m;
    }

    // Emission distribution; heralded (joint with the trigger) for SPDC.
    PhotonNumberDistribution emission(double mu, std::size_t n_max) const {
        return arriving(mu, 1.0, n_max);
    }

    // Photon number reaching the relay through combined transmittance eta.
    PhotonNumberDistribution arriving(double mu, double eta, std::size_t k_max) const {
        if (kind_ == SourceKind::wcp) return poisson_pnd(eta * mu, k_max, 1.0);
        return heralded_pnd_after_channel(modal(mu), local_, eta, k_max, 1.0).total;
    }

private:
    SourceKind kind_ = SourceKind::wcp;
    std::vector<double> weights_;
    LocalDetector local_{};
    bool decomposed_ = false;
};

// V = (sum_i sqrt(w_A,i w_B,i))^2 on the shared mode basis. Identical sources
// give 1; for WCP against SPDC the WCP weights are |c_i|^2 and its complement
// contributes nothing.
inline double source_visibility(const SourceModel& a, const SourceModel& b) {
    if (a.kind() == b.kind() && !a.decomposed() && !b.decomposed()) return 1.0;
    const auto& wa = a.weights();
    const auto& wb = b.weights();
    if (wa.size() != wb.size())
        throw DomainError("source_visibility: sources are not expressed on the same mode basis");
    double s = 0.0;
    for (std::size_t i = 0; i < wa.size(); ++i) s += std::sqrt(std::max(wa[i], 0.0) * std::max(wb[i], 0.0));
    return std::min(s * s, 1.0);
}

struct ChannelParams {
    double distance_a_km = 0.0;
    double distance_b_km = 0.0;
    double attenuation_db_per_km = 0.2;
    RelayDetector relay{};
    double misalignment = 0.015;

    void validate() const {
        if (!(distance_a_km >= 0.0 && distance_b_km >= 0.0)) throw DomainError("ChannelParams: negative distance");
        if (!(attenuation_db_per_km >= 0.0)) throw DomainError("ChannelParams: negative attenuation");
        if (!(misalignment >= 0.0 && misalignment <= 0.5)) throw DomainError("ChannelParams: e_d outside [0,0.5]");
        relay.validate();
    }
    double eta_channel_a() const { return units::db_to_transmittance(attenuation_db_per_km * distance_a_km); }
    double eta_channel_b() const { return units::db_to_transmittance(attenuation_db_per_km * distance_b_km); }
    // Combined transmittance entering the photon statistics.
    double eta_a() const { return eta_channel_a() * relay.efficiency; }
    double eta_b() const { return eta_channel_b() * relay.efficiency; }

    static ChannelParams symmetric(double total_km, ChannelParams base) {
        base.distance_a_km = base.distance_b_km = total_km / 2.0;
        return base;
    }
};

struct PartyParams {
    double nu = 0.0;
    double mu = 0.0;
    double pz_nu = 0.0;
    double pz_mu = 0.0;
    double px_nu = 0.0;
    double px_mu = 0.0;

    double p_vacuum() const { return std::max(0.0, 1.0 - (pz_nu + pz_mu + px_nu + px_mu)); }
    double intensity(Intensity i) const {
        return i == Intensity::signal ? mu : i == Intensity::decoy ? nu : 0.0;
    }
    double probability(Basis b, Intensity i) const {
        if (i == Intensity::vacuum) return p_vacuum();
        if (b == Basis::z) return i == Intensity::signal ? pz_mu : pz_nu;
        return i == Intensity::signal ? px_mu : px_nu;
    }
    bool feasible(double tol = 1e-12) const {
        const double probs[] = {pz_nu, pz_mu, px_nu, px_mu};
        for (double p : probs)
            if (!(p >= -tol && p <= 1.0 + tol)) return false;
        return nu >= 0.0 && mu >= 0.0 && nu <= mu && pz_nu + pz_mu + px_nu + px_mu <= 1.0 + tol;
    }
};

struct ProtocolParams {
    PartyParams a;
    PartyParams b;

    // Order used by the optimizer and by Table-style exports:
    // nu, mu, pz_nu, pz_mu, px_nu, px_mu for A then B.
    std::array<double, 12> to_array() const {
        return {a.nu, a.mu, a.pz_nu, a.pz_mu, a.px_nu, a.px_mu, b.nu, b.mu, b.pz_nu, b.pz_mu, b.px_nu, b.px_mu};
    }
    static ProtocolParams from_array(const std::array<double, 12>& v) {
        return {{v[0], v[1], v[2], v[3], v[4], v[5]}, {v[6], v[7], v[8], v[9], v[10], v[11]}};
    }
};

struct ExperimentScale {
    double n_total = 1e12;
    bool asymptotic = false;

    void validate() const {
        if (!(n_total >= 1.0)) throw DomainError("ExperimentScale: N_tot must be at least 1");
    }
};

struct KeyRateResult {
    double rate = 0.0;
    double raw_rate = 0.0;
    double q_z_mumu = 0.0;
    double e_z_mumu = 0.0;
    double y11_lower = 0.0;
    double e11_upper = 0.0;
    double h_e11 = 0.0;
    double h_e = 0.0;
    double p1_a = 0.0;
    double p1_b = 0.0;
    bool infeasible = false;
    std::string diagnostic;
};

inline double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("binary_entropy: argument outside [0,1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

// R = p^Z_muA p^Z_muB { P_muA(1) P_muB(1) Y11 [1 - H(e11)] - Q f H(E) }, clamped at 0.
inline KeyRateResult key_rate(const DecoyObservations& obs, const YieldBounds& bounds, const ProtocolParams& params,
                              double p1_a, double p1_b) {
    KeyRateResult r;
    const auto& cell = obs.at(Basis::z, Intensity::signal, Intensity::signal);
    r.q_z_mumu = cell.gain;
    r.e_z_mumu = cell.error_rate;
    r.y11_lower = bounds.y11_lower;
    r.e11_upper = bounds.e11_upper;
    r.p1_a = p1_a;
    r.p1_b = p1_b;
    r.h_e = binary_entropy(std::min(r.e_z_mumu, 1.0));
    if (r.e11_upper > 0.5) {
        r.h_e11 = 1.0;
        r.raw_rate = -params.a.pz_mu * params.b.pz_mu * r.q_z_mumu * error_correction_efficiency * r.h_e;
        r.rate = 0.0;
        r.diagnostic = "single-pair phase error bound exceeds 1/2";
        return r;
    }
    r.h_e11 = binary_entropy(r.e11_upper);
    r.raw_rate = params.a.pz_mu * params.b.pz_mu *
                 (p1_a * p1_b * r.y11_lower * (1.0 - r.h_e11) - r.q_z_mumu * error_correction_efficiency * r.h_e);
    r.rate = std::max(r.raw_rate, 0.0);
    if (bounds.e11_degenerate) r.diagnostic = "single-pair yield bound vanished";
    return r;
}

// Forward model shared by all evaluations for one pair of sources and one
// relay: the detection tables do not depend on distance or intensities.
class LinkModel {
public:
    LinkModel(SourceModel a, SourceModel b, RelayDetector relay, double misalignment)
        : a_(std::move(a)), b_(std::move(b)), relay_(relay), misalignment_(misalignment) {
        relay_.validate();
        visibility_ = source_visibility(a_, b_);
        model_ = std::make_shared<RelayModel>(
            RelayModelParams{relay_.dark_count, misalignment_, visibility_, relay_photon_cutoff});
    }

    const SourceModel& source_a() const { return a_; }
    const SourceModel& source_b() const { return b_; }
    const RelayModel& relay_model() const { return *model_; }
    double visibility() const { return visibility_; }

    void check_channel(const ChannelParams& chan) const {
        chan.validate();
        if (chan.relay.dark_count != relay_.dark_count || chan.misalignment != misalignment_)
            throw DomainError("LinkModel: channel relay settings differ from the model's");
    }

    DecoyObservations simulate(const ChannelParams& chan, const ProtocolParams& params,
                               const ExperimentScale& scale) const {
        check_channel(chan);
        scale.validate();
        std::array<PhotonNumberDistribution, 3> fa, fb;
        for (Intensity i : all_intensities) {
            const auto k = static_cast<std::size_t>(i);
            fa[k] = a_.arriving(params.a.intensity(i), chan.eta_a(), relay_photon_cutoff);
            fb[k] = b_.arriving(params.b.intensity(i), chan.eta_b(), relay_photon_cutoff);
        }
        return assemble(fa, fb, params, scale);
    }

    // Test hook: replace the relay by planted tables indexed by arriving photons.
    DecoyObservations assemble(const std::array<PhotonNumberDistribution, 3>& fa,
                               const std::array<PhotonNumberDistribution, 3>& fb, const ProtocolParams& params,
                               const ExperimentScale& scale) const {
        return assemble_with(fa, fb, params, scale, model_->valid(true), model_->error(true), model_->valid(false),
                             model_->error(false));
    }

    static DecoyObservations assemble_with(const std::array<PhotonNumberDistribution, 3>& fa,
                                           const std::array<PhotonNumberDistribution, 3>& fb,
                                           const ProtocolParams& params, const ExperimentScale& scale,
                                           const DetectionTable& dz, const DetectionTable& ez,
                                           const DetectionTable& dx, const DetectionTable& ex) {
        DecoyObservations obs;
        for (Basis basis : all_bases) {
            const bool z = basis == Basis::z;
            const DetectionTable& dv = z ? dz : dx;
            const DetectionTable& de = z ? ez : ex;
            const std::size_t n = dv.size();
            for (Intensity ia : all_intensities)
                for (Intensity ib : all_intensities) {
                    const auto& pa = fa[static_cast<std::size_t>(ia)];
                    const auto& pb = fb[static_cast<std::size_t>(ib)];
                    double q = 0.0, eq = 0.0;
                    for (std::size_t k = 0; k < n && k < pa.probs.size(); ++k) {
                        if (pa.probs[k] == 0.0) continue;
                        double rq = 0.0, re = 0.0;
                        for (std::size_t l = 0; l < n && l < pb.probs.size(); ++l) {
                            rq += pb.probs[l] * dv(k, l);
                            re += pb.probs[l] * de(k, l);
                        }
                        q += pa.probs[k] * rq;
                        eq += pa.probs[k] * re;
                    }
                    auto& cell = obs.at(basis, ia, ib);
                    cell.pulses = scale.n_total * params.a.probability(basis, ia) * params.b.probability(basis, ib);
                    cell.gain = q;
                    cell.error_rate = q > 0.0 ? std::min(eq / q, 1.0) : 0.0;
                }
        }
        return obs;
    }

    // Single-pair yield (Z) and phase error (X) of the model itself.
    double true_y11(const ChannelParams& chan) const { return model_->yield(true, 1, 1, chan.eta_a(), chan.eta_b()); }
    double true_e11_x(const ChannelParams& chan) const {
        const double y = model_->yield(false, 1, 1, chan.eta_a(), chan.eta_b());
        return y > 0.0 ? model_->error_yield(false, 1, 1, chan.eta_a(), chan.eta_b()) / y : 0.5;
    }

    KeyRateResult rate_at(const ChannelParams& chan, const ProtocolParams& params, const ExperimentScale& scale,
                          const DecoyOptions& decoy = {}) const {
        KeyRateResult bad;
        if (!params.a.feasible() || !params.b.feasible()) {
            bad.diagnostic = "protocol parameters infeasible";
            return bad;
        }
        if (params.a.mu <= 0.0 || params.b.mu <= 0.0 || params.a.pz_mu <= 0.0 || params.b.pz_mu <= 0.0) {
            bad.diagnostic = "no signal pulses in the Z basis";
            return bad;
        }
        const auto obs = simulate(chan, params, scale);
        std::array<PhotonNumberDistribution, 3> ea, eb;
        for (Intensity i : all_intensities) {
            const auto k = static_cast<std::size_t>(i);
            ea[k] = a_.emission(params.a.intensity(i), relay_photon_cutoff);
            eb[k] = b_.emission(params.b.intensity(i), relay_photon_cutoff);
        }
        const double p1a = ea[0][1], p1b = eb[0][1];

        YieldBounds bounds;
        if (scale.asymptotic) {
            bounds.y11_lower = bounds.y11_x_lower = true_y11(chan);
            bounds.e11_upper = true_e11_x(chan);
        } else {
            DecoyOptions opt = decoy;
            opt.finite = true;
            const auto mix_a = PhotonMixture::from(ea, opt.n_max);
            const auto mix_b = PhotonMixture::from(eb, opt.n_max);
            try {
                bounds = lp_yield_bounds(obs, mix_a, mix_b, opt);
            } catch (const InfeasibleError& e) {
                bad.infeasible = true;
                bad.diagnostic = e.what();
                return bad;
            } catch (const UnboundedError& e) {
                bad.infeasible = true;
                bad.diagnostic = e.what();
                return bad;
            }
        }
        return key_rate(obs, bounds, params, p1a, p1b);
    }

private:
    SourceModel a_, b_;
    RelayDetector relay_;
    double misalignment_;
    double visibility_ = 1.0;
    std::shared_ptr<const RelayModel> model_;
};

// Free-function forms of the pipeline stages.
inline DecoyObservations simulate_observables(const SourceModel& a, const SourceModel& b, const ChannelParams& chan,
                                              const ProtocolParams& params, const ExperimentScale& scale) {
    return LinkModel(a, b, chan.relay, chan.misalignment).simulate(chan, params, scale);
}

inline KeyRateResult rate_at(const SourceModel& a, const SourceModel& b, const ChannelParams& chan,
                             const ProtocolParams& params, const ExperimentScale& scale,
                             const DecoyOptions& decoy = {}) {
    return LinkModel(a, b, chan.relay, chan.misalignment).rate_at(chan, params, scale, decoy);
}

}  // namespace mdiqkd
