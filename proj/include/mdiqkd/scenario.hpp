#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/spectra.hpp"
#include "mdiqkd/units.hpp"

// Spectral set-up of the two source types and construction of the
// corresponding SourceModel pairs. The WCP is the pump laser's fundamental
// after its own filter; the SPDC source is pumped by the second harmonic.
namespace mdiqkd {

struct SpdcSpectralConfig {
    double pump_wavelength_nm = 532.0;
    double pump_sigma_ps = 5.0;
    int filter_order = 1;
    double filter_fwhm_ghz = 600.0;
    std::size_t grid_points = 512;
    double span_factor = 6.0;
    // Modes kept for photon statistics and interference weights. 0 keeps every
    // mode until the cumulative weight reaches 1 - mode_tolerance.
    std::size_t modes = 0;
    double mode_tolerance = 1e-9;
    std::size_t max_modes = 64;
    std::optional<double> crystal_length_m;  // sinc phase matching if set
    double mismatch_per_rad_s = 0.0;          // d(dk)/d(ws - wi), rad/m per rad/s

    double pump_center() const { return units::wavelength_nm_to_rad_per_s(pump_wavelength_nm); }
    double pump_sigma() const { return units::gaussian_sigma_t_to_sigma_w(units::ps_to_s(pump_sigma_ps)); }
    FilterSpec filter() const {
        return {filter_order, pump_center() / 2.0, units::ghz_to_rad_per_s(filter_fwhm_ghz)};
    }
};

struct WcpSpectralConfig {
    double wavelength_nm = 1064.0;
    double sigma_ps = 5.0;
    int filter_order = 1;
    double filter_fwhm_ghz = 600.0;

    double center() const { return units::wavelength_nm_to_rad_per_s(wavelength_nm); }
    double sigma() const { return units::gaussian_sigma_t_to_sigma_w(units::ps_to_s(sigma_ps)); }
    FilterSpec filter() const { return {filter_order, center(), units::ghz_to_rad_per_s(filter_fwhm_ghz)}; }
};

// Amplitude width of a super-Gaussian filter, measured where |F| = e^{-1/2}.
inline double filter_scale(const FilterSpec& f) {
    return f.fwhm * std::pow(1.0 / (std::pow(2.0, 2 * f.order) * std::log(2.0)), 1.0 / (2.0 * f.order));
}

struct SpdcSpectrum {
    FrequencyGrid grid;  // shared by signal and idler
    JointSpectralAmplitude jsa;
    SchmidtDecomposition schmidt;
};

inline SpdcSpectrum build_spdc_spectrum(const SpdcSpectralConfig& cfg, std::size_t cutoff = 0) {
    if (cfg.grid_points < 16) throw DomainError("spdc spectrum: grid needs at least 16 points");
    const double wp = cfg.pump_center();
    const double sp = cfg.pump_sigma();
    const FilterSpec filt = cfg.filter();
    // Marginal extent is set by whichever of filter and pump is wider.
    const double scale = std::max(filter_scale(filt), sp);
    const FrequencyGrid grid(wp / 2.0, cfg.span_factor * scale, cfg.grid_points);
    const auto pump_grid = sum_frequency_grid(grid, grid);
    const auto pump = gaussian_pump(wp, sp, pump_grid);
    PhaseMatching pm = MatchedPhase{};
    if (cfg.crystal_length_m) {
        const double k = cfg.mismatch_per_rad_s;
        const double w0 = wp / 2.0;
        pm = SincPhase{*cfg.crystal_length_m, [k, w0](double ws, double wi) { return k * ((ws - w0) - (wi - w0)); }};
    }
    auto jsa = build_jsa(pump, grid, grid, filt, filt, pm);
    std::size_t n = cutoff;
    if (n == 0 && cfg.modes > 0) n = cfg.modes;
    SchmidtDecomposition sd;
    if (n == 0) {
        // Keep modes until the weight tolerance is met.
        auto full = schmidt_decompose(jsa, std::min(cfg.max_modes, grid.size()));
        double cum = 0.0;
        std::size_t keep = 0;
        while (keep < full.all_lambdas.size() && keep < cfg.max_modes && cum < 1.0 - cfg.mode_tolerance)
            cum += full.all_lambdas[keep++];
        full.lambdas.resize(keep);
        full.signal_modes.erase(full.signal_modes.begin() + static_cast<std::ptrdiff_t>(keep), full.signal_modes.end());
        full.idler_modes.erase(full.idler_modes.begin() + static_cast<std::ptrdiff_t>(keep), full.idler_modes.end());
        double total = 0.0;
        for (double l : full.all_lambdas) total += l;
        full.residual = total - cum;
        sd = std::move(full);
    } else {
        sd = schmidt_decompose(jsa, n);
    }
    return {grid, std::move(jsa), std::move(sd)};
}

inline SpectralAmplitude build_wcp_amplitude(const WcpSpectralConfig& cfg, const FrequencyGrid& grid) {
    return apply_filter(gaussian_pump(cfg.center(), cfg.sigma(), grid), cfg.filter());
}

enum class Scenario { ww, ss, ws };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::ww: return "ww";
        case Scenario::ss: return "ss";
        case Scenario::ws: return "ws";
    }
    return "?";
}

inline Scenario parse_scenario(const std::string& s) {
    if (s == "ww" || s == "WW") return Scenario::ww;
    if (s == "ss" || s == "SS") return Scenario::ss;
    if (s == "ws" || s == "WS") return Scenario::ws;
    throw ConfigError("unknown scenario '" + s + "' (expected ww, ss or ws)");
}

struct SourcePair {
    SourceModel a;
    SourceModel b;
};

// Party A holds the SPDC source in the asymmetric scenario.
inline SourcePair make_sources(Scenario sc, const SpdcSpectrum& spdc, const SpectralAmplitude& wcp,
                               const LocalDetector& local) {
    auto spdc_model = SourceModel::spdc(spdc.schmidt.lambdas, local);
    switch (sc) {
        case Scenario::ww: return {SourceModel::wcp(), SourceModel::wcp()};
        case Scenario::ss: return {spdc_model, spdc_model};
        case Scenario::ws: {
            const auto ov = overlap_coefficients(wcp, spdc.schmidt.signal_modes);
            return {spdc_model, SourceModel::wcp_decomposed(ov)};
        }
    }
    throw DomainError("make_sources: unknown scenario");
}

}  // namespace mdiqkd
