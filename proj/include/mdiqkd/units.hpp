#pragma once

#include <cmath>
#include <numbers>

// Internal units are rad/s for frequency and seconds for time. These helpers
// convert the units accepted on the configuration surface.
namespace mdiqkd::units {

inline constexpr double speed_of_light = 299792458.0;  // m/s
inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double ghz_to_rad_per_s(double ghz) { return two_pi * ghz * 1e9; }
constexpr double ps_to_s(double ps) { return ps * 1e-12; }
constexpr double nm_to_m(double nm) { return nm * 1e-9; }

// Angular carrier frequency of a vacuum wavelength.
constexpr double wavelength_nm_to_rad_per_s(double nm) {
    return two_pi * speed_of_light / nm_to_m(nm);
}

// Spectral width parameter of a Gaussian pulse exp(-t^2/(2 sigma_t^2)); the
// Fourier pair is exp(-w^2/(2 sigma_w^2)) with sigma_w = 1/sigma_t.
constexpr double gaussian_sigma_t_to_sigma_w(double sigma_t_s) { return 1.0 / sigma_t_s; }

inline double db_to_transmittance(double db) { return std::pow(10.0, -db / 10.0); }

}  // namespace mdiqkd::units
