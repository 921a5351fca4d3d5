#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mdiqkd/error.hpp"

namespace mdiqkd {

using cdouble = std::complex<double>;

// Uniform sampling of an angular-frequency axis, symmetric about `center`.
class FrequencyGrid {
public:
    FrequencyGrid(double center, double span, std::size_t points)
        : center_(center), span_(span), points_(points) {
        if (points < 2) throw DomainError("FrequencyGrid: need at least 2 points");
        if (!(span > 0.0) || !std::isfinite(span)) throw DomainError("FrequencyGrid: span must be positive");
        step_ = 2.0 * span / static_cast<double>(points - 1);
    }

    double center() const { return center_; }
    double span() const { return span_; }
    std::size_t size() const { return points_; }
    double step() const { return step_; }
    double lower() const { return center_ - span_; }
    double upper() const { return center_ + span_; }

    // Computed symmetrically so that sample(i) + sample(n-1-i) == 2*center.
    double operator[](std::size_t i) const {
        const double offset = (static_cast<double>(i) - 0.5 * static_cast<double>(points_ - 1)) * step_;
        return center_ + offset;
    }

    bool covers(double lo, double hi) const { return lower() <= lo && upper() >= hi; }

    bool same_as(const FrequencyGrid& other, double rel_tol = 1e-12) const {
        const double scale = std::max({std::abs(center_), span_, 1.0});
        return points_ == other.points_ && std::abs(center_ - other.center_) <= rel_tol * scale &&
               std::abs(span_ - other.span_) <= rel_tol * scale;
    }

private:
    double center_;
    double span_;
    std::size_t points_;
    double step_;
};

// Probability-amplitude density sampled on a FrequencyGrid.
struct SpectralAmplitude {
    FrequencyGrid grid;
    std::vector<cdouble> values;

    SpectralAmplitude(FrequencyGrid g, std::vector<cdouble> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) throw DomainError("SpectralAmplitude: value count differs from grid size");
    }

    double norm_squared() const {
        double acc = 0.0;
        for (const auto& v : values) acc += std::norm(v);
        return acc * grid.step();
    }

    SpectralAmplitude normalized() const {
        const double n2 = norm_squared();
        if (!(n2 > 0.0)) throw NumericError("SpectralAmplitude: cannot normalize a zero amplitude");
        SpectralAmplitude out = *this;
        const double s = 1.0 / std::sqrt(n2);
        for (auto& v : out.values) v *= s;
        return out;
    }

    // Linear interpolation; zero outside the grid.
    cdouble at(double omega) const {
        const double x = (omega - grid.lower()) / grid.step();
        if (x < -1e-9 || x > static_cast<double>(grid.size() - 1) + 1e-9) return {0.0, 0.0};
        const double xr = std::round(x);
        if (std::abs(x - xr) < 1e-9) return values[static_cast<std::size_t>(xr)];
        const auto i = static_cast<std::size_t>(std::floor(x));
        if (i + 1 >= values.size()) return values.back();
        const double t = x - static_cast<double>(i);
        return (1.0 - t) * values[i] + t * values[i + 1];
    }
};

// Super-Gaussian bandpass F_n(w) = exp[-2^(2n-1) ln2 ((w-w0)/w_fwhm)^(2n)].
// The width is the full width at half *power*: |F_n(w0 +- w_fwhm/2)|^2 = 1/2.
struct FilterSpec {
    int order = 1;
    double center = 0.0;
    double fwhm = 1.0;

    double transmission(double omega) const {
        if (order < 1) throw DomainError("FilterSpec: order must be >= 1");
        if (!(fwhm > 0.0)) throw DomainError("FilterSpec: fwhm must be positive");
        const double x = (omega - center) / fwhm;
        const double exponent = std::ldexp(1.0, 2 * order - 1) * std::numbers::ln2 * std::pow(x * x, order);
        return std::exp(-exponent);
    }
};

struct MatchedPhase {};

// Phi = sinc(dk L / 2) exp(i dk L / 2) for a uniformly poled crystal.
struct SincPhase {
    double crystal_length = 0.0;                      // m
    std::function<double(double, double)> mismatch;   // dk(w_s, w_i) in rad/m
};

using PhaseMatching = std::variant<MatchedPhase, SincPhase>;

inline cdouble phase_matching_value(const PhaseMatching& pm, double ws, double wi) {
    if (std::holds_alternative<MatchedPhase>(pm)) return {1.0, 0.0};
    const auto& s = std::get<SincPhase>(pm);
    if (!s.mismatch) throw DomainError("SincPhase: mismatch function not set");
    const double half = 0.5 * s.mismatch(ws, wi) * s.crystal_length;
    const double sinc = std::abs(half) < 1e-8 ? 1.0 - half * half / 6.0 : std::sin(half) / half;
    return sinc * std::polar(1.0, half);
}

struct JointSpectralAmplitude {
    FrequencyGrid signal_grid;
    FrequencyGrid idler_grid;
    Eigen::MatrixXcd values;  // rows: signal samples, cols: idler samples
    PhaseMatching phase_matching;

    double norm_squared() const {
        return values.squaredNorm() * signal_grid.step() * idler_grid.step();
    }
};

struct SchmidtDecomposition {
    std::vector<double> lambdas;                  // descending
    std::vector<SpectralAmplitude> signal_modes;  // psi_n(w_s)
    std::vector<SpectralAmplitude> idler_modes;   // phi_n(w_i)
    double residual = 0.0;                        // discarded eigenvalue mass
    std::vector<double> all_lambdas;              // full spectrum before truncation

    std::size_t cutoff() const { return lambdas.size(); }
};

struct OverlapVector {
    std::vector<cdouble> coefficients;
    double residual_norm = 1.0;  // 1 - sum |c_i|^2

    std::vector<double> proportions() const {
        double total = 0.0;
        for (const auto& c : coefficients) total += std::norm(c);
        std::vector<double> out;
        out.reserve(coefficients.size());
        for (const auto& c : coefficients) out.push_back(total > 0.0 ? std::norm(c) / total : 0.0);
        return out;
    }
};

// Normalized Gaussian amplitude pi^(-1/4) sigma^(-1/2) exp[-(w-mean)^2/(2 sigma^2)].
inline SpectralAmplitude gaussian_pump(double mean, double sigma, const FrequencyGrid& grid) {
    if (!(sigma > 0.0)) throw DomainError("gaussian_pump: sigma must be positive");
    if (!grid.covers(mean - 5.0 * sigma, mean + 5.0 * sigma))
        throw GridError("gaussian_pump: grid does not cover mean +- 5 sigma");
    const double prefactor = 1.0 / (std::pow(std::numbers::pi, 0.25) * std::sqrt(sigma));
    std::vector<cdouble> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = (grid[i] - mean) / sigma;
        v[i] = prefactor * std::exp(-0.5 * d * d);
    }
    return SpectralAmplitude(grid, std::move(v)).normalized();
}

inline SpectralAmplitude apply_filter(const SpectralAmplitude& amp, const FilterSpec& filter) {
    SpectralAmplitude out = amp;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] *= filter.transmission(out.grid[i]);
    if (out.norm_squared() < 1e-15) throw NumericError("apply_filter: filter and amplitude are disjoint");
    return out.normalized();
}

// Grid on the pump (sum-frequency) axis whose samples coincide with every
// w_s + w_i of the two marginal grids. Requires equal marginal steps.
inline FrequencyGrid sum_frequency_grid(const FrequencyGrid& signal, const FrequencyGrid& idler) {
    if (std::abs(signal.step() - idler.step()) > 1e-12 * signal.step())
        throw GridError("sum_frequency_grid: signal and idler grids need equal steps");
    const std::size_t n = signal.size() + idler.size() - 1;
    return FrequencyGrid(signal.center() + idler.center(), signal.span() + idler.span(), n);
}

// f(w_s, w_i) = alpha(w_s + w_i) Phi(w_s, w_i) F_s(w_s) F_i(w_i), normalized.
inline JointSpectralAmplitude build_jsa(const SpectralAmplitude& pump, const FrequencyGrid& signal_grid,
                                        const FrequencyGrid& idler_grid, const std::optional<FilterSpec>& filter_s,
                                        const std::optional<FilterSpec>& filter_i, const PhaseMatching& pm) {
    const double lo = signal_grid.lower() + idler_grid.lower();
    const double hi = signal_grid.upper() + idler_grid.upper();
    const double tol = 1e-9 * pump.grid.step();
    if (pump.grid.lower() > lo + tol || pump.grid.upper() < hi - tol)
        throw GridError("build_jsa: pump grid does not cover the sum-frequency range");

    const auto ns = static_cast<Eigen::Index>(signal_grid.size());
    const auto ni = static_cast<Eigen::Index>(idler_grid.size());
    std::vector<double> fs(signal_grid.size(), 1.0), fi(idler_grid.size(), 1.0);
    if (filter_s)
        for (std::size_t j = 0; j < fs.size(); ++j) fs[j] = filter_s->transmission(signal_grid[j]);
    if (filter_i)
        for (std::size_t k = 0; k < fi.size(); ++k) fi[k] = filter_i->transmission(idler_grid[k]);

    Eigen::MatrixXcd f(ns, ni);
    for (Eigen::Index j = 0; j < ns; ++j) {
        const double ws = signal_grid[static_cast<std::size_t>(j)];
        for (Eigen::Index k = 0; k < ni; ++k) {
            const double wi = idler_grid[static_cast<std::size_t>(k)];
            f(j, k) = pump.at(ws + wi) * phase_matching_value(pm, ws, wi) * fs[static_cast<std::size_t>(j)] *
                      fi[static_cast<std::size_t>(k)];
        }
    }
    JointSpectralAmplitude jsa{signal_grid, idler_grid, std::move(f), pm};
    const double n2 = jsa.norm_squared();
    if (!(n2 >= 1e-15)) throw NumericError("build_jsa: joint amplitude has no mass");
    jsa.values /= std::sqrt(n2);
    return jsa;
}

namespace detail {

// Index of the largest-magnitude sample; ties within 1e-9 relative go to the
// lowest index so that odd modes get a deterministic phase.
template <class Vec>
Eigen::Index peak_index(const Vec& v) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) best = std::max(best, std::abs(v(i)));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) >= best * (1.0 - 1e-9)) return i;
    return 0;
}

}  // namespace detail

// Default number of retained modes: six, or fewer once the cumulative weight
// reaches 1 - 1e-6.
inline std::size_t default_schmidt_cutoff(std::span<const double> lambdas) {
    double cumulative = 0.0;
    for (std::size_t n = 0; n < lambdas.size(); ++n) {
        cumulative += lambdas[n];
        if (n + 1 >= 6 || cumulative >= 1.0 - 1e-6) return n + 1;
    }
    return lambdas.size();
}

// SVD of the quadrature-weighted sample matrix f * sqrt(step_s step_i).
// lambda_n are squared singular values; psi_n = u_n / sqrt(step_s) and
// phi_n = conj(v_n) / sqrt(step_i), so f = sum sqrt(lambda_n) psi_n phi_n.
// A cutoff of 0 selects default_schmidt_cutoff.
inline SchmidtDecomposition schmidt_decompose(const JointSpectralAmplitude& jsa, std::size_t cutoff = 0) {
    const double hs = jsa.signal_grid.step();
    const double hi = jsa.idler_grid.step();
    const std::size_t rank_max = std::min(jsa.signal_grid.size(), jsa.idler_grid.size());
    if (cutoff > rank_max) throw DomainError("schmidt_decompose: cutoff exceeds grid size");

    const double w = std::sqrt(hs * hi);
    Eigen::MatrixXcd u, v;
    Eigen::VectorXd sv;
    if (jsa.values.imag().cwiseAbs().maxCoeff() == 0.0) {
        // Real JSA (matched phase, real pump): the real SVD is several times faster.
        Eigen::MatrixXd m = jsa.values.real() * w;
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw NumericError("schmidt_decompose: SVD did not converge");
        u = svd.matrixU().cast<cdouble>();
        v = svd.matrixV().cast<cdouble>();
        sv = svd.singularValues();
    } else {
        Eigen::MatrixXcd m = jsa.values * w;
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success) throw NumericError("schmidt_decompose: SVD did not converge");
        u = svd.matrixU();
        v = svd.matrixV();
        sv = svd.singularValues();
    }
    if (!sv.allFinite()) throw NumericError("schmidt_decompose: non-finite singular values");

    SchmidtDecomposition out;
    out.all_lambdas.resize(static_cast<std::size_t>(sv.size()));
    for (Eigen::Index n = 0; n < sv.size(); ++n) out.all_lambdas[static_cast<std::size_t>(n)] = sv(n) * sv(n);
    if (cutoff == 0) cutoff = default_schmidt_cutoff(out.all_lambdas);

    double kept = 0.0;
    const double total = std::accumulate(out.all_lambdas.begin(), out.all_lambdas.end(), 0.0);
    for (std::size_t n = 0; n < cutoff; ++n) {
        const auto col = static_cast<Eigen::Index>(n);
        Eigen::VectorXcd psi = u.col(col) / std::sqrt(hs);
        Eigen::VectorXcd phi = v.col(col).conjugate() / std::sqrt(hi);
        const Eigen::Index p = detail::peak_index(psi);
        const cdouble phase = std::polar(1.0, -std::arg(psi(p)));
        psi *= phase;
        phi /= phase;
        out.lambdas.push_back(out.all_lambdas[n]);
        kept += out.all_lambdas[n];
        out.signal_modes.emplace_back(jsa.signal_grid, std::vector<cdouble>(psi.data(), psi.data() + psi.size()));
        out.idler_modes.emplace_back(jsa.idler_grid, std::vector<cdouble>(phi.data(), phi.data() + phi.size()));
    }
    out.residual = total - kept;
    return out;
}

// c_i = integral conj(psi_i(w)) alpha(w) dw on the shared grid.
inline OverlapVector overlap_coefficients(const SpectralAmplitude& wcp, std::span<const SpectralAmplitude> modes) {
    OverlapVector out;
    double captured = 0.0;
    for (const auto& mode : modes) {
        if (!mode.grid.same_as(wcp.grid)) throw GridError("overlap_coefficients: grid mismatch");
        cdouble acc{0.0, 0.0};
        for (std::size_t k = 0; k < wcp.values.size(); ++k) acc += std::conj(mode.values[k]) * wcp.values[k];
        acc *= wcp.grid.step();
        captured += std::norm(acc);
        out.coefficients.push_back(acc);
    }
    out.residual_norm = 1.0 - captured;
    return out;
}

// Closed-form overlap of two normalized Gaussian amplitudes centred at w1 and
// w1 + dw with widths sigma1, sigma2, the second delayed by tau:
//   c = integral conj(psi) phi e^{i w tau} dw.
// The magnitude carries the normalization factor sqrt(2 s1 s2 / (s1^2 + s2^2)),
// which is 1 for equal widths.
inline cdouble gaussian_overlap(double sigma1, double sigma2, double delta_omega, double tau, double omega1 = 0.0) {
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw DomainError("gaussian_overlap: widths must be positive");
    const double s1 = sigma1 * sigma1;
    const double s2 = sigma2 * sigma2;
    const double sum = s1 + s2;
    const double omega2 = omega1 + delta_omega;
    const double magnitude =
        std::sqrt(2.0 * sigma1 * sigma2 / sum) * std::exp(-(delta_omega * delta_omega + s1 * s2 * tau * tau) / (2.0 * sum));
    const double phase = (s2 * omega1 + s1 * omega2) * tau / sum;
    return std::polar(magnitude, phase);
}

inline double purity(std::span<const double> lambdas) {
    double p = 0.0;
    for (double l : lambdas) p += l * l;
    return p;
}

}  // namespace mdiqkd
