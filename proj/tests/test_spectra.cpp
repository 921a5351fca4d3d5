#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "mdiqkd/scenario.hpp"
#include "mdiqkd/spectra.hpp"
#include "mdiqkd/units.hpp"

using namespace mdiqkd;

namespace {

constexpr double pi = std::numbers::pi;

JointSpectralAmplitude from_matrix(const FrequencyGrid& gs, const FrequencyGrid& gi, Eigen::MatrixXcd m) {
    JointSpectralAmplitude j{gs, gi, std::move(m), MatchedPhase{}};
    j.values /= std::sqrt(j.norm_squared());
    return j;
}

// Weighted Frobenius distance between the JSA and its truncated expansion.
double reconstruction_error(const JointSpectralAmplitude& jsa, const SchmidtDecomposition& sd) {
    Eigen::MatrixXcd rec = Eigen::MatrixXcd::Zero(jsa.values.rows(), jsa.values.cols());
    for (std::size_t n = 0; n < sd.cutoff(); ++n)
        for (Eigen::Index r = 0; r < rec.rows(); ++r)
            for (Eigen::Index c = 0; c < rec.cols(); ++c)
                rec(r, c) += std::sqrt(sd.lambdas[n]) * sd.signal_modes[n].values[r] * sd.idler_modes[n].values[c];
    return std::sqrt((jsa.values - rec).squaredNorm() * jsa.signal_grid.step() * jsa.idler_grid.step());
}

}  // namespace

TEST(Units, Conversions) {
    EXPECT_DOUBLE_EQ(units::ghz_to_rad_per_s(1.0), 2.0 * pi * 1e9);
    EXPECT_DOUBLE_EQ(units::ps_to_s(5.0), 5e-12);
    EXPECT_NEAR(units::wavelength_nm_to_rad_per_s(1064.0), 2.0 * pi * 299792458.0 / 1064e-9, 1.0);
    EXPECT_NEAR(units::db_to_transmittance(10.0), 0.1, 1e-15);
    EXPECT_DOUBLE_EQ(units::gaussian_sigma_t_to_sigma_w(4e-12), 0.25e12);
}

TEST(Spectra, PumpIsNormalized) {
    const FrequencyGrid g(0.0, 12.0, 801);
    const auto p = gaussian_pump(0.5, 1.3, g);
    EXPECT_NEAR(p.norm_squared(), 1.0, 1e-12);
}

// Time-domain envelope by direct summation: |psi(t)|^2 / |psi(0)|^2 = exp(-sigma^2 t^2).
TEST(Spectra, PumpTemporalWidthByDirectTransform) {
    const double sigma_t = 5e-12;
    const double sw = units::gaussian_sigma_t_to_sigma_w(sigma_t);
    const FrequencyGrid g(0.0, 10.0 * sw, 1001);
    const auto p = gaussian_pump(0.0, sw, g);
    auto envelope = [&](double t) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < g.size(); ++i) acc += p.values[i] * std::polar(1.0, -g[i] * t);
        return std::norm(acc * g.step());
    };
    const double e0 = envelope(0.0);
    for (double t : {0.5 * sigma_t, sigma_t, 2.0 * sigma_t})
        EXPECT_NEAR(envelope(t) / e0, std::exp(-t * t / (sigma_t * sigma_t)), 1e-10) << t;
}

TEST(Spectra, FilterHalfPowerAtHalfWidth) {
    for (int order : {1, 2, 3}) {
        const FilterSpec f{order, 10.0, 3.0};
        EXPECT_NEAR(std::pow(f.transmission(11.5), 2), 0.5, 1e-14);
        EXPECT_NEAR(std::pow(f.transmission(8.5), 2), 0.5, 1e-14);
        EXPECT_DOUBLE_EQ(f.transmission(10.0), 1.0);
    }
}

TEST(Spectra, FilterScaleMatchesTransmission) {
    for (int order : {1, 2}) {
        const FilterSpec f{order, 0.0, 2.0};
        EXPECT_NEAR(f.transmission(filter_scale(f)), std::exp(-0.5), 1e-14);
    }
}

TEST(Schmidt, RankOneProduct) {
    const FrequencyGrid g(0.0, 8.0, 128);
    Eigen::VectorXcd u(128), v(128);
    for (int i = 0; i < 128; ++i) {
        u(i) = std::exp(-g[i] * g[i] / 2.0) * std::polar(1.0, 0.3 * g[i]);
        v(i) = std::exp(-(g[i] - 1.0) * (g[i] - 1.0) / 4.0);
    }
    const auto jsa = from_matrix(g, g, u * v.transpose());
    const auto sd = schmidt_decompose(jsa, 3);
    EXPECT_NEAR(sd.lambdas[0], 1.0, 1e-12);
    EXPECT_NEAR(sd.lambdas[1], 0.0, 1e-12);
    EXPECT_LT(reconstruction_error(jsa, sd), 1e-10);
}

// Gaussian JSA with Gaussian filters: the exponent is -(a x^2 + 2 b x y + a y^2)/2
// with a = 1/sp^2 + 1/sf^2, b = 1/sp^2, for which the purity is sqrt(1 - (b/a)^2).
TEST(Schmidt, GaussianPurityMatchesClosedForm) {
    const double sp = 1.0, sf = 2.5;
    const FilterSpec filt{1, 0.0, sf * 2.0 * std::sqrt(std::log(2.0))};
    const FrequencyGrid g(0.0, 8.0 * sf, 301);
    const auto pump = gaussian_pump(0.0, sp, sum_frequency_grid(g, g));
    const auto jsa = build_jsa(pump, g, g, filt, filt, MatchedPhase{});
    const auto sd = schmidt_decompose(jsa, 40);
    const double a = 1.0 / (sp * sp) + 1.0 / (sf * sf), b = 1.0 / (sp * sp);
    EXPECT_NEAR(purity(sd.all_lambdas), std::sqrt(1.0 - (b / a) * (b / a)), 1e-9);
    // Thermal-like weights: lambda_n = (1 - m) m^n with m = (1 - s)/(1 + s).
    const double s = std::sqrt(1.0 - (b / a) * (b / a));
    const double m = (1.0 - s) / (1.0 + s);
    for (std::size_t n = 0; n < 5; ++n) EXPECT_NEAR(sd.lambdas[n], (1.0 - m) * std::pow(m, n), 1e-9);
}

// Independent route: eigenvalues of the reduced density matrix rho_s = F F^+ h_s h_i.
TEST(Schmidt, MatchesReducedDensityMatrix) {
    SpdcSpectralConfig cfg;
    cfg.grid_points = 160;
    const auto sp = build_spdc_spectrum(cfg, 10);
    const auto& jsa = sp.jsa;
    const double h = jsa.signal_grid.step();
    Eigen::MatrixXcd rho = jsa.values * jsa.values.adjoint() * h * h;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    const auto ev = es.eigenvalues();
    for (std::size_t n = 0; n < 10; ++n) EXPECT_NEAR(sp.schmidt.lambdas[n], ev(ev.size() - 1 - n), 1e-10) << n;
}

TEST(Schmidt, ReferenceSourceJsa) {
    SpdcSpectralConfig cfg;  // 532 nm, 5 ps, first-order 600 GHz filters, 512 points
    const auto sp = build_spdc_spectrum(cfg);
    const auto& sd = sp.schmidt;
    double sum = 0.0;
    for (double l : sd.lambdas) sum += l;
    EXPECT_NEAR(sum + sd.residual, 1.0, 1e-9);
    EXPECT_LE(reconstruction_error(sp.jsa, sd), std::sqrt(sd.residual) + 1e-8);
    for (std::size_t n = 1; n < sd.lambdas.size(); ++n) EXPECT_LE(sd.lambdas[n], sd.lambdas[n - 1]);

    // Parity about the degenerate frequency: even first mode, odd second mode.
    const auto& m0 = sd.signal_modes[0].values;
    const auto& m1 = sd.signal_modes[1].values;
    const std::size_t n = m0.size();
    double odd_dev = 0.0, even_dev = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        even_dev = std::max(even_dev, std::abs(m0[i] - m0[n - 1 - i]));
        odd_dev = std::max(odd_dev, std::abs(m1[i] + m1[n - 1 - i]));
        scale = std::max(scale, std::abs(m1[i]));
    }
    EXPECT_LT(even_dev, 1e-8 * scale);
    EXPECT_LT(odd_dev, 1e-8 * scale);
}

TEST(Schmidt, CutoffBeyondGridThrows) {
    const FrequencyGrid g(0.0, 1.0, 8);
    const auto jsa = from_matrix(g, g, Eigen::MatrixXcd::Identity(8, 8));
    EXPECT_THROW(schmidt_decompose(jsa, 9), DomainError);
}

TEST(Spectra, SincWithZeroMismatchEqualsMatched) {
    const FrequencyGrid g(0.0, 6.0, 64);
    const FilterSpec f{1, 0.0, 2.0};
    const auto pump = gaussian_pump(0.0, 1.0, sum_frequency_grid(g, g));
    const auto a = build_jsa(pump, g, g, f, f, MatchedPhase{});
    const auto b = build_jsa(pump, g, g, f, f, SincPhase{1e-3, [](double, double) { return 0.0; }});
    EXPECT_LT((a.values - b.values).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Spectra, OverlapWithOwnModeIsOne) {
    SpdcSpectralConfig cfg;
    cfg.grid_points = 128;
    const auto sp = build_spdc_spectrum(cfg, 4);
    const auto ov = overlap_coefficients(sp.schmidt.signal_modes[0], sp.schmidt.signal_modes);
    EXPECT_NEAR(std::abs(ov.coefficients[0]), 1.0, 1e-12);
    for (std::size_t i = 1; i < 4; ++i) EXPECT_NEAR(std::abs(ov.coefficients[i]), 0.0, 1e-12);
}

TEST(Spectra, OverlapGridMismatchThrows) {
    const FrequencyGrid a(0.0, 5.0, 64), b(0.0, 5.0, 65);
    const auto pa = gaussian_pump(0.0, 1.0, a);
    const std::vector<SpectralAmplitude> modes{gaussian_pump(0.0, 1.0, b)};
    EXPECT_THROW(overlap_coefficients(pa, modes), GridError);
}

// Closed form against trapezoid-free grid quadrature of conj(psi) phi e^{i w tau}.
TEST(GaussianOverlap, MatchesQuadrature) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const double s1 = 0.5 + 1.5 * u(rng), s2 = 0.5 + 1.5 * u(rng);
        const double dw = 3.0 * (u(rng) - 0.5), tau = 3.0 * (u(rng) - 0.5), w1 = u(rng) - 0.5;
        const FrequencyGrid g(w1 + dw / 2.0, 14.0, 2001);
        const auto a = gaussian_pump(w1, s1, g), b = gaussian_pump(w1 + dw, s2, g);
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < g.size(); ++i) acc += std::conj(a.values[i]) * b.values[i] * std::polar(1.0, g[i] * tau);
        acc *= g.step();
        EXPECT_LT(std::abs(acc - gaussian_overlap(s1, s2, dw, tau, w1)), 1e-9);
    }
}

TEST(GaussianOverlap, BoundHoldsUpToUnitDelayBandwidth) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 5000; ++k) {
        const double prod = std::exp(std::log(1e-3) * u(rng));  // dw * tau in (1e-3, 1]
        const double dw = std::exp(4.0 * (u(rng) - 0.5));
        const double tau = prod / dw;
        const double ref = std::sqrt(dw / tau);
        const double s1 = ref * std::exp(6.0 * (u(rng) - 0.5)), s2 = ref * std::exp(6.0 * (u(rng) - 0.5));
        EXPECT_LE(std::abs(gaussian_overlap(s1, s2, dw, tau)), std::exp(-dw * tau / 2.0) + 1e-12);
    }
}

TEST(GaussianOverlap, EqualityAtMatchedWidths) {
    for (double dw : {0.3, 1.0, 2.5})
        for (double tau : {0.2, 1.0, 4.0}) {
            const double s = std::sqrt(dw / tau);
            EXPECT_NEAR(std::abs(gaussian_overlap(s, s, dw, tau)), std::exp(-dw * tau / 2.0), 1e-14);
        }
}

// With dw*tau > 1 the matched-width point is a saddle, not a maximum: widening
// one width and narrowing the other raises |c| above exp(-dw tau / 2).
TEST(GaussianOverlap, BoundFailsBeyondUnitDelayBandwidth) {
    const double dw = 2.0, tau = 1.5;
    const double s = std::sqrt(dw / tau), e = 0.4;
    const double c = std::abs(gaussian_overlap(s * std::exp(e), s * std::exp(-e), dw, tau));
    EXPECT_GT(c, std::exp(-dw * tau / 2.0) * (1.0 + 1e-3));
}
