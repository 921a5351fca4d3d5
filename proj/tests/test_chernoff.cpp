#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mdiqkd/chernoff.hpp"

using namespace mdiqkd;

namespace {

// Residuals re-evaluated in long double so the check does not share rounding
// with the solver.
long double r1(long double d, long double x, long double xi) { return d - (1 + d) * (std::log1p(d) + std::log(xi) / x); }
long double r2(long double d, long double x, long double xi) { return d + (1 - d) * (std::log1p(-d) + std::log(xi) / x); }
long double r1p(long double d, long double y, long double xi) { return d - (1 + d) * std::log1p(d) - std::log(xi) / y; }
long double r2p(long double d, long double y, long double xi) { return d + (1 - d) * std::log1p(-d) + std::log(xi) / y; }

std::vector<double> count_grid() {
    std::vector<double> g;
    // Fractional expected counts occur for rare cells and push a = -ln(xi)/X high.
    for (double e = -3.0; e < -1.0; e += 0.1) g.push_back(std::pow(10.0, e));
    for (double e = -1.0; e <= 14.0; e += 0.25) g.push_back(std::pow(10.0, e));
    return g;
}

}  // namespace

TEST(Chernoff, ResidualsVanishOnGrid) {
    for (double xi : {1e-10, 1e-7, 1e-3}) {
        const TailBound tb(xi);
        for (double x : count_grid()) {
            const auto d1 = chernoff_delta1(x, tb);
            const auto d2 = chernoff_delta2(x, tb);
            const auto d1p = chernoff_delta1_observed(x, tb);
            const auto d2p = chernoff_delta2_observed(x, tb);
            EXPECT_GT(d1.delta, 0.0);
            EXPECT_GT(d2.delta, 0.0);
            EXPECT_LT(d2.delta, 1.0);
            // Scale: each residual is a difference of terms of order max(1, d, a).
            const double a = -std::log(xi) / x;
            // In log space u = ln(1 + d1) solves u = a + 1 - e^{-u}; d1 itself
            // overflows once a reaches a few hundred.
            const long double lu = chernoff_log1p_delta1(x, tb);
            EXPECT_LT(std::abs(static_cast<double>(lu - a - 1 + std::exp(-lu))), 1e-12 * std::max(1.0, a)) << x;
            const double tol = 1e-12 * std::max({1.0, a, d1.delta, d1p.delta});
            if (a < 30.0) { EXPECT_LT(std::abs(static_cast<double>(r1(d1.delta, x, xi))), tol) << x; }
            EXPECT_LT(std::abs(static_cast<double>(r2(d2.delta, x, xi))), tol) << x;
            EXPECT_LT(std::abs(static_cast<double>(r1p(d1p.delta, x, xi))), tol) << x;
            if (!d2p.saturated) { EXPECT_LT(std::abs(static_cast<double>(r2p(d2p.delta, x, xi))), tol) << x; }
        }
    }
}

TEST(Chernoff, SaturationThreshold) {
    const TailBound tb(1e-7);
    const double a = tb.neg_log();
    EXPECT_TRUE(chernoff_delta2_observed(0.99 * a, tb).saturated);
    EXPECT_FALSE(chernoff_delta2_observed(1.01 * a, tb).saturated);
    EXPECT_EQ(chernoff_observed_bounds(0.5 * a, tb).lower, 0.0);
}

TEST(Chernoff, BoundsNestAroundCount) {
    const TailBound tb(1e-7);
    for (double x : count_grid()) {
        const auto e = expected_interval(x, tb);
        const auto o = chernoff_observed_bounds(x, tb);
        EXPECT_LT(e.lower, x);
        EXPECT_GT(e.upper, x);
        EXPECT_LE(o.lower, x);
        EXPECT_GT(o.upper, x);
        EXPECT_GE(e.lower, 0.0);
    }
}

// Relative widths shrink and absolute bounds grow with the count.
TEST(Chernoff, MonotoneInCount) {
    const TailBound tb(1e-7);
    const auto g = count_grid();
    for (std::size_t i = 1; i < g.size(); ++i) {
        EXPECT_LT(chernoff_log1p_delta1(g[i], tb), chernoff_log1p_delta1(g[i - 1], tb));
        EXPECT_LT(chernoff_delta2(g[i], tb).delta, chernoff_delta2(g[i - 1], tb).delta);
        EXPECT_LT(chernoff_delta1_observed(g[i], tb).delta, chernoff_delta1_observed(g[i - 1], tb).delta);
        const auto lo = expected_interval(g[i], tb), lo0 = expected_interval(g[i - 1], tb);
        // The lower limit underflows to 0 for tiny counts.
        EXPECT_GE(lo.lower, lo0.lower);
        if (lo0.lower > 0.0) { EXPECT_GT(lo.lower, lo0.lower); }
        EXPECT_GT(lo.upper, lo0.upper);
    }
}

TEST(Chernoff, SmallerFailureWidens) {
    for (double x : {10.0, 1e4, 1e9}) {
        EXPECT_GT(chernoff_delta1(x, TailBound(1e-10)).delta, chernoff_delta1(x, TailBound(1e-5)).delta);
        EXPECT_GT(chernoff_delta2(x, TailBound(1e-10)).delta, chernoff_delta2(x, TailBound(1e-5)).delta);
    }
}

// Large counts: every root is sqrt(2a) to leading order.
TEST(Chernoff, GaussianRegime) {
    const TailBound tb(1e-7);
    const double x = 1e14, a = tb.neg_log() / x;
    EXPECT_NEAR(chernoff_delta1(x, tb).delta / std::sqrt(2.0 * a), 1.0, 1e-6);
    EXPECT_NEAR(chernoff_delta2(x, tb).delta / std::sqrt(2.0 * a), 1.0, 1e-6);
    EXPECT_NEAR(chernoff_delta1_observed(x, tb).delta / std::sqrt(2.0 * a), 1.0, 1e-6);
    EXPECT_NEAR(chernoff_delta2_observed(x, tb).delta / std::sqrt(2.0 * a), 1.0, 1e-6);
}

TEST(Chernoff, ZeroCount) {
    const TailBound tb(1e-7);
    const auto e = expected_interval(0.0, tb);
    EXPECT_EQ(e.lower, 0.0);
    EXPECT_NEAR(e.upper, -std::log(1e-7), 1e-12);
    // Continuity of the upper limit as X -> 0.
    EXPECT_NEAR(expected_interval(1e-9, tb).upper, e.upper, 1e-6);
    EXPECT_THROW(expected_interval(-1.0, tb), DomainError);
    EXPECT_THROW(chernoff_delta1(0.0, tb), DomainError);
    EXPECT_THROW(TailBound(0.0), DomainError);
}
