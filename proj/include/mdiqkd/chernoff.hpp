#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/roots.hpp>

#include "mdiqkd/error.hpp"

// Chernoff-type fluctuation bounds between an observed count and its
// expectation. With a = -ln(xi)/X > 0 the four defining equations are
//   d1  - (1+d1)[ln(1+d1) - a]          = 0    expected, lower
//   d2  + (1-d2)[ln(1-d2) - a]          = 0    expected, upper
//   d1' - (1+d1') ln(1+d1') + a         = 0    observed, upper
//   d2' + (1-d2') ln(1-d2') - a         = 0    observed, lower
// and each left-hand side is monotone on the bracket used below.
namespace mdiqkd {

struct TailBound {
    double xi = 1e-7;

    explicit TailBound(double failure = 1e-7) : xi(failure) {
        if (!(xi > 0.0 && xi < 1.0)) throw DomainError("TailBound: failure probability must lie in (0,1)");
    }
    double neg_log() const { return -std::log(xi); }
};

struct ChernoffRoot {
    double delta = 0.0;
    double residual = 0.0;
    bool saturated = false;  // no root in (0,1); delta reported as 1
};

namespace detail {

inline constexpr std::uintmax_t chernoff_max_iter = 200;

template <class F>
double solve_bracketed(F f, double lo, double hi) {
    std::uintmax_t iters = chernoff_max_iter;
    const double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw NumericError("chernoff: root not bracketed");
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(53), iters);
    if (iters >= chernoff_max_iter) throw NumericError("chernoff: root finder did not converge");
    // Pick the endpoint with the smaller residual.
    return std::abs(f(r.first)) <= std::abs(f(r.second)) ? r.first : r.second;
}

// q(s) = 1 - e^s + s e^s = sum_{n>=2} (n-1) s^n / n!, and
// h(u) = e^{-u} - 1 + u = sum_{n>=2} (-u)^n / n!. Both cancel badly near 0,
// which is where the roots sit for large counts.
inline double q_series(double s) {
    if (std::abs(s) > 0.5) return 1.0 - std::exp(s) + s * std::exp(s);
    double term = s, sum = 0.0;
    for (int n = 2; n < 30; ++n) {
        term *= s / n;
        sum += (n - 1) * term;
    }
    return sum;
}
inline double h_series(double u) {
    if (std::abs(u) > 0.5) return std::exp(-u) - 1.0 + u;
    double term = 1.0, sum = 0.0;
    for (int n = 1; n < 30; ++n) {
        term *= -u / n;
        if (n >= 2) sum += term;
    }
    return sum;
}

inline double check_count(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + ": argument must be positive");
    return x;
}

}  // namespace detail

inline double delta1_residual(double d, double x, double xi) {
    return d - (1.0 + d) * (std::log1p(d) + std::log(xi) / x);
}
inline double delta2_residual(double d, double x, double xi) {
    return d + (1.0 - d) * (std::log1p(-d) + std::log(xi) / x);
}
inline double delta1p_residual(double d, double y, double xi) {
    return d - (1.0 + d) * std::log1p(d) - std::log(xi) / y;
}
inline double delta2p_residual(double d, double y, double xi) {
    return d + (1.0 - d) * std::log1p(-d) + std::log(xi) / y;
}

// Solved in u = ln(1 + d1), where the equation reads u = a + 1 - e^{-u}; the
// root lies in (a, a + 1). The bracket ends at a + 2 because at a + 1 the
// residual is -e^{-(a+1)}, which rounds away for large a.
inline double chernoff_log1p_delta1(double x, TailBound tb) {
    detail::check_count(x, "chernoff_delta1");
    const double a = tb.neg_log() / x;
    auto f = [&](double u) { return a - detail::h_series(u); };
    return detail::solve_bracketed(f, 0.0, a + 2.0);
}

inline ChernoffRoot chernoff_delta1(double x, TailBound tb) {
    const double d = std::expm1(chernoff_log1p_delta1(x, tb));
    return {d, delta1_residual(d, x, tb.xi), false};
}

// Solved in s = ln(1 - d2) so that d2 close to 1 stays resolved.
inline ChernoffRoot chernoff_delta2(double x, TailBound tb) {
    detail::check_count(x, "chernoff_delta2");
    const double a = tb.neg_log() / x;
    auto g = [&](double s) { return detail::q_series(s) - a * std::exp(s); };
    const double s = detail::solve_bracketed(g, -(std::log1p(a) + 60.0), 0.0);
    const double d = -std::expm1(s);
    return {d, delta2_residual(d, x, tb.xi), false};
}

// In u = ln(1 + d1') the equation is e^u (1 - u) = 1 - b, decreasing in u > 0.
inline ChernoffRoot chernoff_delta1_observed(double y, TailBound tb) {
    detail::check_count(y, "chernoff_delta1_observed");
    const double b = tb.neg_log() / y;
    auto f = [&](double u) { return b - detail::q_series(u); };
    const double u = detail::solve_bracketed(f, 0.0, 2.0 + std::log1p(b));
    const double d = std::expm1(u);
    return {d, delta1p_residual(d, y, tb.xi), false};
}

// When -ln(xi)/Y >= 1 the equation has no root in (0,1): the lower observed
// bound is then 0 and the root is reported as saturated.
inline ChernoffRoot chernoff_delta2_observed(double y, TailBound tb) {
    detail::check_count(y, "chernoff_delta2_observed");
    const double b = tb.neg_log() / y;
    if (b >= 1.0) return {1.0, 0.0, true};
    auto g = [&](double s) { return detail::q_series(s) - b; };
    // g(0) = -b < 0 and g -> 1 - b > 0 as s -> -inf.
    double lo = -1.0;
    while (g(lo) <= 0.0) {
        lo *= 2.0;
        if (lo < -1e6) throw NumericError("chernoff_delta2_observed: bracket expansion failed");
    }
    const double s = detail::solve_bracketed(g, lo, 0.0);
    const double d = -std::expm1(s);
    return {d, delta2p_residual(d, y, tb.xi), false};
}

inline double chernoff_expected_lower(double x, TailBound tb) { return x * std::exp(-chernoff_log1p_delta1(x, tb)); }

inline double chernoff_expected_upper(double x, TailBound tb) {
    detail::check_count(x, "chernoff_expected_upper");
    const double a = tb.neg_log() / x;
    // X / (1 - d2) = X e^{-s}; evaluate through s to keep precision.
    auto g = [&](double s) { return detail::q_series(s) - a * std::exp(s); };
    const double s = detail::solve_bracketed(g, -(std::log1p(a) + 60.0), 0.0);
    return x * std::exp(-s);
}

struct ObservedBounds {
    double lower = 0.0;
    double upper = 0.0;
};

inline ObservedBounds chernoff_observed_bounds(double y, TailBound tb) {
    const auto d2 = chernoff_delta2_observed(y, tb);
    const auto d1 = chernoff_delta1_observed(y, tb);
    return {d2.saturated ? 0.0 : (1.0 - d2.delta) * y, (1.0 + d1.delta) * y};
}

// Count-level interval [E^L, E^U] that tolerates X = 0: E^L = 0 and E^U is the
// X -> 0 limit of X/(1 - d2), namely -ln(xi).
struct ExpectedInterval {
    double lower = 0.0;
    double upper = 0.0;
};

inline ExpectedInterval expected_interval(double x, TailBound tb) {
    if (x < 0.0 || !std::isfinite(x)) throw DomainError("expected_interval: count must be non-negative");
    if (x == 0.0) return {0.0, tb.neg_log()};
    return {chernoff_expected_lower(x, tb), chernoff_expected_upper(x, tb)};
}

}  // namespace mdiqkd
