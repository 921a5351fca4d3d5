#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mdiqkd/error.hpp"

// Small dense two-phase simplex. Problems here have tens of variables and
// rows whose coefficients span tens of orders of magnitude (photon-number
// probabilities), so every row is scaled to unit max-norm before pivoting.
// Pivoting is Dantzig with lowest-index ties and falls back to Bland's rule
// after a run of degenerate pivots, which keeps it finite and deterministic.
namespace mdiqkd {

enum class Relation { less_equal, greater_equal, equal };
enum class Sense { minimize, maximize };
enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
        case LpStatus::iteration_limit: return "iteration_limit";
    }
    return "?";
}

struct LinearConstraint {
    std::vector<double> coeffs;
    Relation relation = Relation::less_equal;
    double rhs = 0.0;
};

struct LinearProgram {
    std::vector<double> objective;
    Sense sense = Sense::minimize;
    std::vector<LinearConstraint> constraints;
    std::vector<double> lower;  // defaults to 0
    std::vector<double> upper;  // defaults to +inf

    std::size_t variables() const { return objective.size(); }

    void add(std::vector<double> coeffs, Relation rel, double rhs) {
        constraints.push_back({std::move(coeffs), rel, rhs});
    }
};

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    double value = 0.0;
    std::vector<double> x;
    std::size_t pivots = 0;
};

struct SimplexOptions {
    double pivot_tol = 1e-11;
    double optimality_tol = 1e-12;
    double feasibility_tol = 1e-10;
    std::size_t bland_after = 50;  // consecutive degenerate pivots
    std::size_t max_pivots = 20000;
};

namespace detail {

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), a_((rows + 1) * (cols + 1), 0.0), basis_(rows) {}

    double& at(std::size_t r, std::size_t c) { return a_[r * (n_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return a_[r * (n_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, n_); }
    double rhs(std::size_t r) const { return at(r, n_); }
    // Row m_ holds reduced costs; its rhs is minus the objective value.
    double& cost(std::size_t c) { return at(m_, c); }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }
    std::vector<std::size_t>& basis() { return basis_; }

    void pivot(std::size_t r, std::size_t c) {
        const double p = at(r, c);
        for (std::size_t j = 0; j <= n_; ++j) at(r, j) /= p;
        at(r, c) = 1.0;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == r) continue;
            const double f = at(i, c);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= n_; ++j) at(i, j) -= f * at(r, j);
            at(i, c) = 0.0;
        }
        basis_[r] = c;
    }

private:
    std::size_t m_, n_;
    std::vector<double> a_;
    std::vector<std::size_t> basis_;
};

// Minimizes the cost row over columns [0, allowed). Returns the final status.
inline LpStatus run_simplex(Tableau& t, std::size_t allowed, const SimplexOptions& opt, std::size_t& pivots) {
    std::size_t degenerate = 0;
    while (true) {
        if (pivots >= opt.max_pivots) return LpStatus::iteration_limit;
        const bool bland = degenerate >= opt.bland_after;
        std::size_t enter = allowed;
        double best = -opt.optimality_tol;
        for (std::size_t j = 0; j < allowed; ++j) {
            const double d = t.cost(j);
            if (d < best) {
                enter = j;
                if (bland) break;
                best = d;
            }
        }
        if (enter == allowed) return LpStatus::optimal;

        std::size_t leave = t.rows();
        double ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < t.rows(); ++i) {
            const double a = t.at(i, enter);
            if (a <= opt.pivot_tol) continue;
            const double r = std::max(t.rhs(i), 0.0) / a;
            if (r < ratio || (r == ratio && t.basis()[i] < t.basis()[leave])) {
                ratio = r;
                leave = i;
            }
        }
        if (leave == t.rows()) return LpStatus::unbounded;
        degenerate = ratio == 0.0 ? degenerate + 1 : 0;
        t.pivot(leave, enter);
        ++pivots;
    }
}

}  // namespace detail

inline LpResult lp_solve(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    const std::size_t nv = lp.variables();
    if (nv == 0) throw DomainError("lp_solve: no variables");
    std::vector<double> lo = lp.lower.empty() ? std::vector<double>(nv, 0.0) : lp.lower;
    std::vector<double> up =
        lp.upper.empty() ? std::vector<double>(nv, std::numeric_limits<double>::infinity()) : lp.upper;
    if (lo.size() != nv || up.size() != nv) throw DomainError("lp_solve: bound vectors have wrong length");
    for (std::size_t j = 0; j < nv; ++j) {
        if (!std::isfinite(lo[j])) throw DomainError("lp_solve: lower bounds must be finite");
        if (up[j] < lo[j]) return {LpStatus::infeasible, 0.0, {}, 0};
    }

    // Shift x = lo + x' and collect rows in the form sum a x' (rel) b with b >= 0.
    struct Row {
        std::vector<double> a;
        Relation rel;
        double b;
    };
    std::vector<Row> rows;
    for (const auto& c : lp.constraints) {
        if (c.coeffs.size() != nv) throw DomainError("lp_solve: constraint has wrong length");
        Row r{c.coeffs, c.relation, c.rhs};
        for (std::size_t j = 0; j < nv; ++j) r.b -= r.a[j] * lo[j];
        double scale = 0.0;
        for (double v : r.a) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) {
            const bool ok = (r.rel == Relation::less_equal && r.b >= -opt.feasibility_tol) ||
                            (r.rel == Relation::greater_equal && r.b <= opt.feasibility_tol) ||
                            (r.rel == Relation::equal && std::abs(r.b) <= opt.feasibility_tol);
            if (!ok) return {LpStatus::infeasible, 0.0, {}, 0};
            continue;
        }
        for (double& v : r.a) v /= scale;
        r.b /= scale;
        rows.push_back(std::move(r));
    }
    for (std::size_t j = 0; j < nv; ++j) {
        if (!std::isfinite(up[j])) continue;
        Row r{std::vector<double>(nv, 0.0), Relation::less_equal, up[j] - lo[j]};
        r.a[j] = 1.0;
        rows.push_back(std::move(r));
    }
    for (auto& r : rows) {
        if (r.b < 0.0) {
            for (double& v : r.a) v = -v;
            r.b = -r.b;
            if (r.rel == Relation::less_equal) r.rel = Relation::greater_equal;
            else if (r.rel == Relation::greater_equal) r.rel = Relation::less_equal;
        }
    }

    // Column layout: [x' | slack/surplus | artificial].
    const std::size_t m = rows.size();
    std::size_t n_slack = 0, n_art = 0;
    for (const auto& r : rows) {
        if (r.rel != Relation::equal) ++n_slack;
        if (r.rel != Relation::less_equal) ++n_art;
    }
    const std::size_t n_real = nv + n_slack;
    const std::size_t n_cols = n_real + n_art;
    detail::Tableau t(m, n_cols);
    std::size_t s = nv, a = n_real;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < nv; ++j) t.at(i, j) = rows[i].a[j];
        t.rhs(i) = rows[i].b;
        switch (rows[i].rel) {
            case Relation::less_equal:
                t.at(i, s) = 1.0;
                t.basis()[i] = s++;
                break;
            case Relation::greater_equal:
                t.at(i, s++) = -1.0;
                t.at(i, a) = 1.0;
                t.basis()[i] = a++;
                break;
            case Relation::equal:
                t.at(i, a) = 1.0;
                t.basis()[i] = a++;
                break;
        }
    }

    LpResult result;
    // Phase 1: minimize the sum of artificials.
    if (n_art > 0) {
        for (std::size_t i = 0; i < m; ++i) {
            if (t.basis()[i] < n_real) continue;
            for (std::size_t j = 0; j <= n_cols; ++j) t.at(m, j) -= t.at(i, j);
            t.cost(t.basis()[i]) = 0.0;
        }
        const auto st = detail::run_simplex(t, n_cols, opt, result.pivots);
        if (st == LpStatus::iteration_limit) return {st, 0.0, {}, result.pivots};
        if (-t.rhs(m) > opt.feasibility_tol) return {LpStatus::infeasible, 0.0, {}, result.pivots};
        // Drive zero-level artificials out of the basis where possible.
        for (std::size_t i = 0; i < m; ++i) {
            if (t.basis()[i] < n_real) continue;
            std::size_t best = n_real;
            double mag = opt.pivot_tol;
            for (std::size_t j = 0; j < n_real; ++j)
                if (std::abs(t.at(i, j)) > mag) {
                    mag = std::abs(t.at(i, j));
                    best = j;
                }
            if (best < n_real) {
                t.pivot(i, best);
                ++result.pivots;
            }
        }
    }

    // Phase 2 cost row.
    const double sign = lp.sense == Sense::maximize ? -1.0 : 1.0;
    for (std::size_t j = 0; j <= n_cols; ++j) t.at(m, j) = 0.0;
    for (std::size_t j = 0; j < nv; ++j) t.cost(j) = sign * lp.objective[j];
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t b = t.basis()[i];
        const double f = t.at(m, b);
        if (f == 0.0) continue;
        for (std::size_t j = 0; j <= n_cols; ++j) t.at(m, j) -= f * t.at(i, j);
    }
    const auto st = detail::run_simplex(t, n_real, opt, result.pivots);
    result.status = st;
    if (st != LpStatus::optimal) return result;

    result.x = lo;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t b = t.basis()[i];
        if (b < nv) result.x[b] += std::max(t.rhs(i), 0.0);
    }
    for (std::size_t j = 0; j < nv; ++j) {
        result.x[j] = std::min(result.x[j], up[j]);
        result.value += lp.objective[j] * result.x[j];
    }
    return result;
}

// Throwing wrapper used by callers that treat anything but optimal as an error.
inline LpResult lp_solve_or_throw(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    auto r = lp_solve(lp, opt);
    switch (r.status) {
        case LpStatus::optimal: return r;
        case LpStatus::infeasible: throw InfeasibleError("linear program is infeasible");
        case LpStatus::unbounded: throw UnboundedError("linear program is unbounded");
        case LpStatus::iteration_limit: throw NumericError("linear program hit the pivot limit");
    }
    return r;
}

}  // namespace mdiqkd
