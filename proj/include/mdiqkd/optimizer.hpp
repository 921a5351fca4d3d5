#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "mdiqkd/error.hpp"
#include "mdiqkd/keyrate.hpp"

// Particle swarm plus continuation search over protocol parameters.
//
// A point is either 6-dimensional (both parties share one parameter set) or
// 12-dimensional; per party the layout is nu, mu, pz_nu, pz_mu, px_nu, px_mu.
namespace mdiqkd {

using Point = std::vector<double>;
using Objective = std::function<double(const Point&)>;

struct SearchSpace {
    bool symmetric = false;
    double nu_min = 1e-4, nu_max = 0.5;
    double mu_min = 1e-3, mu_max = 1.0;
    double p_min = 1e-4, p_max = 1.0;

    std::size_t dims() const { return symmetric ? 6 : 12; }
    double lower(std::size_t i) const {
        switch (i % 6) {
            case 0: return nu_min;
            case 1: return mu_min;
            default: return p_min;
        }
    }
    double upper(std::size_t i) const {
        switch (i % 6) {
            case 0: return nu_max;
            case 1: return mu_max;
            default: return p_max;
        }
    }

    // Box clamp, then per party: nu strictly below mu and the four
    // probabilities shrunk toward p_min if they sum above 1.
    void repair(Point& x) const {
        if (x.size() != dims()) throw DomainError("SearchSpace::repair: wrong dimension");
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lower(i), upper(i));
        for (std::size_t base = 0; base < x.size(); base += 6) {
            double& nu = x[base];
            const double mu = x[base + 1];
            if (nu >= mu) nu = std::max(lower(base), mu * (1.0 - 1e-6));
            double sum = x[base + 2] + x[base + 3] + x[base + 4] + x[base + 5];
            if (sum > 1.0) {
                // Shrink only the part above the floor so no probability drops
                // below p_min; the headroom keeps the sum from rounding above 1.
                const double s = (1.0 - 1e-12 - 4.0 * p_min) / (sum - 4.0 * p_min);
                for (std::size_t k = 2; k < 6; ++k) x[base + k] = p_min + (x[base + k] - p_min) * s;
            }
        }
    }

    bool feasible(const Point& x) const {
        if (x.size() != dims()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < lower(i) || x[i] > upper(i)) return false;
        for (std::size_t base = 0; base < x.size(); base += 6) {
            if (!(x[base] < x[base + 1])) return false;
            if (x[base + 2] + x[base + 3] + x[base + 4] + x[base + 5] > 1.0) return false;
        }
        return true;
    }

    ProtocolParams to_params(const Point& x) const {
        if (x.size() != dims()) throw DomainError("SearchSpace::to_params: wrong dimension");
        PartyParams a{x[0], x[1], x[2], x[3], x[4], x[5]};
        if (symmetric) return {a, a};
        return {a, {x[6], x[7], x[8], x[9], x[10], x[11]}};
    }

    Point from_params(const ProtocolParams& p) const {
        Point x{p.a.nu, p.a.mu, p.a.pz_nu, p.a.pz_mu, p.a.px_nu, p.a.px_mu};
        if (!symmetric) x.insert(x.end(), {p.b.nu, p.b.mu, p.b.pz_nu, p.b.pz_mu, p.b.px_nu, p.b.px_mu});
        return x;
    }
};

struct SwarmConfig {
    std::size_t particles = 40;
    std::size_t iterations = 200;
    double inertia = 0.72;
    double cognitive = 1.49;
    double social = 1.49;
    std::uint64_t seed = 1;
    std::size_t workers = 1;

    void validate() const {
        if (particles < 2) throw DomainError("SwarmConfig: at least two particles");
        if (!(inertia >= 0.0 && inertia <= 1.0)) throw DomainError("SwarmConfig: inertia outside [0,1]");
        if (!(cognitive > 0.0 && social > 0.0)) throw DomainError("SwarmConfig: acceleration constants must be positive");
        if (workers == 0) throw DomainError("SwarmConfig: need at least one worker");
    }
};

struct PsoResult {
    Point best;
    double value = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;  // best value after each iteration
    std::size_t evaluations = 0;
};

namespace detail {

// Evaluates f on every point, writing results by index. Exceptions from any
// worker are rethrown on the calling thread.
inline void evaluate_all(const Objective& f, const std::vector<Point>& pts, std::vector<double>& out,
                         std::size_t workers) {
    out.assign(pts.size(), 0.0);
    auto safe = [&](std::size_t i) {
        const double v = f(pts[i]);
        out[i] = std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    };
    if (workers <= 1 || pts.size() < 2) {
        for (std::size_t i = 0; i < pts.size(); ++i) safe(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto run = [&] {
        for (std::size_t i = next++; i < pts.size(); i = next++) {
            try {
                safe(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n = std::min(workers, pts.size());
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace detail

// Maximizes `objective`. Random draws all happen on the calling thread in a
// fixed order, so the result depends only on the seed.
inline PsoResult pso_optimize(const Objective& objective, const SearchSpace& space, const SwarmConfig& cfg,
                              const std::vector<Point>& seeds = {}) {
    cfg.validate();
    const std::size_t d = space.dims();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Point> x(cfg.particles, Point(d)), v(cfg.particles, Point(d));
    for (std::size_t p = 0; p < cfg.particles; ++p) {
        for (std::size_t i = 0; i < d; ++i) {
            const double lo = space.lower(i), hi = space.upper(i);
            // Intensities are drawn log-uniformly; they matter across decades.
            x[p][i] = (i % 6 < 2) ? lo * std::pow(hi / lo, unit(rng)) : lo + (hi - lo) * unit(rng);
            v[p][i] = (hi - lo) * (unit(rng) - 0.5) * 0.2;
        }
        if (p < seeds.size()) x[p] = seeds[p];
        space.repair(x[p]);
    }

    PsoResult res;
    std::vector<double> f;
    detail::evaluate_all(objective, x, f, cfg.workers);
    res.evaluations += x.size();
    std::vector<Point> pbest = x;
    std::vector<double> pval = f;
    for (std::size_t p = 0; p < cfg.particles; ++p)
        if (pval[p] > res.value || res.best.empty()) {
            res.value = pval[p];
            res.best = pbest[p];
        }

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        for (std::size_t p = 0; p < cfg.particles; ++p) {
            for (std::size_t i = 0; i < d; ++i) {
                const double lo = space.lower(i), hi = space.upper(i);
                const double r1 = unit(rng), r2 = unit(rng);
                double vi = cfg.inertia * v[p][i] + cfg.cognitive * r1 * (pbest[p][i] - x[p][i]) +
                            cfg.social * r2 * (res.best[i] - x[p][i]);
                const double vmax = 0.5 * (hi - lo);
                vi = std::clamp(vi, -vmax, vmax);
                double xi = x[p][i] + vi;
                // Reflect off the box.
                if (xi < lo) {
                    xi = lo + (lo - xi);
                    vi = -vi;
                }
                if (xi > hi) {
                    xi = hi - (xi - hi);
                    vi = -vi;
                }
                x[p][i] = std::clamp(xi, lo, hi);
                v[p][i] = vi;
            }
            space.repair(x[p]);
        }
        detail::evaluate_all(objective, x, f, cfg.workers);
        res.evaluations += x.size();
        for (std::size_t p = 0; p < cfg.particles; ++p) {
            if (f[p] > pval[p]) {
                pval[p] = f[p];
                pbest[p] = x[p];
            }
            if (f[p] > res.value) {
                res.value = f[p];
                res.best = x[p];
            }
        }
        res.trace.push_back(res.value);
    }
    return res;
}

struct LocalSearchConfig {
    double initial_step = 0.5;  // relative to the coordinate's value
    double shrink = 0.5;
    std::size_t levels = 8;
    double min_step = 1e-5;     // absolute floor on any move
};

// Coordinate descent with geometrically shrinking relative steps. Only
// improvements are accepted, so the result is never worse than the start.
inline PsoResult local_refine(const Objective& objective, const SearchSpace& space, Point start,
                              const LocalSearchConfig& cfg = {}) {
    space.repair(start);
    PsoResult res;
    res.best = start;
    res.value = objective(start);
    res.evaluations = 1;
    double rel = cfg.initial_step;
    for (std::size_t level = 0; level < cfg.levels; ++level, rel *= cfg.shrink) {
        bool improved = true;
        std::size_t sweeps = 0;
        while (improved && sweeps++ < 4) {
            improved = false;
            for (std::size_t i = 0; i < res.best.size(); ++i) {
                const double step = std::max(std::abs(res.best[i]) * rel, cfg.min_step);
                for (double dir : {+1.0, -1.0}) {
                    Point trial = res.best;
                    trial[i] += dir * step;
                    space.repair(trial);
                    if (trial == res.best) continue;
                    const double v = objective(trial);
                    ++res.evaluations;
                    if (v > res.value) {
                        res.value = v;
                        res.best = std::move(trial);
                        improved = true;
                        break;
                    }
                }
            }
        }
        res.trace.push_back(res.value);
    }
    return res;
}

struct SweepPoint {
    std::size_t index = 0;
    double coordinate = 0.0;  // distance in km, or data size
    Point best;
    double value = 0.0;
    bool restarted = false;
};

// `family(k)` is the objective at grid index k. The first point is searched by
// PSO; later points refine the previous optimum and fall back to a fresh PSO
// (seeded with that optimum) when the value drops by more than half, or when
// it is not positive and the previous point was not already a failed restart.
inline std::vector<SweepPoint> continuation_sweep(const std::function<Objective(std::size_t)>& family,
                                                  const std::vector<double>& grid, const SearchSpace& space,
                                                  const SwarmConfig& cfg, const LocalSearchConfig& local = {},
                                                  const std::vector<Point>& initial_seeds = {}) {
    std::vector<SweepPoint> out;
    Point prev;
    double prev_value = 0.0;
    bool prev_failed_restart = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const Objective f = family(k);
        SweepPoint sp;
        sp.index = k;
        sp.coordinate = grid[k];
        if (k == 0) {
            auto g = pso_optimize(f, space, cfg, initial_seeds);
            auto r = local_refine(f, space, g.best, local);
            sp.best = r.best;
            sp.value = r.value;
            sp.restarted = true;
        } else {
            auto r = local_refine(f, space, prev, local);
            sp.best = r.best;
            sp.value = r.value;
            const bool dropped = prev_value > 0.0 && r.value < 0.5 * prev_value;
            const bool lost = r.value <= 0.0 && !prev_failed_restart;
            if (dropped || lost) {
                SwarmConfig c = cfg;
                c.seed = cfg.seed + k;
                auto g = pso_optimize(f, space, c, {prev});
                auto rr = local_refine(f, space, g.best, local);
                if (rr.value > sp.value) {
                    sp.best = rr.best;
                    sp.value = rr.value;
                }
                sp.restarted = true;
            }
        }
        prev_failed_restart = sp.restarted && sp.value <= 0.0;
        prev = sp.best;
        prev_value = sp.value;
        out.push_back(std::move(sp));
    }
    return out;
}

// Objective used for key-rate searches: the clamped rate where positive, the
// (negative) raw rate otherwise so that the search still sees a gradient.
inline double search_score(const KeyRateResult& r) {
    if (r.rate > 0.0) return r.rate;
    if (r.infeasible) return -std::numeric_limits<double>::infinity();
    return std::isfinite(r.raw_rate) ? std::min(r.raw_rate, 0.0) : -std::numeric_limits<double>::infinity();
}

struct FixedPoint {
    double distance_km = 0.0;
    KeyRateResult result;
};

inline std::vector<FixedPoint> fixed_param_sweep(const LinkModel& link, const ProtocolParams& params,
                                                 const std::vector<double>& distances_km, const ChannelParams& base,
                                                 const ExperimentScale& scale, const DecoyOptions& decoy = {}) {
    std::vector<FixedPoint> out;
    out.reserve(distances_km.size());
    for (double d : distances_km)
        out.push_back({d, link.rate_at(ChannelParams::symmetric(d, base), params, scale, decoy)});
    return out;
}

}  // namespace mdiqkd
