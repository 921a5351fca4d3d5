#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mdiqkd/optimizer.hpp"

using namespace mdiqkd;

namespace {

const Point target{0.05, 0.4, 0.1, 0.5, 0.1, 0.1};

double quadratic(const Point& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s -= std::pow((x[i] - target[i % 6]) / (1.0 + i % 6), 2);
    return s;
}

// Many local maxima; used where only invariants matter.
double rugged(const Point& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::sin(37.0 * x[i] + i) - 3.0 * x[i] * x[i];
    return s;
}

}  // namespace

TEST(Optimizer, SwarmFindsQuadraticMaximum) {
    SearchSpace space;
    space.symmetric = true;
    SwarmConfig cfg;
    cfg.particles = 30;
    cfg.iterations = 150;
    const auto g = pso_optimize(quadratic, space, cfg);
    const auto r = local_refine(quadratic, space, g.best);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.best[i], target[i], 2e-3) << i;
    EXPECT_GE(r.value, g.value);
    for (std::size_t i = 1; i < g.trace.size(); ++i) EXPECT_GE(g.trace[i], g.trace[i - 1]);
}

TEST(Optimizer, RepairAlwaysFeasible) {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(-1.0, 3.0);
    for (bool sym : {true, false}) {
        SearchSpace space;
        space.symmetric = sym;
        for (int t = 0; t < 1000; ++t) {
            Point x(space.dims());
            for (auto& v : x) v = u(rng);
            space.repair(x);
            ASSERT_TRUE(space.feasible(x));
            const auto p = space.to_params(x);
            EXPECT_TRUE(p.a.feasible());
            EXPECT_TRUE(p.b.feasible());
            EXPECT_EQ(space.from_params(p), x);
        }
    }
}

TEST(Optimizer, DeterministicAcrossSeedsAndWorkers) {
    SearchSpace space;
    SwarmConfig cfg;
    cfg.particles = 12;
    cfg.iterations = 20;
    cfg.seed = 5;
    const auto a = pso_optimize(rugged, space, cfg);
    const auto b = pso_optimize(rugged, space, cfg);
    EXPECT_EQ(a.best, b.best);
    EXPECT_EQ(a.trace, b.trace);
    cfg.workers = 3;
    const auto c = pso_optimize(rugged, space, cfg);
    EXPECT_EQ(a.best, c.best);
    EXPECT_EQ(a.value, c.value);
    cfg.seed = 6;
    cfg.workers = 1;
    EXPECT_NE(pso_optimize(rugged, space, cfg).best, a.best);
}

TEST(Optimizer, WorkerExceptionPropagates) {
    SearchSpace space;
    SwarmConfig cfg;
    cfg.particles = 6;
    cfg.iterations = 1;
    cfg.workers = 3;
    const Objective bad = [](const Point& x) -> double {
        if (x[0] > 0.0) throw NumericError("boom");
        return 0.0;
    };
    EXPECT_THROW(pso_optimize(bad, space, cfg), NumericError);
}

TEST(Optimizer, LocalRefineNeverWorse) {
    std::mt19937_64 rng(73);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SearchSpace space;
    for (int t = 0; t < 50; ++t) {
        Point x(12);
        for (auto& v : x) v = u(rng);
        space.repair(x);
        const double start = rugged(x);
        const auto r = local_refine(rugged, space, x);
        EXPECT_GE(r.value, start);
        EXPECT_TRUE(space.feasible(r.best));
        EXPECT_DOUBLE_EQ(r.value, rugged(r.best));
    }
}

// The same objective at every grid point: no restarts, values never drop,
// and the refined optimum stops moving once it is a fixed point of the search.
TEST(Optimizer, ConstantFamilyIsStable) {
    SearchSpace space;
    space.symmetric = true;
    SwarmConfig cfg;
    cfg.particles = 16;
    cfg.iterations = 40;
    const std::vector<double> grid{0, 1, 2, 3, 4, 5};
    // Positive, like a rate with key: refinement alone suffices.
    const Objective lifted = [](const Point& x) { return 1.0 + quadratic(x); };
    const auto sweep = continuation_sweep([&](std::size_t) { return lifted; }, grid, space, cfg);
    ASSERT_EQ(sweep.size(), grid.size());
    for (std::size_t k = 1; k < sweep.size(); ++k) {
        EXPECT_FALSE(sweep[k].restarted);
        EXPECT_GE(sweep[k].value, sweep[k - 1].value);
    }
    EXPECT_EQ(sweep[sweep.size() - 1].best, sweep[sweep.size() - 2].best);

    // Never positive: a failed restart is not repeated at the next point.
    const auto flat = continuation_sweep([](std::size_t) { return Objective(quadratic); }, grid, space, cfg);
    for (std::size_t k = 1; k < flat.size(); ++k) EXPECT_NE(flat[k].restarted, flat[k - 1].restarted) << k;
}

TEST(Optimizer, SearchScore) {
    KeyRateResult r;
    r.rate = 1e-4;
    r.raw_rate = 1e-4;
    EXPECT_EQ(search_score(r), 1e-4);
    r.rate = 0.0;
    r.raw_rate = -2e-3;
    EXPECT_EQ(search_score(r), -2e-3);
    r.infeasible = true;
    EXPECT_EQ(search_score(r), -INFINITY);
}

// An optimized WCP link is at least as good as a fixed parameter choice.
TEST(Optimizer, OptimizedBeatsFixed) {
    ChannelParams base;
    const LinkModel link(SourceModel::wcp(), SourceModel::wcp(), base.relay, base.misalignment);
    const ExperimentScale scale{1e12, false};
    const ProtocolParams fixed{{0.04, 0.3, 0.1, 0.6, 0.2, 0.05}, {0.04, 0.3, 0.1, 0.6, 0.2, 0.05}};
    SearchSpace space;
    space.symmetric = true;
    SwarmConfig cfg;
    cfg.particles = 16;
    cfg.iterations = 25;
    for (double km : {10.0, 40.0}) {
        const auto chan = ChannelParams::symmetric(km, base);
        const Objective f = [&](const Point& x) { return search_score(link.rate_at(chan, space.to_params(x), scale)); };
        const auto g = pso_optimize(f, space, cfg);
        const auto r = local_refine(f, space, g.best);
        const double fixed_rate = fixed_param_sweep(link, fixed, {km}, base, scale)[0].result.rate;
        EXPECT_GT(fixed_rate, 0.0);
        EXPECT_GE(r.value, fixed_rate) << km;
    }
}
