#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mdiqkd/config.hpp"
#include "mdiqkd/interference.hpp"
#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/optimizer.hpp"
#include "mdiqkd/scenario.hpp"

#ifndef MDIQKD_VERSION
#define MDIQKD_VERSION "dev"
#endif

// Subcommand runners. Each writes a '#'-prefixed header (version, subcommand,
// CRC32 of the resolved configuration, then the configuration itself) and one
// CSV row per point. Rows come out in sweep-index order.
namespace mdiqkd::cli {

enum ExitCode : int { ok = 0, config_error = 2, numeric_error = 3, infeasible = 4 };

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"schmidt", "keyrate", "optimize", "sweep-distance",
                                                "sweep-size", "fixed-params", "hom", "pnd"};
    return names;
}

struct Overrides {
    std::optional<std::string> scenarios;
    std::optional<std::string> distances;  // start:stop:points
    std::optional<double> n_total;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
};

inline void apply(Config& c, const Overrides& o) {
    if (o.scenarios) {
        c.scenarios.clear();
        for (const auto& t : detail::split_list(*o.scenarios)) c.scenarios.push_back(parse_scenario(t));
        if (c.scenarios.empty()) throw ConfigError("--scenario: empty list");
    }
    if (o.distances) {
        std::vector<std::string> parts;
        std::stringstream ss(*o.distances);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw ConfigError("--distances: expected start_km:stop_km:points");
        try {
            c.sweep.distance_start_km = std::stod(parts[0]);
            c.sweep.distance_stop_km = std::stod(parts[1]);
            c.sweep.distance_points = static_cast<std::size_t>(std::stoul(parts[2]));
        } catch (const std::exception&) {
            throw ConfigError("--distances: cannot parse '" + *o.distances + "' (km:km:count)");
        }
    }
    if (o.n_total) c.scale.n_total = *o.n_total;
    if (o.seed) c.swarm.seed = *o.seed;
    if (o.workers) c.sweep.workers = c.swarm.workers = *o.workers;
}

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_header(std::ostream& out, Config& c, const std::string& command) {
    const auto lines = resolved_lines(c);
    char hash[16];
    std::snprintf(hash, sizeof hash, "%08x", config_hash(lines));
    out << "# mdiqkd " << MDIQKD_VERSION << "\n# subcommand: " << command << "\n# config_crc32: " << hash << "\n";
    for (const auto& l : lines) out << "# " << l << "\n";
}

// Lazily built spectra shared by the scenario runners.
class Sources {
public:
    explicit Sources(const Config& c) : c_(c) {}

    const SpdcSpectrum& spdc() {
        if (!spdc_) spdc_ = build_spdc_spectrum(c_.spdc);
        return *spdc_;
    }
    const SpectralAmplitude& wcp() {
        if (!wcp_) wcp_ = build_wcp_amplitude(c_.wcp, spdc().grid);
        return *wcp_;
    }
    SourcePair pair(Scenario s) {
        if (s == Scenario::ww) return {SourceModel::wcp(), SourceModel::wcp()};
        return make_sources(s, spdc(), wcp(), c_.local);
    }
    LinkModel link(Scenario s) {
        auto p = pair(s);
        return LinkModel(p.a, p.b, c_.channel.relay, c_.channel.misalignment);
    }

private:
    const Config& c_;
    std::optional<SpdcSpectrum> spdc_;
    std::optional<SpectralAmplitude> wcp_;
};

inline void require_scenario_sources(const Config& c, const std::string& command) {
    for (auto s : c.scenarios) {
        if (s != Scenario::ww) require_sections(c, {"source.spdc"}, command);
        if (s == Scenario::ws) require_sections(c, {"source.wcp"}, command);
    }
}

// Runs f(i) for i in [0, n) on up to `workers` threads; the first exception
// is rethrown after all threads finish.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F f) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lk(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

inline const char* param_columns() {
    return "a_nu,a_mu,a_pz_nu,a_pz_mu,a_px_nu,a_px_mu,b_nu,b_mu,b_pz_nu,b_pz_mu,b_px_nu,b_px_mu";
}

inline std::string param_cells(const ProtocolParams& p) {
    std::string s;
    for (double v : p.to_array()) s += "," + num(v);
    return s;
}

inline SearchSpace space_for(Scenario s) {
    SearchSpace sp;
    sp.symmetric = s != Scenario::ws;
    return sp;
}

struct OptimizedCurve {
    Scenario scenario;
    std::vector<SweepPoint> points;
    std::vector<KeyRateResult> results;  // re-evaluated at each optimum
    SearchSpace space;
};

// Distance continuation for one scenario at the configured scale.
inline OptimizedCurve optimize_distances(const Config& c, const LinkModel& link, Scenario s,
                                         const std::vector<double>& grid, const ExperimentScale& scale) {
    OptimizedCurve out{s, {}, {}, space_for(s)};
    const auto decoy = c.decoy();
    const auto space = out.space;
    auto family = [&](std::size_t k) -> Objective {
        const auto chan = ChannelParams::symmetric(grid[k], c.channel);
        return [&link, &space, chan, &scale, decoy](const Point& x) {
            return search_score(link.rate_at(chan, space.to_params(x), scale, decoy));
        };
    };
    out.points = continuation_sweep(family, grid, space, c.swarm, c.local_search);
    for (const auto& p : out.points)
        out.results.push_back(
            link.rate_at(ChannelParams::symmetric(p.coordinate, c.channel), space.to_params(p.best), scale, decoy));
    return out;
}

// Size continuation at a fixed distance. The search runs from the largest
// size down, where the rate is easiest to find, and rows are returned in
// ascending order.
inline OptimizedCurve optimize_sizes(const Config& c, const LinkModel& link, Scenario s, const std::vector<double>& sizes,
                                     double distance_km, bool asymptotic) {
    OptimizedCurve out{s, {}, {}, space_for(s)};
    const auto decoy = c.decoy();
    const auto space = out.space;
    const auto chan = ChannelParams::symmetric(distance_km, c.channel);
    const std::vector<double> down(sizes.rbegin(), sizes.rend());
    auto family = [&](std::size_t k) -> Objective {
        const ExperimentScale scale{down[k], asymptotic};
        return [&link, &space, chan, scale, decoy](const Point& x) {
            return search_score(link.rate_at(chan, space.to_params(x), scale, decoy));
        };
    };
    out.points = continuation_sweep(family, down, space, c.swarm, c.local_search);
    std::reverse(out.points.begin(), out.points.end());
    for (std::size_t k = 0; k < out.points.size(); ++k) out.points[k].index = k;
    for (std::size_t k = 0; k < out.points.size(); ++k)
        out.results.push_back(
            link.rate_at(chan, space.to_params(out.points[k].best), ExperimentScale{sizes[k], asymptotic}, decoy));
    return out;
}

inline int run_schmidt(Config& c, std::ostream& out) {
    require_sections(c, {"source.spdc"}, "schmidt");
    const auto sp = build_spdc_spectrum(c.spdc);
    write_header(out, c, "schmidt");
    out << "# purity: " << num(purity(sp.schmidt.all_lambdas)) << "\n# residual: " << num(sp.schmidt.residual)
        << "\n# modes_kept: " << sp.schmidt.cutoff() << "\n";
    out << "mode,lambda,cumulative\n";
    double cum = 0.0;
    for (std::size_t i = 0; i < sp.schmidt.lambdas.size(); ++i) {
        cum += sp.schmidt.lambdas[i];
        out << i << "," << num(sp.schmidt.lambdas[i]) << "," << num(cum) << "\n";
    }
    return ok;
}

// Dip scan. Heralded SPDC signals are mixtures over Schmidt modes, so the
// overlap is Tr(rho_A rho_B(tau)) = sum_ij w_i w_j |<a_i|b_j(tau)>|^2.
inline int run_hom(Config& c, std::ostream& out) {
    require_sections(c, {"source.spdc", "source.wcp", "hom"}, "hom");
    const auto& h = c.hom;
    if (h.pair != "wcp-wcp" && h.pair != "wcp-spdc" && h.pair != "spdc-spdc")
        throw ConfigError("[hom] pair: unknown value '" + h.pair + "' (expected wcp-wcp, wcp-spdc or spdc-spdc)");
    if (h.delay_points < 2) throw ConfigError("[hom] delay_points must be at least 2");
    Sources src(c);
    const auto& sd = src.spdc().schmidt;
    const auto& w = src.wcp();
    struct Mix {
        std::vector<double> weights;
        std::vector<const SpectralAmplitude*> modes;
    };
    auto wcp_mix = [&] { return Mix{{1.0}, {&w}}; };
    auto spdc_mix = [&] {
        Mix m;
        double total = 0.0;
        for (double l : sd.lambdas) total += l;
        for (std::size_t i = 0; i < sd.lambdas.size(); ++i) {
            m.weights.push_back(sd.lambdas[i] / total);
            m.modes.push_back(&sd.signal_modes[i]);
        }
        return m;
    };
    const Mix ma = h.pair == "spdc-spdc" ? spdc_mix() : wcp_mix();
    const Mix mb = h.pair == "wcp-wcp" ? wcp_mix() : spdc_mix();
    const DetectorPair det{h.detector_efficiency, h.detector_efficiency};
    write_header(out, c, "hom");
    out << "delay_ps,overlap,coincidence_single_photon,coincidence_coherent\n";
    for (std::size_t k = 0; k < h.delay_points; ++k) {
        const double t_ps =
            h.delay_start_ps + (h.delay_stop_ps - h.delay_start_ps) * static_cast<double>(k) / (h.delay_points - 1.0);
        const double tau = units::ps_to_s(t_ps);
        double ov = 0.0;
        cdouble single_c{0.0, 0.0};
        for (std::size_t i = 0; i < ma.modes.size(); ++i)
            for (std::size_t j = 0; j < mb.modes.size(); ++j) {
                const cdouble c_ij = delayed_overlap(*ma.modes[i], *mb.modes[j], tau);
                ov += ma.weights[i] * mb.weights[j] * std::norm(c_ij);
                if (i == 0 && j == 0) single_c = c_ij;
            }
        ov = std::min(ov, 1.0);
        const auto p1 = coincidence_single_photon(std::sqrt(ov), det).probability;
        out << num(t_ps) << "," << num(ov) << "," << num(p1) << ",";
        if (h.pair == "wcp-wcp") {
            const auto pc = coincidence_coherent(std::sqrt(h.mean_photon_number_a), std::sqrt(h.mean_photon_number_b),
                                                 single_c, det);
            out << num(pc.probability);
        }
        out << "\n";
    }
    return ok;
}

inline int run_pnd(Config& c, std::ostream& out) {
    require_sections(c, {"pnd", "channel"}, "pnd");
    const auto& p = c.pnd;
    SourceModel model = SourceModel::wcp();
    std::optional<double> trigger;
    if (p.source == "spdc") {
        require_sections(c, {"source.spdc"}, "pnd");
        Sources src(c);
        model = SourceModel::spdc(src.spdc().schmidt.lambdas, c.local);
        trigger = trigger_probability(model.modal(p.mean_photon_number).mu, c.local);
    } else if (p.source != "wcp") {
        throw ConfigError("[pnd] source: unknown value '" + p.source + "' (expected wcp or spdc)");
    }
    const auto emitted = model.emission(p.mean_photon_number, p.n_max);
    const auto arriving = model.arriving(p.mean_photon_number, p.transmittance, p.n_max);
    const auto reference = poisson_pnd(p.mean_photon_number * p.transmittance, p.n_max, 1.0);
    write_header(out, c, "pnd");
    if (trigger) out << "# trigger_probability: " << num(*trigger) << "\n";
    out << "# emitted_tail: " << num(emitted.tail) << "\n# arriving_tail: " << num(arriving.tail) << "\n";
    out << "n,emitted,arriving,poisson_reference\n";
    for (std::size_t n = 0; n <= p.n_max; ++n)
        out << n << "," << num(emitted[n]) << "," << num(arriving[n]) << "," << num(reference[n]) << "\n";
    return ok;
}

inline int run_keyrate(Config& c, std::ostream& out) {
    require_sections(c, {"channel", "finite", "params"}, "keyrate");
    require_scenario_sources(c, "keyrate");
    Sources src(c);
    write_header(out, c, "keyrate");
    out << "scenario,distance_km,rate,raw_rate,q_z_mumu,e_z_mumu,y11_lower,e11_upper,visibility,diagnostic\n";
    bool any_infeasible = false;
    for (auto s : c.scenarios) {
        const auto link = src.link(s);
        const auto r = link.rate_at(ChannelParams::symmetric(c.distance_km, c.channel), c.params, c.scale, c.decoy());
        any_infeasible = any_infeasible || r.infeasible;
        out << to_string(s) << "," << num(c.distance_km) << "," << num(r.rate) << "," << num(r.raw_rate) << ","
            << num(r.q_z_mumu) << "," << num(r.e_z_mumu) << "," << num(r.y11_lower) << "," << num(r.e11_upper) << ","
            << num(link.visibility()) << "," << r.diagnostic << "\n";
    }
    return any_infeasible ? infeasible : ok;
}

// Optimized rate against distance, one block of rows per scenario. Scenarios
// run concurrently when sweep workers allow; particles use optimizer workers.
inline int run_sweep_distance(Config& c, std::ostream& out, const std::string& command) {
    require_sections(c, {"channel", "finite", "optimizer", "sweep"}, command);
    require_scenario_sources(c, command);
    const auto grid = c.sweep.distances();
    Sources src(c);
    std::vector<LinkModel> links;
    for (auto s : c.scenarios) links.push_back(src.link(s));
    std::vector<OptimizedCurve> curves(c.scenarios.size());
    parallel_for(c.scenarios.size(), c.sweep.workers, [&](std::size_t i) {
        curves[i] = optimize_distances(c, links[i], c.scenarios[i], grid, c.scale);
    });
    write_header(out, c, command);
    out << "scenario,index,distance_km,rate,y11_lower,e11_upper,restarted," << param_columns() << "\n";
    for (const auto& cv : curves)
        for (std::size_t k = 0; k < cv.points.size(); ++k) {
            const auto& p = cv.points[k];
            const auto& r = cv.results[k];
            out << to_string(cv.scenario) << "," << p.index << "," << num(p.coordinate) << "," << num(r.rate) << ","
                << num(r.y11_lower) << "," << num(r.e11_upper) << "," << (p.restarted ? 1 : 0)
                << param_cells(cv.space.to_params(p.best)) << "\n";
        }
    return ok;
}

inline int run_sweep_size(Config& c, std::ostream& out) {
    require_sections(c, {"channel", "finite", "optimizer", "sweep"}, "sweep-size");
    require_scenario_sources(c, "sweep-size");
    const auto sizes = c.sweep.sizes();
    Sources src(c);
    std::vector<LinkModel> links;
    for (auto s : c.scenarios) links.push_back(src.link(s));
    const std::size_t n = c.scenarios.size();
    std::vector<OptimizedCurve> curves(2 * n);
    parallel_for(2 * n, c.sweep.workers, [&](std::size_t i) {
        const std::size_t k = i % n;
        if (i < n)
            curves[i] = optimize_sizes(c, links[k], c.scenarios[k], sizes, c.sweep.size_distance_km, false);
        else
            curves[i] = optimize_sizes(c, links[k], c.scenarios[k], {sizes.back()}, c.sweep.size_distance_km, true);
    });
    write_header(out, c, "sweep-size");
    out << "scenario,mode,index,n_total,distance_km,rate," << param_columns() << "\n";
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i : {k, k + n}) {
            const auto& cv = curves[i];
            for (std::size_t j = 0; j < cv.points.size(); ++j) {
                const auto& p = cv.points[j];
                out << to_string(cv.scenario) << "," << (i < n ? "finite" : "asymptotic") << "," << p.index << ","
                    << (i < n ? num(p.coordinate) : std::string("inf")) << "," << num(c.sweep.size_distance_km) << ","
                    << num(cv.results[j].rate) << param_cells(cv.space.to_params(p.best)) << "\n";
            }
        }
    return ok;
}

inline int run_fixed_params(Config& c, std::ostream& out) {
    require_sections(c, {"channel", "finite", "sweep", "fixed"}, "fixed-params");
    if (c.fixed.include_optimized) require_sections(c, {"optimizer"}, "fixed-params");
    require_scenario_sources(c, "fixed-params");
    const auto grid = c.sweep.distances();
    Sources src(c);
    write_header(out, c, "fixed-params");
    out << "scenario,curve,index,distance_km,rate\n";
    for (auto s : c.scenarios) {
        const auto link = src.link(s);
        if (c.fixed.include_optimized) {
            const auto cv = optimize_distances(c, link, s, grid, c.scale);
            for (std::size_t k = 0; k < cv.points.size(); ++k)
                out << to_string(s) << ",optimized," << k << "," << num(grid[k]) << "," << num(cv.results[k].rate)
                    << "\n";
        }
        for (const auto& name : c.fixed.vectors) {
            const ProtocolParams pp = name == "params" ? c.params : table_vector(name);
            if (!pp.a.feasible() || !pp.b.feasible()) throw ConfigError("[fixed] vector '" + name + "' is infeasible");
            std::vector<KeyRateResult> rs(grid.size());
            parallel_for(grid.size(), c.sweep.workers, [&](std::size_t k) {
                rs[k] = link.rate_at(ChannelParams::symmetric(grid[k], c.channel), pp, c.scale, c.decoy());
            });
            for (std::size_t k = 0; k < grid.size(); ++k)
                out << to_string(s) << "," << name << "," << k << "," << num(grid[k]) << "," << num(rs[k].rate) << "\n";
        }
    }
    return ok;
}

inline int run(const std::string& command, Config& c, std::ostream& out) {
    if (command == "schmidt") return run_schmidt(c, out);
    if (command == "hom") return run_hom(c, out);
    if (command == "pnd") return run_pnd(c, out);
    if (command == "keyrate") return run_keyrate(c, out);
    if (command == "optimize" || command == "sweep-distance") return run_sweep_distance(c, out, command);
    if (command == "sweep-size") return run_sweep_size(c, out);
    if (command == "fixed-params") return run_fixed_params(c, out);
    throw ConfigError("unknown subcommand '" + command + "'");
}

// Maps library exceptions to exit codes and writes the diagnostic.
template <class F>
int guarded(F f, std::ostream& err) {
    try {
        return f();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << "\n";
        return infeasible;
    } catch (const UnboundedError& e) {
        err << "infeasible: " << e.what() << "\n";
        return infeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return numeric_error;
    }
}

}  // namespace mdiqkd::cli
