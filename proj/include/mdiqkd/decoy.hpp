#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mdiqkd/chernoff.hpp"
#include "mdiqkd/error.hpp"
#include "mdiqkd/lp.hpp"
#include "mdiqkd/photon_stats.hpp"

// Three-intensity decoy analysis: observed gains and error counts for every
// (intensity_A, intensity_B) pair in both bases are turned into lower/upper
// expected-value bounds, fed to linear programs over the yields Y_mn
// (m, n <= N_max), and the resulting bounds are mapped back to observed
// values.
namespace mdiqkd {

enum class Basis { z = 0, x = 1 };
enum class Intensity { signal = 0, decoy = 1, vacuum = 2 };

inline constexpr std::array<Basis, 2> all_bases{Basis::z, Basis::x};
inline constexpr std::array<Intensity, 3> all_intensities{Intensity::signal, Intensity::decoy, Intensity::vacuum};

inline const char* to_string(Basis b) { return b == Basis::z ? "Z" : "X"; }
inline const char* to_string(Intensity i) {
    switch (i) {
        case Intensity::signal: return "mu";
        case Intensity::decoy: return "nu";
        case Intensity::vacuum: return "vac";
    }
    return "?";
}

struct DecoyCell {
    double gain = 0.0;        // Q, per pulse
    double error_rate = 0.0;  // E
    double pulses = 0.0;      // N_ab

    double clicks() const { return gain * pulses; }
    double errors() const { return error_rate * gain * pulses; }
};

class DecoyObservations {
public:
    DecoyCell& at(Basis b, Intensity a, Intensity c) { return cells_[idx(b)][idx(a)][idx(c)]; }
    const DecoyCell& at(Basis b, Intensity a, Intensity c) const { return cells_[idx(b)][idx(a)][idx(c)]; }

    void validate() const {
        for (const auto& per_basis : cells_)
            for (const auto& row : per_basis)
                for (const auto& cell : row) {
                    if (!(cell.gain >= 0.0 && cell.gain <= 1.0)) throw DomainError("DecoyObservations: gain outside [0,1]");
                    if (!(cell.error_rate >= 0.0 && cell.error_rate <= 1.0))
                        throw DomainError("DecoyObservations: error rate outside [0,1]");
                    if (!(cell.pulses >= 0.0)) throw DomainError("DecoyObservations: negative pulse count");
                }
    }

private:
    template <class E>
    static std::size_t idx(E e) { return static_cast<std::size_t>(e); }
    std::array<std::array<std::array<DecoyCell, 3>, 3>, 2> cells_{};
};

// Emission photon-number probabilities for the three intensities of one
// party, truncated at N_max. `mass` is the total probability the full
// distribution carries (the trigger probability for a heralded source).
struct PhotonMixture {
    std::array<std::vector<double>, 3> probs;
    std::array<double, 3> mass{1.0, 1.0, 1.0};

    static PhotonMixture from(const std::array<PhotonNumberDistribution, 3>& pnds, std::size_t n_max) {
        PhotonMixture mix;
        for (std::size_t a = 0; a < 3; ++a) {
            mix.probs[a].assign(n_max + 1, 0.0);
            for (std::size_t n = 0; n <= n_max; ++n) mix.probs[a][n] = pnds[a][n];
            mix.mass[a] = pnds[a].mass;
        }
        return mix;
    }

    const std::vector<double>& operator[](Intensity i) const { return probs[static_cast<std::size_t>(i)]; }
    double total(Intensity i) const { return mass[static_cast<std::size_t>(i)]; }
    double captured(Intensity i) const {
        double s = 0.0;
        for (double p : (*this)[i]) s += p;
        return s;
    }
    double remainder(Intensity i) const { return std::max(0.0, total(i) - captured(i)); }
};

struct DecoyOptions {
    TailBound tail{1e-7};
    std::size_t n_max = 6;
    bool finite = true;  // false: use the observations as exact expectations
};

struct YieldBounds {
    double y11_lower = 0.0;          // Z basis, observed level
    double y11_x_lower = 0.0;        // X basis, observed level
    double e11y11_upper = 0.0;       // X basis, observed level
    double e11_upper = 1.0;
    bool e11_degenerate = false;     // Y11 lower bound vanished; e11 clamped
    // Expected-value level LP optima before the final fluctuation step.
    double y11_expected = 0.0;
    double y11_x_expected = 0.0;
    double e11y11_expected = 0.0;
};

namespace detail {

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

inline Interval rate_interval(double count, double pulses, const DecoyOptions& opt) {
    if (!opt.finite) return {count / pulses, count / pulses};
    const auto e = expected_interval(count, opt.tail);
    return {e.lower / pulses, e.upper / pulses};
}

inline std::size_t var(std::size_t m, std::size_t n, std::size_t n_max) { return m * (n_max + 1) + n; }

// Builds and solves one yield LP. `use_errors` selects the E*Q constraints.
inline double yield_lp(const DecoyObservations& obs, Basis basis, const PhotonMixture& mix_a, const PhotonMixture& mix_b,
                       const DecoyOptions& opt, bool use_errors, Sense sense) {
    const std::size_t nm = opt.n_max + 1;
    LinearProgram lp;
    lp.objective.assign(nm * nm, 0.0);
    lp.objective[var(1, 1, opt.n_max)] = 1.0;
    lp.sense = sense;
    lp.upper.assign(nm * nm, 1.0);
    for (Intensity a : all_intensities)
        for (Intensity b : all_intensities) {
            const auto& cell = obs.at(basis, a, b);
            if (cell.pulses <= 0.0) continue;
            const double count = use_errors ? cell.errors() : cell.clicks();
            const Interval q = rate_interval(count, cell.pulses, opt);
            std::vector<double> row(nm * nm, 0.0);
            double captured = 0.0;
            for (std::size_t m = 0; m < nm; ++m)
                for (std::size_t n = 0; n < nm; ++n) {
                    const double p = mix_a[a][m] * mix_b[b][n];
                    row[var(m, n, opt.n_max)] = p;
                    captured += p;
                }
            const double rem = std::max(0.0, mix_a.total(a) * mix_b.total(b) - captured);
            lp.add(row, Relation::less_equal, q.upper);
            if (q.lower - rem > 0.0) lp.add(std::move(row), Relation::greater_equal, q.lower - rem);
        }
    const auto r = lp_solve_or_throw(lp);
    return r.value;
}

}  // namespace detail

inline YieldBounds lp_yield_bounds(const DecoyObservations& obs, const PhotonMixture& mix_a,
                                   const PhotonMixture& mix_b, const DecoyOptions& opt = {}) {
    obs.validate();
    if (opt.n_max < 1) throw DomainError("lp_yield_bounds: N_max must be at least 1");
    for (Basis b : all_bases)
        if (obs.at(b, Intensity::signal, Intensity::signal).pulses <= 0.0)
            throw DomainError("lp_yield_bounds: no signal-signal pulses recorded");

    YieldBounds out;
    out.y11_expected = detail::yield_lp(obs, Basis::z, mix_a, mix_b, opt, false, Sense::minimize);
    out.y11_x_expected = detail::yield_lp(obs, Basis::x, mix_a, mix_b, opt, false, Sense::minimize);
    out.e11y11_expected = detail::yield_lp(obs, Basis::x, mix_a, mix_b, opt, true, Sense::maximize);

    // Expected single-pair counts in the signal-signal cell of each basis set
    // the scale of the final fluctuation step.
    const double p11 = mix_a[Intensity::signal][1] * mix_b[Intensity::signal][1];
    auto observed_lower = [&](double y, Basis b) {
        const double k = obs.at(b, Intensity::signal, Intensity::signal).pulses * p11;
        if (!opt.finite || y <= 0.0 || k <= 0.0) return std::max(y, 0.0);
        return chernoff_observed_bounds(k * y, opt.tail).lower / k;
    };
    auto observed_upper = [&](double y, Basis b) {
        const double k = obs.at(b, Intensity::signal, Intensity::signal).pulses * p11;
        if (!opt.finite || y <= 0.0 || k <= 0.0) return std::max(y, 0.0);
        return chernoff_observed_bounds(k * y, opt.tail).upper / k;
    };
    out.y11_lower = observed_lower(out.y11_expected, Basis::z);
    out.y11_x_lower = observed_lower(out.y11_x_expected, Basis::x);
    out.e11y11_upper = observed_upper(out.e11y11_expected, Basis::x);

    if (out.y11_x_lower <= 0.0) {
        out.e11_upper = 1.0;
        out.e11_degenerate = true;
    } else {
        out.e11_upper = out.e11y11_upper / out.y11_x_lower;
        if (out.e11_upper > 1.0) {
            out.e11_upper = 1.0;
            out.e11_degenerate = true;
        }
    }
    return out;
}

// CSV: basis,intensity_A,intensity_B,pulses,clicks,errors
inline void write_observations_csv(std::ostream& os, const DecoyObservations& obs) {
    os << "basis,intensity_A,intensity_B,pulses,clicks,errors\n";
    os.precision(17);
    for (Basis b : all_bases)
        for (Intensity a : all_intensities)
            for (Intensity c : all_intensities) {
                const auto& cell = obs.at(b, a, c);
                os << to_string(b) << ',' << to_string(a) << ',' << to_string(c) << ',' << cell.pulses << ','
                   << cell.clicks() << ',' << cell.errors() << '\n';
            }
}

inline DecoyObservations read_observations_csv(std::istream& is) {
    auto parse_basis = [](const std::string& s) {
        if (s == "Z" || s == "z") return Basis::z;
        if (s == "X" || s == "x") return Basis::x;
        throw ConfigError("observations csv: unknown basis '" + s + "'");
    };
    auto parse_intensity = [](const std::string& s) {
        if (s == "mu") return Intensity::signal;
        if (s == "nu") return Intensity::decoy;
        if (s == "vac" || s == "0") return Intensity::vacuum;
        throw ConfigError("observations csv: unknown intensity '" + s + "'");
    };
    DecoyObservations obs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("basis", 0) == 0) continue;
        std::stringstream ss(line);
        std::string f[6];
        for (auto& s : f)
            if (!std::getline(ss, s, ',')) throw ConfigError("observations csv: short row at line " + std::to_string(lineno));
        try {
            auto& cell = obs.at(parse_basis(f[0]), parse_intensity(f[1]), parse_intensity(f[2]));
            cell.pulses = std::stod(f[3]);
            const double clicks = std::stod(f[4]);
            const double errors = std::stod(f[5]);
            if (cell.pulses < 0.0 || clicks < 0.0 || errors < 0.0 || errors > clicks || clicks > cell.pulses)
                throw ConfigError("observations csv: inconsistent counts at line " + std::to_string(lineno));
            cell.gain = cell.pulses > 0.0 ? clicks / cell.pulses : 0.0;
            cell.error_rate = clicks > 0.0 ? errors / clicks : 0.0;
        } catch (const std::invalid_argument&) {
            throw ConfigError("observations csv: bad number at line " + std::to_string(lineno));
        }
    }
    return obs;
}

inline void write_bounds_csv(std::ostream& os, const YieldBounds& b) {
    os.precision(17);
    os << "quantity,value\n"
       << "y11_lower," << b.y11_lower << '\n'
       << "y11_x_lower," << b.y11_x_lower << '\n'
       << "e11y11_upper," << b.e11y11_upper << '\n'
       << "e11_upper," << b.e11_upper << '\n'
       << "e11_degenerate," << (b.e11_degenerate ? 1 : 0) << '\n';
}

}  // namespace mdiqkd
