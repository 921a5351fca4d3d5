#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mdiqkd/error.hpp"
#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/optimizer.hpp"
#include "mdiqkd/scenario.hpp"

// INI configuration. Every key carries its unit in the name; an unknown key is
// an error, and when its stem matches a known key the message names the unit
// that key expects (filter_fwhm_thz -> "expects GHz as filter_fwhm_ghz").
namespace mdiqkd {

struct SweepSpec {
    double distance_start_km = 0.0;
    double distance_stop_km = 200.0;
    std::size_t distance_points = 41;
    double size_min = 1e8;
    double size_max = 1e14;
    std::size_t size_points_per_decade = 1;
    double size_distance_km = 10.0;
    std::size_t workers = 1;

    std::vector<double> distances() const {
        if (distance_points == 0) throw ConfigError("[sweep] distance_points must be positive");
        if (distance_points == 1) return {distance_start_km};
        std::vector<double> g(distance_points);
        for (std::size_t i = 0; i < distance_points; ++i)
            g[i] = distance_start_km +
                   (distance_stop_km - distance_start_km) * static_cast<double>(i) / static_cast<double>(distance_points - 1);
        return g;
    }

    std::vector<double> sizes() const {
        if (!(size_min > 0.0 && size_max >= size_min)) throw ConfigError("[sweep] need 0 < size_min <= size_max");
        if (size_points_per_decade == 0) throw ConfigError("[sweep] size_points_per_decade must be positive");
        const double decades = std::log10(size_max / size_min);
        const auto n = static_cast<std::size_t>(std::llround(decades * static_cast<double>(size_points_per_decade)));
        std::vector<double> g;
        for (std::size_t i = 0; i <= n; ++i)
            g.push_back(size_min * std::pow(10.0, static_cast<double>(i) / static_cast<double>(size_points_per_decade)));
        return g;
    }
};

struct HomSpec {
    std::string pair = "wcp-spdc";  // wcp-wcp, wcp-spdc, spdc-spdc
    double delay_start_ps = -20.0;
    double delay_stop_ps = 20.0;
    std::size_t delay_points = 81;
    double mean_photon_number_a = 0.1;
    double mean_photon_number_b = 0.1;
    double detector_efficiency = 1.0;
};

struct PndSpec {
    std::string source = "spdc";
    double mean_photon_number = 0.1;
    double transmittance = 1.0;
    std::size_t n_max = 20;
};

struct FixedSpec {
    std::vector<std::string> vectors{"p1", "p2", "p3"};
    bool include_optimized = true;
};

struct Config {
    SpdcSpectralConfig spdc;
    WcpSpectralConfig wcp;
    ChannelParams channel;
    LocalDetector local;
    ExperimentScale scale;
    double failure_probability = 1e-7;
    std::size_t n_max = 6;
    std::vector<Scenario> scenarios{Scenario::ww, Scenario::ss, Scenario::ws};
    SweepSpec sweep;
    SwarmConfig swarm;
    LocalSearchConfig local_search;
    double distance_km = 0.0;
    ProtocolParams params;
    HomSpec hom;
    PndSpec pnd;
    FixedSpec fixed;

    std::set<std::string> sections;  // sections present in the file

    DecoyOptions decoy() const {
        DecoyOptions o;
        o.tail = TailBound(failure_probability);
        o.n_max = n_max;
        return o;
    }
    bool has(const std::string& s) const { return sections.count(s) > 0; }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct Field {
    std::string section;
    std::string key;
    std::string unit;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

inline std::string where(const Field& f) { return "[" + f.section + "] " + f.key; }

inline double parse_double(const Field& f, const std::string& v) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || trim(v.substr(pos)).size() != 0)
        throw ConfigError(where(f) + ": cannot parse '" + v + "' as a number in " + f.unit);
    return x;
}

inline std::size_t parse_count(const Field& f, const std::string& v) {
    const double x = parse_double(f, v);
    if (x < 0.0 || x != std::floor(x)) throw ConfigError(where(f) + ": expected a non-negative integer, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

inline bool parse_bool(const Field& f, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(where(f) + ": expected true or false, got '" + v + "'");
}

class Registry {
public:
    void real(std::string sec, std::string key, std::string unit, double& ref) {
        add(sec, key, unit, [&ref](const Field& f, const std::string& v) { ref = parse_double(f, v); },
            [&ref] { return fmt(ref); });
    }
    void count(std::string sec, std::string key, std::string unit, std::size_t& ref) {
        add(sec, key, unit, [&ref](const Field& f, const std::string& v) { ref = parse_count(f, v); },
            [&ref] { return std::to_string(ref); });
    }
    void integer(std::string sec, std::string key, std::string unit, int& ref) {
        add(sec, key, unit, [&ref](const Field& f, const std::string& v) { ref = static_cast<int>(parse_count(f, v)); },
            [&ref] { return std::to_string(ref); });
    }
    void seed(std::string sec, std::string key, std::uint64_t& ref) {
        add(sec, key, "integer", [&ref](const Field& f, const std::string& v) { ref = parse_count(f, v); },
            [&ref] { return std::to_string(ref); });
    }
    void flag(std::string sec, std::string key, bool& ref) {
        add(sec, key, "true/false", [&ref](const Field& f, const std::string& v) { ref = parse_bool(f, v); },
            [&ref] { return ref ? std::string("true") : std::string("false"); });
    }
    void optional_real(std::string sec, std::string key, std::string unit, std::optional<double>& ref) {
        add(sec, key, unit, [&ref](const Field& f, const std::string& v) { ref = parse_double(f, v); },
            [&ref] { return ref ? fmt(*ref) : std::string("none"); });
    }
    void text(std::string sec, std::string key, std::string unit, std::string& ref) {
        add(sec, key, unit, [&ref](const Field&, const std::string& v) { ref = v; }, [&ref] { return ref; });
    }
    void custom(std::string sec, std::string key, std::string unit, std::function<void(const std::string&)> set,
                std::function<std::string()> get) {
        fields_.push_back({std::move(sec), std::move(key), std::move(unit), std::move(set), std::move(get)});
    }

    const std::vector<Field>& fields() const { return fields_; }

    const Field* find(const std::string& sec, const std::string& key) const {
        for (const auto& f : fields_)
            if (f.section == sec && f.key == key) return &f;
        return nullptr;
    }
    bool known_section(const std::string& sec) const {
        return std::any_of(fields_.begin(), fields_.end(), [&](const Field& f) { return f.section == sec; });
    }

    // Message for an unknown key: same stem with another unit suffix, or a list.
    std::string unknown_key(const std::string& sec, const std::string& key) const {
        const auto stem = [](const std::string& k) {
            const auto p = k.rfind('_');
            return p == std::string::npos ? k : k.substr(0, p);
        };
        for (const auto& f : fields_)
            if (f.section == sec && stem(f.key) == stem(key) && stem(key) != key)
                return "unknown key '" + key + "' in [" + sec + "]: expects " + f.unit + " as '" + f.key + "'";
        std::string list;
        for (const auto& f : fields_)
            if (f.section == sec) list += (list.empty() ? "" : ", ") + f.key + " (" + f.unit + ")";
        return "unknown key '" + key + "' in [" + sec + "]; known keys: " + list;
    }

private:
    template <class P, class G>
    void add(std::string sec, std::string key, std::string unit, P parse, G get) {
        Field f{std::move(sec), std::move(key), std::move(unit), {}, std::move(get)};
        const Field copy = f;
        f.set = [parse, copy](const std::string& v) { parse(copy, v); };
        fields_.push_back(std::move(f));
    }
    std::vector<Field> fields_;
};

inline void bind_party(Registry& r, const std::string& prefix, PartyParams& p) {
    r.real("params", prefix + "_nu", "mean photons per pulse", p.nu);
    r.real("params", prefix + "_mu", "mean photons per pulse", p.mu);
    r.real("params", prefix + "_pz_nu", "probability", p.pz_nu);
    r.real("params", prefix + "_pz_mu", "probability", p.pz_mu);
    r.real("params", prefix + "_px_nu", "probability", p.px_nu);
    r.real("params", prefix + "_px_mu", "probability", p.px_mu);
}

inline Registry registry(Config& c) {
    Registry r;
    auto& s = c.spdc;
    r.real("source.spdc", "pump_wavelength_nm", "nm", s.pump_wavelength_nm);
    r.real("source.spdc", "pump_sigma_ps", "ps", s.pump_sigma_ps);
    r.integer("source.spdc", "filter_order", "integer", s.filter_order);
    r.real("source.spdc", "filter_fwhm_ghz", "GHz", s.filter_fwhm_ghz);
    r.count("source.spdc", "grid_points", "integer", s.grid_points);
    r.real("source.spdc", "span_factor", "multiple of the marginal width", s.span_factor);
    r.count("source.spdc", "modes", "integer (0 = by tolerance)", s.modes);
    r.real("source.spdc", "mode_tolerance", "fraction of total weight", s.mode_tolerance);
    r.count("source.spdc", "max_modes", "integer", s.max_modes);
    r.optional_real("source.spdc", "crystal_length_m", "m", s.crystal_length_m);
    r.real("source.spdc", "mismatch_s_per_m", "s/m", s.mismatch_per_rad_s);

    r.real("source.wcp", "wavelength_nm", "nm", c.wcp.wavelength_nm);
    r.real("source.wcp", "sigma_ps", "ps", c.wcp.sigma_ps);
    r.integer("source.wcp", "filter_order", "integer", c.wcp.filter_order);
    r.real("source.wcp", "filter_fwhm_ghz", "GHz", c.wcp.filter_fwhm_ghz);

    r.real("channel", "attenuation_db_per_km", "dB/km", c.channel.attenuation_db_per_km);
    r.real("channel", "misalignment", "probability", c.channel.misalignment);
    r.real("channel", "relay_efficiency", "fraction", c.channel.relay.efficiency);
    r.real("channel", "relay_dark_count", "probability per gate", c.channel.relay.dark_count);
    r.real("channel", "local_efficiency", "fraction", c.local.efficiency);
    r.real("channel", "local_dark_count", "probability per gate", c.local.dark_count);

    r.real("finite", "n_total", "pulses", c.scale.n_total);
    r.real("finite", "failure_probability", "probability", c.failure_probability);
    r.count("finite", "n_max", "photon number", c.n_max);
    r.flag("finite", "asymptotic", c.scale.asymptotic);

    r.custom(
        "scenario", "scenarios", "list of ww, ss, ws",
        [&c](const std::string& v) {
            c.scenarios.clear();
            for (const auto& t : split_list(v)) c.scenarios.push_back(parse_scenario(t));
            if (c.scenarios.empty()) throw ConfigError("[scenario] scenarios: empty list");
        },
        [&c] {
            std::string out;
            for (auto sc : c.scenarios) out += (out.empty() ? "" : ",") + std::string(to_string(sc));
            return out;
        });

    auto& w = c.sweep;
    r.real("sweep", "distance_start_km", "km", w.distance_start_km);
    r.real("sweep", "distance_stop_km", "km", w.distance_stop_km);
    r.count("sweep", "distance_points", "integer", w.distance_points);
    r.real("sweep", "size_min", "pulses", w.size_min);
    r.real("sweep", "size_max", "pulses", w.size_max);
    r.count("sweep", "size_points_per_decade", "integer", w.size_points_per_decade);
    r.real("sweep", "size_distance_km", "km", w.size_distance_km);
    r.count("sweep", "workers", "integer", w.workers);

    r.count("optimizer", "particles", "integer", c.swarm.particles);
    r.count("optimizer", "iterations", "integer", c.swarm.iterations);
    r.real("optimizer", "inertia", "dimensionless", c.swarm.inertia);
    r.real("optimizer", "cognitive", "dimensionless", c.swarm.cognitive);
    r.real("optimizer", "social", "dimensionless", c.swarm.social);
    r.seed("optimizer", "seed", c.swarm.seed);
    r.count("optimizer", "workers", "integer", c.swarm.workers);
    r.real("optimizer", "local_initial_step", "relative step", c.local_search.initial_step);
    r.real("optimizer", "local_shrink", "factor", c.local_search.shrink);
    r.count("optimizer", "local_levels", "integer", c.local_search.levels);
    r.real("optimizer", "local_min_step", "absolute step", c.local_search.min_step);

    r.real("params", "distance_km", "km", c.distance_km);
    bind_party(r, "a", c.params.a);
    bind_party(r, "b", c.params.b);

    r.text("hom", "pair", "wcp-wcp, wcp-spdc or spdc-spdc", c.hom.pair);
    r.real("hom", "delay_start_ps", "ps", c.hom.delay_start_ps);
    r.real("hom", "delay_stop_ps", "ps", c.hom.delay_stop_ps);
    r.count("hom", "delay_points", "integer", c.hom.delay_points);
    r.real("hom", "mean_photon_number_a", "mean photons per pulse", c.hom.mean_photon_number_a);
    r.real("hom", "mean_photon_number_b", "mean photons per pulse", c.hom.mean_photon_number_b);
    r.real("hom", "detector_efficiency", "fraction", c.hom.detector_efficiency);

    r.text("pnd", "source", "wcp or spdc", c.pnd.source);
    r.real("pnd", "mean_photon_number", "mean photons per pulse", c.pnd.mean_photon_number);
    r.real("pnd", "transmittance", "fraction", c.pnd.transmittance);
    r.count("pnd", "n_max", "photon number", c.pnd.n_max);

    r.custom(
        "fixed", "vectors", "list of p1, p2, p3, params",
        [&c](const std::string& v) {
            c.fixed.vectors = split_list(v);
            for (const auto& t : c.fixed.vectors)
                if (t != "p1" && t != "p2" && t != "p3" && t != "params")
                    throw ConfigError("[fixed] vectors: unknown entry '" + t + "' (expected p1, p2, p3 or params)");
        },
        [&c] {
            std::string out;
            for (const auto& t : c.fixed.vectors) out += (out.empty() ? "" : ",") + t;
            return out;
        });
    r.flag("fixed", "include_optimized", c.fixed.include_optimized);
    return r;
}

}  // namespace detail

// Reference fixed vectors for the asymmetric scenario (A = SPDC).
inline ProtocolParams table_vector(const std::string& name) {
    auto pp = [](PartyParams a, PartyParams b) { return ProtocolParams{a, b}; };
    if (name == "p1")
        return pp({0.0066, 0.4225, 0.0358, 0.8754, 0.0788, 0.0091}, {0.0542, 0.5774, 0.0344, 0.8757, 0.0500, 0.0055});
    if (name == "p2")
        return pp({0.0082, 0.2671, 0.0680, 0.7453, 0.1612, 0.0200}, {0.0624, 0.4287, 0.0703, 0.7466, 0.1035, 0.0147});
    if (name == "p3")
        return pp({0.0134, 0.1588, 0.1249, 0.5094, 0.3124, 0.0411}, {0.0812, 0.3583, 0.1177, 0.5144, 0.2014, 0.0412});
    throw ConfigError("unknown parameter vector '" + name + "'");
}

inline Config parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    Config c;
    auto reg = detail::registry(c);
    for (const auto& [sec, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError("key '" + sec + "' outside any section");
        if (!reg.known_section(sec)) throw ConfigError("unknown section [" + sec + "]");
        c.sections.insert(sec);
        for (const auto& [key, val] : body) {
            const auto* f = reg.find(sec, key);
            if (!f) throw ConfigError(reg.unknown_key(sec, key));
            f->set(detail::trim(val.data()));
        }
    }
    return c;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_config(in);
}

// key = value lines for every field, defaults included, in a fixed order.
inline std::vector<std::string> resolved_lines(Config& c) {
    std::vector<std::string> out;
    const auto reg = detail::registry(c);
    for (const auto& f : reg.fields()) out.push_back(f.section + "." + f.key + " = " + f.get());
    return out;
}

inline std::uint32_t config_hash(const std::vector<std::string>& lines) {
    boost::crc_32_type crc;
    for (const auto& l : lines) {
        crc.process_bytes(l.data(), l.size());
        crc.process_byte('\n');
    }
    return crc.checksum();
}

inline void require_sections(const Config& c, std::initializer_list<const char*> names, const std::string& command) {
    for (const char* n : names)
        if (!c.has(n)) throw ConfigError("subcommand '" + command + "' requires section [" + std::string(n) + "]");
}

}  // namespace mdiqkd
