#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mdiqkd/cli.hpp"

using namespace mdiqkd;

namespace {

const std::string defaults_path = std::string(MDIQKD_SOURCE_DIR) + "/configs/reference.ini";

Config from_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

std::string run_text(const std::string& command, Config c, int* rc = nullptr) {
    std::ostringstream out, err;
    const int code = cli::guarded([&] { return cli::run(command, c, out); }, err);
    if (rc) *rc = code;
    return out.str();
}

std::vector<std::string> data_rows(const std::string& csv) {
    std::vector<std::string> rows;
    std::istringstream in(csv);
    bool header_seen = false;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        rows.push_back(line);
    }
    return rows;
}

}  // namespace

TEST(Config, DefaultsFileParses) {
    const auto c = load_config(defaults_path);
    EXPECT_DOUBLE_EQ(c.spdc.pump_wavelength_nm, 532.0);
    EXPECT_DOUBLE_EQ(c.channel.relay.efficiency, 0.6);
    EXPECT_DOUBLE_EQ(c.local.efficiency, 0.9);
    EXPECT_DOUBLE_EQ(c.scale.n_total, 1e12);
    EXPECT_EQ(c.scenarios.size(), 3u);
    EXPECT_EQ(c.sweep.distances().size(), 40u);
    EXPECT_DOUBLE_EQ(c.params.a.mu, 0.4225);
    EXPECT_TRUE(c.has("hom"));
}

TEST(Config, UnknownKeyNamesUnit) {
    try {
        from_text("[source.spdc]\npump_sigma_fs = 5000\n");
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("pump_sigma_ps"), std::string::npos) << msg;
        EXPECT_NE(msg.find("ps"), std::string::npos) << msg;
    }
    EXPECT_THROW(from_text("[nonsense]\nx = 1\n"), ConfigError);
    EXPECT_THROW(from_text("[channel]\nmisalignment = abc\n"), ConfigError);
    EXPECT_THROW(from_text("[scenario]\nscenarios = ww, qq\n"), ConfigError);
}

TEST(Config, MissingSectionIsConfigError) {
    auto c = from_text("[finite]\nn_total = 1e10\n[params]\ndistance_km = 10\n[source.spdc]\n[source.wcp]\n");
    int rc = -1;
    run_text("keyrate", c, &rc);
    EXPECT_EQ(rc, cli::config_error);
}

TEST(Config, HeaderHashAndRerunsAreIdentical) {
    auto c = load_config(defaults_path);
    const auto a = run_text("pnd", c), b = run_text("pnd", c);
    EXPECT_EQ(a, b);
    const auto hash = [](const std::string& s) {
        const auto p = s.find("# config_crc32: ");
        return s.substr(p + 16, 8);
    };
    EXPECT_EQ(hash(a).size(), 8u);
    auto d = c;
    d.channel.misalignment = 0.02;
    EXPECT_NE(hash(run_text("pnd", d)), hash(a));
    EXPECT_NE(a.find("# channel.misalignment = 0.015"), std::string::npos);
}

TEST(Config, RowCounts) {
    auto c = load_config(defaults_path);
    EXPECT_EQ(data_rows(run_text("pnd", c)).size(), c.pnd.n_max + 1);
    c.hom.delay_points = 11;
    EXPECT_EQ(data_rows(run_text("hom", c)).size(), 11u);
    int rc = -1;
    const auto kr = run_text("keyrate", c, &rc);
    EXPECT_EQ(rc, cli::ok);
    EXPECT_EQ(data_rows(kr).size(), 3u);
    const auto sch = run_text("schmidt", c);
    EXPECT_NE(sch.find("# modes_kept:"), std::string::npos);
    EXPECT_GE(data_rows(sch).size(), 6u);
}

TEST(Config, SmallOptimizeIsDeterministic) {
    auto c = load_config(defaults_path);
    cli::Overrides o;
    o.scenarios = "ww";
    o.distances = "0:20:3";
    cli::apply(c, o);
    c.swarm.particles = 4;
    c.swarm.iterations = 2;
    c.local_search.levels = 2;
    int rc = -1;
    const auto a = run_text("optimize", c, &rc);
    EXPECT_EQ(rc, cli::ok);
    EXPECT_EQ(data_rows(a).size(), 3u);
    EXPECT_EQ(a, run_text("optimize", c));
}

TEST(Config, BadOverrides) {
    auto c = load_config(defaults_path);
    cli::Overrides o;
    o.distances = "0:20";
    EXPECT_THROW(cli::apply(c, o), ConfigError);
    o.distances.reset();
    o.scenarios = "xx";
    EXPECT_THROW(cli::apply(c, o), ConfigError);
}
