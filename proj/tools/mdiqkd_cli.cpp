// Command-line front end: mdiqkd <subcommand> --config file.ini [--output out.csv]
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mdiqkd/cli.hpp"

int main(int argc, char** argv) {
    using namespace mdiqkd;
    CLI::App app{"MDI-QKD source comparison: spectra, photon statistics, finite-size key rates"};
    app.require_subcommand(1);
    app.set_version_flag("--version", MDIQKD_VERSION);

    std::string config_path, output_path;
    cli::Overrides ov;
    for (const auto& name : cli::subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "INI configuration file")->required();
        sub->add_option("-o,--output", output_path, "CSV output (default stdout)");
        if (name == "schmidt" || name == "hom" || name == "pnd") continue;
        sub->add_option("--scenario", ov.scenarios, "comma-separated list of ww, ss, ws");
        sub->add_option("--n-total", ov.n_total, "total pulses N");
        if (name == "keyrate") continue;
        sub->add_option("--distances", ov.distances, "distance grid start_km:stop_km:points");
        sub->add_option("--seed", ov.seed, "optimizer seed");
        sub->add_option("--workers", ov.workers, "worker threads");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    return cli::guarded(
        [&] {
            Config cfg = load_config(config_path);
            cli::apply(cfg, ov);
            if (output_path.empty()) return cli::run(command, cfg, std::cout);
            // Write to a temporary buffer first so a failed run leaves no partial file.
            std::ostringstream buf;
            const int rc = cli::run(command, cfg, buf);
            std::ofstream out(output_path);
            if (!out) throw ConfigError("cannot write output file '" + output_path + "'");
            out << buf.str();
            return rc;
        },
        std::cerr);
}
