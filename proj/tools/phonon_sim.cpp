#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "phonon/config.hpp"
#include "phonon/errors.hpp"
#include "phonon/parallel.hpp"
#include "phonon/runner.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Simulate qubit-phonon number-splitting experiments and their calibrations"};
    app.set_version_flag("--version", phonon::code_version());
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config_path, profile = "tableS1", out_dir;
    unsigned threads = phonon::default_thread_count();
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "TOML file overriding the profile")->check(CLI::ExistingFile);
    app.add_option("--profile", profile, "Built-in parameter profile")->check(CLI::IsMember({"tableS1"}));
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Output directory (overrides run.output_dir)");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "Seed for synthetic noise (overrides run.seed)");
    const std::map<std::string, std::string> about = {
        {"rabi", "Rabi amplitude scan and drive calibration"},
        {"t1", "Qubit energy-relaxation experiment"},
        {"ringdown", "Mechanical ringdown after a resonant drive"},
        {"flux-sweep", "Eigenvalue map across flux and anticrossing gaps"},
        {"number-splitting", "Pump-probe spectra resolving phonon number states"},
        {"optimize-chi", "Maximize |chi| over anharmonicity and detuning"},
        {"feasibility-map", "|chi| over the design plane with constraint masks"},
        {"driftfix", "Align interleaved spectra against qubit-frequency drift"}};
    for (const std::string& name : phonon::subcommands())
        app.add_subcommand(name, about.at(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(phonon::ErrorCategory::config);
    }

    try {
        phonon::RunConfig config =
            config_path.empty() ? phonon::profile_config(profile) : phonon::load_config(config_path, profile);
        if (!out_dir.empty())
            config.output_dir = out_dir;
        if (seed_opt->count())
            config.seed = seed;
        config.validate();
        const std::string sub = app.get_subcommands().front()->get_name();
        const phonon::ResultBundle bundle = phonon::run(sub, config, phonon::thread_fan_out(threads));
        phonon::write_bundle(bundle, config, config.output_dir);
        for (const std::string& w : bundle.warnings)
            std::cerr << "warning: " << w << '\n';
        std::cout << bundle.summary.dump(2) << '\n';
        std::cout << "wrote " << config.output_dir << "/" << sub << " (" << bundle.wall_time_s << " s)\n";
        return 0;
    } catch (const phonon::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
