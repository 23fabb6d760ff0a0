#pragma once

// Run configuration: built-in device profile plus TOML overrides.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phonon/designopt.hpp"
#include "phonon/driftfix.hpp"
#include "phonon/dynamics.hpp"
#include "phonon/experiments.hpp"
#include "phonon/model.hpp"
#include "phonon/sequence.hpp"

namespace phonon {

struct NumberSplittingConfig {
    std::vector<double> voltages = {0.0, 0.15, 0.25, 0.35, 0.45, 0.55};
    double detuning_lo_mhz = -20.0;
    double detuning_hi_mhz = 10.0;
    int detuning_points = 121;
};

struct RabiConfig {
    double voltage_hi_v = 0.12;
    int points = 41;
    RabiOptions options;
};

struct DecayConfig {
    double delay_max_us = 0.0;
    int points = 0;
};

struct FluxSweepConfig {
    int points = 2001;
    /// Fit bare couplings so the map reproduces the configured splittings.
    bool calibrate_couplings = true;
};

struct DesignConfig {
    DesignConstraints constraints;
    SearchGrid grid;
    SearchGrid map_grid = [] {
        SearchGrid g;
        g.alpha_step = 5.0;
        g.delta_step = 5.0;
        return g;
    }();
    double map_cap_mhz = 20.0;
};

struct DriftfixConfig {
    /// Record-set CSV; when empty a seeded synthetic record set is generated.
    std::string records_path;
    DetectionOptions detection;
    double clarity_factor = 0.2;
    SyntheticDrift synthetic;
};

struct RunConfig {
    std::string profile = "tableS1";
    DeviceParams device;
    std::vector<MechanicalMode> mechanics = table_s1_modes();
    int n_q = 3;
    int n_m = 15;
    IntegratorConfig integrator;
    ScheduleOptions schedule;
    NumberSplittingConfig number_splitting;
    RabiConfig rabi;
    DecayConfig t1{5.0, 51};
    DecayConfig ringdown_delays{2.0, 41};
    RingdownOptions ringdown;
    FluxSweepConfig flux_sweep;
    DesignConfig design;
    DriftfixConfig driftfix;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    bool convergence_check = true;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    SimulationSettings simulation(const FanOut& fan_out) const;
};

/// Built-in parameter profile; only "tableS1" exists.
RunConfig profile_config(const std::string& name);

/// Profile defaults overridden by a TOML document. Unknown keys, wrong types and
/// invalid values are ConfigError with the dotted key path.
RunConfig parse_config(const std::string& toml_text, const std::string& profile = "tableS1",
                       const std::string& source = "<string>");

/// As parse_config, reading `path` (IoError when unreadable).
RunConfig load_config(const std::string& path, const std::string& profile = "tableS1");

/// Canonical JSON text of the resolved configuration (stable key order).
std::string config_json(const RunConfig& config);

/// FNV-1a 64-bit hash of config_json, as 16 hex digits.
std::string config_hash(const RunConfig& config);

} // namespace phonon
