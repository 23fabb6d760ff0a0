#include <string>

#include <doctest.h>

#include "phonon/config.hpp"
#include "phonon/errors.hpp"

using namespace phonon;

TEST_SUITE("config")
{
    TEST_CASE("empty document gives the built-in profile")
    {
        const RunConfig c = parse_config("");
        const RunConfig d = profile_config("tableS1");
        CHECK(c.device.omega_ge_max_ghz == 2.417);
        CHECK(c.device.alpha_mhz == 138.0);
        CHECK(c.device.kappa_khz == 370.0);
        CHECK(c.device.g_mhz == 15.7);
        CHECK(c.device.t1_us == 1.14);
        CHECK(c.device.gamma_total_khz == 600.0);
        CHECK(c.device.a1_mhz_per_v == 93.9);
        CHECK(c.mechanics.size() == 5);
        CHECK(c.schedule.tau_mech_ns == 175.0);
        CHECK(c.schedule.tau_ns == 1500.0);
        CHECK(c.schedule.readout_ns == 100.0);
        CHECK(c.number_splitting.detuning_lo_mhz == -20.0);
        CHECK(c.number_splitting.detuning_hi_mhz == 10.0);
        CHECK(config_hash(c) == config_hash(d));
        CHECK(config_hash(c).size() == 16);
        CHECK_THROWS_AS(profile_config("other"), ConfigError);
    }

    TEST_CASE("overrides are applied")
    {
        const RunConfig c = parse_config(R"(
[run]
seed = 42
[device]
g_mhz = 12.5
[truncation]
n_m = 9
[integrator]
method = "rk45"
tolerance = 1e-6
[number_splitting]
voltages_v = [0.0, 0.3]
detuning_points = 31
[schedule]
phonon_carrier = "phonon_like_polariton"
[[mechanics]]
omega_ghz = 2.4
g_mhz = 10.0
[driftfix.synthetic]
kind = "sinusoidal"
)");
        CHECK(c.seed == 42);
        CHECK(c.device.g_mhz == 12.5);
        CHECK(c.n_m == 9);
        CHECK(c.integrator.method == IntegratorMethod::rk45);
        CHECK(c.number_splitting.voltages.size() == 2);
        CHECK(c.number_splitting.detuning_points == 31);
        CHECK(c.schedule.phonon_carrier == PhononCarrier::phonon_like_polariton);
        CHECK(c.mechanics.size() == 1);
        CHECK(c.driftfix.synthetic.kind == DriftKind::sinusoidal);
        CHECK(config_hash(c) != config_hash(profile_config("tableS1")));
    }

    TEST_CASE("invalid values are rejected")
    {
        CHECK_THROWS_AS(parse_config("[device]\nkappa_khz = -1.0\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[truncation]\nn_q = 2\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[device]\ngamma_total_khz = 10.0\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[integrator]\nmethod = \"euler\"\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[device]\ng_mhz = \"big\"\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[device\n"), ConfigError);
    }

    TEST_CASE("unknown keys are named")
    {
        try {
            parse_config("[device]\nkapa_khz = 300.0\n");
            FAIL("expected a ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("device.kapa_khz") != std::string::npos);
        }
        try {
            parse_config("[nonsense]\nx = 1\n");
            FAIL("expected a ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("nonsense") != std::string::npos);
        }
    }

    TEST_CASE("files")
    {
        CHECK_THROWS_AS(load_config("/nonexistent/run.toml"), IoError);
    }

    TEST_CASE("simulation settings follow the configuration")
    {
        const RunConfig c = parse_config("[truncation]\nn_q = 4\nn_m = 7\n");
        const SimulationSettings s = c.simulation(serial_fan_out());
        CHECK(s.n_q == 4);
        CHECK(s.n_m == 7);
    }
}
