#include <cmath>

#include <doctest.h>

#include "phonon/errors.hpp"
#include "phonon/sequence.hpp"

using namespace phonon;

TEST_SUITE("sequence")
{
    TEST_CASE("raised-cosine envelope")
    {
        CHECK(cosine_envelope(0.0, 0.3, 175.0) == 0.0);
        CHECK(std::abs(cosine_envelope(175.0, 0.3, 175.0)) < 1e-15);
        CHECK(cosine_envelope(87.5, 0.3, 175.0) == doctest::Approx(0.3));
        CHECK(cosine_envelope(-1.0, 0.3, 175.0) == 0.0);
        CHECK(cosine_envelope(176.0, 0.3, 175.0) == 0.0);
        const int n = 20000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
            sum += cosine_envelope((i + 0.5) * 175.0 / n, 0.3, 175.0) * 175.0 / n;
        CHECK(sum == doctest::Approx(0.3 * 175.0 / 2.0).epsilon(1e-8));
    }

    TEST_CASE("gaussian envelope is centred in its window")
    {
        const PulseEnvelope e{EnvelopeShape::gaussian, 400.0, 50.0, 0.1};
        CHECK(e.value(0.2) == doctest::Approx(0.1));
        CHECK(e.value(0.25) == doctest::Approx(0.1 * std::exp(-0.5)));
        CHECK(e.value(0.41) == 0.0);
        CHECK_THROWS_AS((PulseEnvelope{EnvelopeShape::gaussian, 400.0, 0.0, 0.1}.validate()), ConfigError);
    }

    TEST_CASE("drive calibration")
    {
        const DeviceParams p;
        CHECK(rabi_rate_from_voltage(7.5e-3, CalibrationKey::a1, p) == doctest::Approx(0.704).epsilon(1e-3));
        CHECK(rabi_rate_from_voltage(0.0, "A1", p) == 0.0);
        CHECK(rabi_rate_from_voltage(1.0, "a3", p) / rabi_rate_from_voltage(1.0, "A1", p) ==
              doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(std::abs(p.a3_mhz_per_v / p.a1_mhz_per_v - std::sqrt(2.0)) < 1e-12);
        CHECK_THROWS_AS(rabi_rate_from_voltage(1.0, "A2", p), ConfigError);
        CHECK_THROWS_AS(rabi_rate_from_voltage(-0.1, CalibrationKey::a1, p), ConfigError);
        CHECK(to_string(parse_calibration("a1")) == "A1");
    }

    TEST_CASE("pulse segment Rabi rate includes the correction")
    {
        const DeviceParams p;
        PulseSegment s;
        s.envelope = {EnvelopeShape::constant, 100.0, 0.0, 0.2};
        s.carrier_ghz = p.omega_m_ghz;
        s.calibration = CalibrationKey::a3;
        s.correction = 0.78;
        s.start_us = 0.05;
        CHECK(s.rabi_rate(0.1, p) == doctest::Approx(units::angular_from_mhz(0.78 * 0.2 * p.a3_mhz_per_v)));
        CHECK(s.rabi_rate(0.0, p) == 0.0);
        CHECK(s.end_us() == doctest::Approx(0.15));
    }

    TEST_CASE("pump-probe schedule")
    {
        const DeviceParams p;
        CHECK(1e3 * (dressed_qubit_ghz(p) - p.omega_ge_ghz) == doctest::Approx(-2.80).epsilon(2e-3));

        const PumpProbeSchedule s = pump_probe_schedule(p, 0.3, -4.0);
        CHECK(s.phonon_pulse.carrier_ghz == p.omega_m_ghz);
        CHECK(s.phonon_pulse.calibration == CalibrationKey::a3);
        CHECK(s.phonon_pulse.envelope.duration_ns == 175.0);
        CHECK(s.phonon_pulse.envelope.v0 == 0.3);
        CHECK(s.spectroscopy_pulse.calibration == CalibrationKey::a1);
        CHECK(s.spectroscopy_pulse.start_us == doctest::Approx(0.175));
        CHECK(s.spectroscopy_pulse.envelope.duration_ns == 1500.0);
        CHECK(s.spectroscopy_pulse.envelope.v0 == 7.5e-3);
        CHECK(s.spectroscopy_pulse.carrier_ghz == doctest::Approx(dressed_qubit_ghz(p) - 4e-3).epsilon(1e-14));
        CHECK(s.readout_ns == 100.0);
        CHECK(s.readout_end_us() - s.readout_start_us() == doctest::Approx(0.1));
        CHECK(s.nbar_time_us() == doctest::Approx(0.175 + 0.75));

        ScheduleOptions o;
        o.phonon_carrier = PhononCarrier::phonon_like_polariton;
        const PumpProbeSchedule sp = pump_probe_schedule(p, 0.3, 0.0, o);
        const PolaritonFrequencies pf = polariton_frequencies(p.omega_ge_ghz, p.omega_m_ghz, 1e-3 * p.g_mhz);
        CHECK(sp.phonon_pulse.carrier_ghz == doctest::Approx(pf.omega_plus));

        o.tau_ns = 0.0;
        CHECK_THROWS_AS(pump_probe_schedule(p, 0.3, 0.0, o), ConfigError);
    }
}
