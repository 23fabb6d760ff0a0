#include "phonon/sequence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "phonon/errors.hpp"

namespace phonon {

CalibrationKey parse_calibration(const std::string& key)
{
    std::string k = key;
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (k == "a1")
        return CalibrationKey::a1;
    if (k == "a3")
        return CalibrationKey::a3;
    throw ConfigError("unknown calibration key '" + key + "' (expected A1 or A3)");
}

std::string to_string(CalibrationKey key) { return key == CalibrationKey::a1 ? "A1" : "A3"; }

void PulseEnvelope::validate() const
{
    if (!(duration_ns > 0.0))
        throw ConfigError("pulse duration must be positive");
    if (!(v0 >= 0.0))
        throw ConfigError("pulse amplitude must be non-negative");
    if (shape == EnvelopeShape::gaussian && !(sigma_ns > 0.0))
        throw ConfigError("gaussian pulse needs a positive sigma");
}

double cosine_envelope(double t, double v0, double tau)
{
    if (t < 0.0 || t > tau)
        return 0.0;
    return v0 * 0.5 * (1.0 - std::cos(units::two_pi * t / tau));
}

double PulseEnvelope::value(double t_us) const
{
    const double tau = duration_us();
    if (t_us < 0.0 || t_us > tau)
        return 0.0;
    switch (shape) {
    case EnvelopeShape::cosine:
        return cosine_envelope(t_us, v0, tau);
    case EnvelopeShape::gaussian: {
        const double x = (t_us - 0.5 * tau) / units::us_from_ns(sigma_ns);
        return v0 * std::exp(-0.5 * x * x);
    }
    case EnvelopeShape::constant:
        return v0;
    }
    return 0.0;
}

void PulseSegment::validate() const
{
    envelope.validate();
    if (!(carrier_ghz > 0.0))
        throw ConfigError("pulse carrier must be positive");
    if (!(correction >= 0.0))
        throw ConfigError("calibration correction must be non-negative");
}

double rabi_rate_from_voltage(double volts, CalibrationKey key, const DeviceParams& params)
{
    if (!(volts >= 0.0))
        throw ConfigError("drive voltage must be non-negative");
    const double a = key == CalibrationKey::a1 ? params.a1_mhz_per_v : params.a3_mhz_per_v;
    return a * volts;
}

double rabi_rate_from_voltage(double volts, const std::string& key, const DeviceParams& params)
{
    return rabi_rate_from_voltage(volts, parse_calibration(key), params);
}

double PulseSegment::rabi_rate(double t_us, const DeviceParams& params) const
{
    const double v = envelope.value(t_us - start_us);
    return units::angular_from_mhz(correction * rabi_rate_from_voltage(v, calibration, params));
}

void ScheduleOptions::validate() const
{
    if (!(tau_mech_ns > 0.0) || !(tau_ns > 0.0) || !(readout_ns > 0.0))
        throw ConfigError("schedule durations must be positive");
    if (!(v_spectroscopy >= 0.0))
        throw ConfigError("spectroscopy voltage must be non-negative");
    if (!(phonon_correction >= 0.0))
        throw ConfigError("phonon drive correction must be non-negative");
}

void PumpProbeSchedule::validate() const
{
    phonon_pulse.validate();
    spectroscopy_pulse.validate();
    if (!(readout_ns > 0.0))
        throw ConfigError("readout window must be positive");
}

double dressed_qubit_ghz(const DeviceParams& params)
{
    const double delta = params.delta_mhz();
    if (delta == 0.0)
        throw PoleError("dressed qubit frequency undefined at Delta = 0");
    return params.omega_ge_ghz + 1e-3 * params.g_mhz * params.g_mhz / delta;
}

PumpProbeSchedule pump_probe_schedule(const DeviceParams& params, double v_phonon, double delta_mhz,
                                      const ScheduleOptions& options)
{
    options.validate();
    PumpProbeSchedule s;

    double phonon_carrier = params.omega_m_ghz;
    if (options.phonon_carrier == PhononCarrier::phonon_like_polariton) {
        const PolaritonFrequencies p =
            polariton_frequencies(params.omega_ge_ghz, params.omega_m_ghz, 1e-3 * params.g_mhz);
        phonon_carrier = std::abs(p.omega_plus - params.omega_m_ghz) < std::abs(p.omega_minus - params.omega_m_ghz)
                             ? p.omega_plus
                             : p.omega_minus;
    }
    s.phonon_pulse.envelope = {EnvelopeShape::cosine, options.tau_mech_ns, 0.0, v_phonon};
    s.phonon_pulse.carrier_ghz = phonon_carrier;
    s.phonon_pulse.calibration = CalibrationKey::a3;
    s.phonon_pulse.correction = options.phonon_correction;
    s.phonon_pulse.start_us = 0.0;

    s.spectroscopy_pulse.envelope = {EnvelopeShape::cosine, options.tau_ns, 0.0, options.v_spectroscopy};
    s.spectroscopy_pulse.carrier_ghz = dressed_qubit_ghz(params) + 1e-3 * delta_mhz;
    s.spectroscopy_pulse.calibration = CalibrationKey::a1;
    s.spectroscopy_pulse.start_us = units::us_from_ns(options.tau_mech_ns);

    s.readout_ns = options.readout_ns;
    s.delta_mhz = delta_mhz;
    s.validate();
    return s;
}

} // namespace phonon
