#pragma once

// Pulse envelopes and the two-stage pump-probe schedule.

#include <string>

#include "phonon/model.hpp"

namespace phonon {

enum class EnvelopeShape { cosine, gaussian, constant };

/// Drive calibration factor: A1 for the spectroscopy line, A3 for the phonon line.
enum class CalibrationKey { a1, a3 };

/// "A1" / "A3" (case-insensitive); anything else throws ConfigError.
CalibrationKey parse_calibration(const std::string& key);
std::string to_string(CalibrationKey key);

struct PulseEnvelope {
    EnvelopeShape shape = EnvelopeShape::cosine;
    double duration_ns = 0.0;
    double sigma_ns = 0.0; ///< gaussian only; the gaussian is centred in the window
    double v0 = 0.0;       ///< peak amplitude (V)

    void validate() const;
    /// Amplitude (V) at time t_us after the pulse start; zero outside [0, duration].
    double value(double t_us) const;
    double duration_us() const { return units::us_from_ns(duration_ns); }
};

/// V0 [1 - cos(2 pi t / tau)] / 2 on [0, tau], zero elsewhere. Any consistent time unit.
double cosine_envelope(double t, double v0, double tau);

struct PulseSegment {
    PulseEnvelope envelope;
    double carrier_ghz = 0.0;
    CalibrationKey calibration = CalibrationKey::a1;
    /// Free scale on the calibration factor (the phonon-drive fine-tuning knob).
    double correction = 1.0;
    double start_us = 0.0;

    void validate() const;
    /// Angular Rabi rate Omega(t) (rad/us) at absolute time t.
    double rabi_rate(double t_us, const DeviceParams& params) const;
    double end_us() const { return start_us + envelope.duration_us(); }
};

/// Omega0/2pi (MHz) = A_k V for a drive amplitude in volts.
double rabi_rate_from_voltage(double volts, CalibrationKey key, const DeviceParams& params);
double rabi_rate_from_voltage(double volts, const std::string& key, const DeviceParams& params);

/// Carrier of the phonon-excitation pulse.
enum class PhononCarrier {
    mechanics,            ///< omega_d = omega_m
    phonon_like_polariton ///< the polariton branch closest to omega_m
};

struct ScheduleOptions {
    double tau_mech_ns = 175.0;
    double tau_ns = 1500.0;
    double v_spectroscopy = 7.5e-3;
    double readout_ns = 100.0;
    double phonon_correction = 1.0;
    PhononCarrier phonon_carrier = PhononCarrier::mechanics;

    void validate() const;
};

struct PumpProbeSchedule {
    PulseSegment phonon_pulse;       ///< stage 1, starts at t = 0
    PulseSegment spectroscopy_pulse; ///< stage 2, starts at tau_mech
    double readout_ns = 100.0;       ///< free evolution after stage 2, averaged p_e
    double delta_mhz = 0.0;          ///< spectroscopy detuning from the dressed qubit

    void validate() const;
    double readout_start_us() const { return spectroscopy_pulse.end_us(); }
    double readout_end_us() const { return readout_start_us() + units::us_from_ns(readout_ns); }
    /// Time at which the mean phonon number is reported: midway through stage 2.
    double nbar_time_us() const
    {
        return spectroscopy_pulse.start_us + 0.5 * spectroscopy_pulse.envelope.duration_us();
    }
};

/// Dressed qubit frequency omega_ge + g^2/Delta (GHz).
double dressed_qubit_ghz(const DeviceParams& params);

PumpProbeSchedule pump_probe_schedule(const DeviceParams& params, double v_phonon, double delta_mhz,
                                      const ScheduleOptions& options = {});

} // namespace phonon
