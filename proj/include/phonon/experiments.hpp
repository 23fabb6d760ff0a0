#pragma once

// Virtual versions of the measurement protocols: Rabi calibration, T1,
// mechanical ringdown, flux-sweep anticrossing map and the pump-probe
// phonon-number-splitting sweep.

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phonon/dynamics.hpp"
#include "phonon/fitting.hpp"
#include "phonon/model.hpp"
#include "phonon/parallel.hpp"
#include "phonon/sequence.hpp"

namespace phonon {

/// Angular rates (1/us) entering gamma1 D[a] + (gamma_phi/2) D[a^dag a] + kappa D[b].
struct Rates {
    double gamma1 = 0.0;
    double gamma_phi = 0.0;
    double kappa = 0.0;
};

Rates device_rates(const DeviceParams& params);

/// Collapse terms for a [N_q] or [N_q, N_m] layout (kappa only on the latter).
std::vector<CollapseTerm> collapse_terms(const Rates& rates, const SpaceLayout& layout);

struct SimulationSettings {
    int n_q = 3;
    int n_m = 15;
    /// A non-positive dt selects default_time_step for each stage.
    IntegratorConfig integrator;
    /// Replaces the rates derived from the device parameters.
    std::optional<Rates> rates;
    FanOut fan_out = serial_fan_out();

    void validate() const;
    SpaceLayout layout() const { return SpaceLayout({n_q, n_m}); }
};

/// Largest rotating-frame frequency scale (MHz): |Delta_ge|, |Delta_m|, alpha, g, Omega0.
double frame_frequency_scale(const DeviceParams& params, double omega_d_ghz, double omega0_mhz);

/// Integrator configuration for one stage, filling in the default step when unset.
IntegratorConfig stage_integrator(const IntegratorConfig& base, double f_max_mhz, double tau_env_us);

/// Physics invariants observed over a set of integrations.
struct Diagnostics {
    double max_trace_drift = 0.0;
    double max_hermiticity_error = 0.0;
    double min_final_eigenvalue = std::numeric_limits<double>::infinity();
    long steps = 0;
    double dt_us = 0.0;

    void absorb(const Trajectory& traj);
    void absorb(const Diagnostics& other);
};

struct SpectrumFrame {
    std::vector<double> detunings_mhz;
    std::vector<double> response;
    std::map<std::string, double> metadata;

    /// Equal lengths and strictly increasing detunings.
    void validate() const;
};

// ---- Rabi calibration -------------------------------------------------------

struct RabiOptions {
    double sigma_ns = 50.0;
    double duration_sigmas = 8.0; ///< gaussian window length in units of sigma
    /// Simulate the qubit together with the mechanical mode (the calibration is
    /// taken at the number-splitting operating point).
    bool include_mechanics = true;
};

struct RabiScan {
    std::vector<double> voltages;
    std::vector<double> p_e;
    RabiOptions options;
    Rates rates; ///< qubit decay rates the scan was simulated with
    Diagnostics diagnostics;
};

RabiScan rabi_scan(const DeviceParams& params, const std::vector<double>& voltages, const RabiOptions& options,
                   const SimulationSettings& settings);

struct RabiCalibration {
    double a1_mhz_per_v = 0.0;
    double contrast = 0.0;
    double offset = 0.0;
    double residual_norm = 0.0;
};

/// Fits p_e = c p(k V) + d, where p is the resonantly driven two-level Bloch
/// solution under the scan's gaussian envelope and qubit decay rates (plain
/// sin^2(k V area / 2) without decay), and reports k as A1.
RabiCalibration extract_a1(const RabiScan& scan);

// ---- exponential decays -----------------------------------------------------

struct DecayMeasurement {
    std::vector<double> delays_us;
    std::vector<double> signal;
    ExponentialFit fit;
    double time_constant_us = 0.0;
    Diagnostics diagnostics;
    std::vector<std::string> warnings;
};

/// Ideal pi pulse then free decay on the transmon alone ([N_q] layout); p_e vs delay.
DecayMeasurement t1_experiment(const DeviceParams& params, const std::vector<double>& delays_us,
                               const SimulationSettings& settings);

struct RingdownOptions {
    double omega_ge_ghz = 2.301; ///< qubit parked away from the mode
    double v_drive = 0.3;        ///< excitation pulse amplitude (V), A3 calibration
    double tau_ns = 175.0;       ///< cosine excitation pulse at omega_m
};

/// Resonant excitation of the mechanics then free decay; <b^dag b> vs delay after the pulse.
DecayMeasurement ringdown_experiment(const DeviceParams& params, const std::vector<double>& delays_us,
                                     const RingdownOptions& options, const SimulationSettings& settings);

// ---- flux sweep -------------------------------------------------------------

struct AnticrossingMap {
    std::vector<double> flux;      ///< units of the flux quantum
    std::vector<double> qubit_ghz; ///< bare qubit frequency per flux point
    Eigen::MatrixXd branches_ghz;  ///< one row per flux point, ascending eigenfrequencies
};

/// Eigenfrequencies (GHz) of the one-excitation block: qubit plus all modes with
/// beam-splitter couplings g_i.
Eigen::VectorXd one_excitation_frequencies(const std::vector<MechanicalMode>& modes, double qubit_ghz);

AnticrossingMap flux_sweep_spectrum(const std::vector<MechanicalMode>& modes, double omega_max_ghz,
                                    const std::vector<double>& flux_grid);

struct Splitting {
    double qubit_ghz = 0.0;
    double gap_mhz = 0.0;
};

/// Smallest gap (MHz) of the branch pair bracketing mode `index` over the map's flux points.
Splitting grid_minimal_splitting(const AnticrossingMap& map, const std::vector<MechanicalMode>& modes,
                                 std::size_t index);

/// Same gap minimized continuously over the qubit frequency (golden section, 1 Hz).
Splitting minimal_splitting(const std::vector<MechanicalMode>& modes, std::size_t index);

/// Couplings (MHz) one would read off the map: half of each minimal splitting.
std::vector<double> extract_couplings(const std::vector<MechanicalMode>& modes);

/// Bare couplings whose multimode map reproduces the given splittings 2 g_i
/// (the tabulated couplings are measured splittings).
std::vector<MechanicalMode> calibrate_bare_couplings(const std::vector<MechanicalMode>& measured);

// ---- number splitting -------------------------------------------------------

struct PhononPreparation {
    DensityState state;         ///< rho(tau_mech)
    double mean_phonons = 0.0;  ///< <b^dag b> at the end of the pulse
    double qubit_residual = 0.0; ///< dressed qubit excitation at the end of the pulse
    Diagnostics diagnostics;
};

/// Population of the H0 eigenstates whose dominant bare component has the
/// transmon excited (the hybridized phonon states are not counted).
double dressed_qubit_excitation(const DeviceParams& params, const DensityState& rho);

/// Stage 1 of the schedule, from |g, 0>.
PhononPreparation prepare_phonons(const DeviceParams& params, const PumpProbeSchedule& schedule,
                                  const SimulationSettings& settings);

struct SpectroscopyPoint {
    double p_e = 0.0;   ///< time-averaged over the readout window
    double nbar = 0.0;  ///< <b^dag b> midway through the spectroscopy pulse
    Diagnostics diagnostics;
};

/// Stage 2 plus readout, starting from the prepared state.
SpectroscopyPoint spectroscopy_point(const DeviceParams& params, const PumpProbeSchedule& schedule,
                                     const DensityState& prepared, const SimulationSettings& settings);

struct VoltageSpectrum {
    double voltage = 0.0;
    SpectrumFrame spectrum;
    double nbar = 0.0; ///< mean over the detuning grid
    double phonons_after_pulse = 0.0;
    double qubit_residual = 0.0;
};

struct NumberSplittingResult {
    std::vector<VoltageSpectrum> spectra;
    Diagnostics diagnostics;
    std::vector<std::string> warnings;
};

/// Full pump-probe protocol for every voltage and detuning (MHz). Stage 1 is
/// shared per voltage; all (voltage, detuning) points fan out.
NumberSplittingResult number_splitting_sweep(const DeviceParams& params, const std::vector<double>& voltages,
                                             const std::vector<double>& detunings_mhz,
                                             const ScheduleOptions& options, const SimulationSettings& settings);

/// Mean phonon number at the midpoint of stage 2 for one voltage (probe at delta = 0).
double mean_phonon_number(const DeviceParams& params, double voltage, const ScheduleOptions& options,
                          const SimulationSettings& settings);

/// Phonon-pulse voltage giving the requested mean phonon number (secant on sqrt(nbar)).
double voltage_for_nbar(const DeviceParams& params, double target_nbar, const ScheduleOptions& options,
                        const SimulationSettings& settings);

/// Detuning grid [lo, hi] with `points` samples.
std::vector<double> linear_grid(double lo, double hi, int points);

// ---- peak analysis ----------------------------------------------------------

struct PeakFit {
    std::vector<Lorentzian> peaks; ///< ascending center
    double offset = 0.0;
    double residual_norm = 0.0;

    /// Differences between adjacent centers, ascending order.
    std::vector<double> spacings() const;
};

/// Multi-Lorentzian least squares seeded from the n_peaks most prominent local maxima.
PeakFit peak_fit(const SpectrumFrame& frame, int n_peaks);

/// Multi-Lorentzian least squares seeded at the given centers with a common width.
PeakFit peak_fit(const SpectrumFrame& frame, const std::vector<double>& centers, double fwhm);

/// Number-state ladder fit: n_peaks seeds at c0 + n s, where c0 and c0 + s are
/// the two most prominent maxima ordered so that the ladder runs along sign(chi).
/// When the n = 1 line is only a shoulder (a single maximum), the seed step is 2 chi.
PeakFit ladder_peak_fit(const SpectrumFrame& frame, int n_peaks, double chi_mhz);

/// Fitted peaks at least `min_height_fraction` of the tallest that are pairwise
/// resolved by the Sparrow criterion for Lorentzians.
int resolved_peak_count(const PeakFit& fit, double min_height_fraction = 0.1);

/// Local maxima whose prominence is at least `min_fraction` of the largest one.
int count_resolved_peaks(const SpectrumFrame& frame, double min_fraction = 0.05);

} // namespace phonon
