#pragma once

// Post-processing alignment of interleaved qubit-tracking and data spectra to
// remove slow qubit-frequency drift.

#include <cstdint>
#include <string>
#include <vector>

#include "phonon/experiments.hpp"
#include "phonon/model.hpp"

namespace phonon {

struct TrackingRecord {
    int id = 0;
    double timestamp_s = 0.0; ///< metadata only
    SpectrumFrame tracking;   ///< bare qubit line, narrow window
    SpectrumFrame data;       ///< number-splitting spectrum
};

enum class CenterMethod { lorentzian, centroid };

const char* to_string(CenterMethod m);

struct LineCenter {
    double center = 0.0; ///< MHz
    CenterMethod method = CenterMethod::lorentzian;
    double snr = 0.0;
};

struct DetectionOptions {
    /// Peak contrast over the estimated sample noise below which detection fails.
    double snr_floor = 5.0;
};

/// Single-Lorentzian fit, falling back to the centroid of the top 20% of samples
/// when the fit fails or lands outside the window. Throws NumericError on frames
/// with fewer than 5 points or contrast below the SNR floor.
LineCenter detect_line_center(const SpectrumFrame& frame, const DetectionOptions& options = {});

/// Linear interpolation of `frame` evaluated at x + shift for each x in `grid`;
/// values outside the frame's range are an error.
std::vector<double> shifted_samples(const SpectrumFrame& frame, double shift, const std::vector<double>& grid);

struct AlignedAverage {
    double reference_frequency = 0.0; ///< mean detected center (MHz)
    std::vector<int> record_ids;      ///< records kept, input order
    std::vector<double> centers;
    std::vector<double> offsets;      ///< center_i - reference
    std::vector<CenterMethod> methods;

    std::vector<double> data_grid;
    std::vector<double> naive_data;   ///< plain average on the common grid
    std::vector<double> aligned_data; ///< average after shifting by -offset_i

    std::vector<double> tracking_grid;
    std::vector<double> naive_tracking;
    std::vector<double> aligned_tracking;

    double width_before = 0.0; ///< FWHM of the averaged tracking line (MHz)
    double width_after = 0.0;
    std::vector<std::string> warnings;
};

/// Requires at least 2 records. Records whose line cannot be detected are dropped
/// with a warning; NumericError when fewer than 2 remain. The common grid is the
/// first kept record's grid restricted to points every shifted record covers.
AlignedAverage align_and_average(const std::vector<TrackingRecord>& records,
                                 const DetectionOptions& options = {});

struct ChiDispersionReport {
    std::vector<double> relative;   ///< delta_chi / chi per record
    std::vector<double> dchi_mhz;   ///< delta_chi per record
    double chi_mhz = 0.0;
    double max_abs_dchi_mhz = 0.0;
    double gamma_mhz = 0.0;         ///< total qubit linewidth
    double kappa_mhz = 0.0;
    double clarity_factor = 0.0;
    /// max |delta_chi| <= clarity_factor * min(gamma, kappa).
    bool clarity_ok = false;
};

/// Dispersive-shift spread implied by the detected detuning offsets.
ChiDispersionReport residual_chi_dispersion(const std::vector<double>& offsets_mhz, const DeviceParams& params,
                                            double clarity_factor = 0.2);

enum class DriftKind { gaussian, sinusoidal };

struct SyntheticDrift {
    DriftKind kind = DriftKind::gaussian;
    /// Gaussian: half-width of the central 90% interval. Sinusoidal: amplitude.
    double excursion_mhz = 1.5;
    double correlation_records = 5.0; ///< Gaussian (Ornstein-Uhlenbeck) correlation length
    double period_records = 40.0;     ///< sinusoidal period

    int records = 180;
    double linewidth_mhz = 1.1;
    /// Data-spectrum peaks (MHz) relative to the undrifted qubit line, with heights.
    std::vector<Lorentzian> data_peaks = {{0.0, 1.1, 1.0}, {-3.0, 1.5, 0.5}};
    double tracking_half_span_mhz = 8.0;
    double data_lo_mhz = -12.0;
    double data_hi_mhz = 6.0;
    double step_mhz = 0.05;
    /// Gaussian noise standard deviation relative to a unit-height line (0 = noiseless).
    double noise = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SyntheticRecords {
    std::vector<TrackingRecord> records;
    std::vector<double> drift_mhz; ///< injected offset per record
};

SyntheticRecords synthetic_records(const SyntheticDrift& spec);

} // namespace phonon
