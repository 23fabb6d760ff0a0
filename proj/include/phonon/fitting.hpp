#pragma once

// Nonlinear least squares (Levenberg-Marquardt) and the model curves used by
// the experiments and drift correction.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace phonon {

/// Fills r (pre-sized) with residuals for parameters p.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct FitResult {
    Eigen::VectorXd params;
    double residual_norm = 0.0;
    int evaluations = 0;
    int status = 0;
};

/// Throws FitError (naming `what`, the initial guess and residual norm) when the
/// minimizer fails or returns non-finite parameters.
FitResult least_squares(const ResidualFn& residuals, int n_residuals, const Eigen::VectorXd& p0,
                        const std::string& what);

struct ExponentialFit {
    double amplitude = 0.0;
    double rate = 0.0; ///< 1/time unit of the input
    double offset = 0.0;
    double residual_norm = 0.0;

    double time_constant() const { return 1.0 / rate; }
};

/// y = amplitude exp(-rate t) (+ offset). Initial guess from a log-linear fit.
ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, bool with_offset);

struct Lorentzian {
    double center = 0.0;
    double fwhm = 0.0;
    double height = 0.0;
};

double lorentzian(double x, const Lorentzian& l);

struct MultiLorentzianFit {
    std::vector<Lorentzian> peaks; ///< sorted by center
    double offset = 0.0;
    double residual_norm = 0.0;
};

/// Sum of Lorentzians plus a constant offset, starting from `guess`.
MultiLorentzianFit fit_lorentzians(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<Lorentzian>& guess, double offset_guess, bool fit_offset = true);

/// Full width at half maximum of a sampled single line, by linear interpolation
/// of the half-maximum crossings above the baseline (minimum of the samples).
double sampled_fwhm(const std::vector<double>& x, const std::vector<double>& y);

} // namespace phonon
