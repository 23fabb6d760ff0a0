#pragma once

// Lindblad master-equation integration with time-dependent drive coefficients.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phonon/hilbert.hpp"

namespace phonon {

/// H(t) += c(t) op + conj(c(t)) op^dagger. Coefficients are angular (rad/us).
struct DrivePair {
    Operator op;
    std::function<cplx(double)> coeff;
};

/// rate * D[op], rate in 1/us.
struct CollapseTerm {
    Operator op;
    double rate = 0.0;
};

struct LindbladModel {
    Operator h_static;
    std::vector<DrivePair> drives;
    std::vector<CollapseTerm> collapses;

    explicit LindbladModel(Operator h) : h_static(std::move(h)) {}

    /// Hermitian static part, non-negative rates, matching layouts.
    void validate() const;
    Operator hamiltonian(double t) const;
};

/// Dense reference right-hand side: i[rho, H(t)] + sum rate D[A] rho.
Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho, double t);

/// Same quantity through the sparse kernel used by evolve; rho must be Hermitian.
Matrix sparse_lindblad_rhs(const LindbladModel& model, const Matrix& rho, double t);

enum class IntegratorMethod { rk4, rk45 };

struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::rk4;
    double dt = 0.0;         ///< fixed RK4 step, or initial step for RK45 (us)
    double tolerance = 1e-7; ///< RK45 relative tolerance, in (0, 1e-3]
    double abs_tolerance = 1e-10;
    double max_step = 0.0;   ///< RK45 upper step bound, 0 = unbounded
    double min_step = 1e-9;  ///< RK45 underflow threshold (us)
    /// Shrink the RK4 step when the Hamiltonian spectral span times dt exceeds this.
    double stability_limit = 2.5;

    void validate() const;
};

/// dt = min(1/(100 f_max), tau_env/200), f_max the largest frame frequency in MHz.
double default_time_step(double f_max_mhz, double tau_env_us);

struct Observable {
    std::string name;
    Operator op;
};

struct Trajectory {
    std::vector<double> times;
    std::map<std::string, std::vector<double>> observables;
    std::vector<DensityState> checkpoints; ///< states at the requested checkpoint times
    std::optional<DensityState> final_state;

    double max_trace_drift = 0.0;
    double max_hermiticity_error = 0.0;
    double dt_used = 0.0; ///< RK4 step after the stability guard
    long steps = 0;

    const std::vector<double>& series(const std::string& name) const;
};

struct SampleSpec {
    /// Sample times inside [t0, t1]; t0 and t1 are always sampled.
    std::vector<double> times;
    /// Subset of sample times at which full states are kept.
    std::vector<double> checkpoints;

    static SampleSpec uniform(double t0, double t1, int intervals);
};

/// Integrate from t0 to t1. Every sample time is hit exactly. Throws
/// DivergenceError when the trace drifts by more than 1e-8, the state becomes
/// non-finite, or the adaptive step underflows. The trace is never renormalized.
Trajectory evolve(const LindbladModel& model, const DensityState& rho0, double t0, double t1,
                  const IntegratorConfig& config, const std::vector<Observable>& observables,
                  const SampleSpec& sampling = {});

/// Trapezoidal mean of a sampled series over [start, start + length]; the
/// series is linearly interpolated at the window edges.
double time_averaged_population(const Trajectory& traj, const std::string& name, double window_start,
                                double window_len);

constexpr double trace_drift_limit = 1e-8;

} // namespace phonon
