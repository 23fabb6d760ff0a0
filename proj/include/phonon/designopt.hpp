#pragma once

// Constrained maximization of the dispersive shift |chi(alpha, Delta)| over the
// transmon anharmonicity and qubit-mechanics detuning, with g = g_of_alpha(xi, omega_ge, alpha).

#include <vector>

#include "phonon/parallel.hpp"

namespace phonon {

struct DesignConstraints {
    double dispersive_margin = 5.0; ///< |Delta| and |Delta - alpha| at least this many g
    double ej_ec_min = 50.0;        ///< transmon limit (omega_ge + alpha)^2 / (8 alpha^2)
    double omega_ge_ghz = 2.3;
    double xi = 0.037;

    void validate() const;
};

/// Constraint slacks; a point is feasible when all are >= 0.
struct Slacks {
    double detuning = 0.0;      ///< |Delta| - m g (MHz)
    double anharmonic = 0.0;    ///< |Delta - alpha| - m g (MHz)
    double transmon = 0.0;      ///< EJ/EC - ej_ec_min (ratio)
};

struct Feasibility {
    bool feasible = false;
    Slacks slacks;
};

/// All MHz. alpha must be positive.
Feasibility feasible(double alpha_mhz, double delta_mhz, const DesignConstraints& c);

/// |chi| (MHz) at a design point; zero when g = 0, PoleError on a pole.
double design_chi_abs(double alpha_mhz, double delta_mhz, const DesignConstraints& c);

/// EJ/EC in the transmon approximation h omega_ge = sqrt(8 EJ EC) - EC with EC = alpha.
double ej_ec_ratio(double omega_ge_ghz, double alpha_mhz);

enum class DetuningBranch { below, straddling, above };

struct DesignResult {
    double alpha_opt = 0.0; ///< MHz
    double delta_opt = 0.0; ///< MHz
    double g_opt = 0.0;     ///< MHz
    double chi_opt = 0.0;   ///< signed chi at the optimum, MHz
    DetuningBranch branch = DetuningBranch::below;
    Slacks slacks;
    /// The other boundary candidate with the same alpha (Delta = alpha + m g when the
    /// optimum is at Delta = -m g and vice versa); |chi| is equal by symmetry.
    double mirror_delta = 0.0;
    double mirror_chi = 0.0;
    /// Best feasible cell of the coarse grid, before refinement.
    double grid_alpha = 0.0;
    double grid_delta = 0.0;
    double grid_chi_abs = 0.0;
};

struct SearchGrid {
    double alpha_lo = 10.0, alpha_hi = 600.0, alpha_step = 1.0;
    double delta_lo = -1000.0, delta_hi = 1000.0, delta_step = 1.0;
    /// Refinement tolerance on alpha and Delta (MHz).
    double tolerance = 1e-3;

    void validate() const;
    std::vector<double> alphas() const;
    std::vector<double> deltas() const;
};

/// Dense grid search followed by boundary refinement. Throws NumericError with an
/// infeasibility report when no grid cell is feasible.
DesignResult optimize_chi(const DesignConstraints& c, const SearchGrid& grid = {},
                          const FanOut& fan_out = serial_fan_out());

struct FeasibilityMap {
    std::vector<double> alphas; ///< rows
    std::vector<double> deltas; ///< columns
    /// |chi| capped at `cap_mhz`; NaN on pole cells.
    std::vector<std::vector<double>> chi_abs;
    std::vector<std::vector<bool>> feasible;
    double cap_mhz = 20.0;
    double best_feasible_chi = 0.0;
    double best_alpha = 0.0;
    double best_delta = 0.0;
};

FeasibilityMap feasibility_map(const DesignConstraints& c, const SearchGrid& grid = {}, double cap_mhz = 20.0,
                               const FanOut& fan_out = serial_fan_out());

struct AlphaProfile {
    std::vector<double> alphas;
    /// max over dispersive-feasible Delta of |chi| (transmon limit ignored), MHz.
    std::vector<double> max_chi;
    std::vector<bool> straddling_open;
    std::vector<bool> transmon_ok;
};

/// Exact boundary evaluation of max_Delta |chi| for each alpha.
AlphaProfile max_chi_vs_alpha(const DesignConstraints& c, const std::vector<double>& alphas);

struct StraddlingReport {
    /// Smallest alpha (MHz) at which m g <= Delta <= alpha - m g is non-empty; +inf if never.
    double alpha_threshold = 0.0;
    /// Largest alpha (MHz) satisfying the transmon limit.
    double alpha_transmon_max = 0.0;
    bool feasible = false;
};

StraddlingReport straddling_feasibility(const DesignConstraints& c);

const char* to_string(DetuningBranch b);

} // namespace phonon
