#pragma once

#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "phonon/hilbert.hpp"

namespace phonon {

// Unit boundary. Every configured or reported quantity is a "divided by 2 pi"
// value (GHz, MHz, kHz); times are in microseconds. Inside Hamiltonians and
// Lindblad rates everything is angular, in rad/us. These helpers are the only
// place the 2 pi factor is applied.
namespace units {
constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double angular_from_ghz(double ghz) { return two_pi * 1e3 * ghz; }
constexpr double angular_from_mhz(double mhz) { return two_pi * mhz; }
constexpr double angular_from_khz(double khz) { return two_pi * 1e-3 * khz; }
constexpr double mhz_from_angular(double w) { return w / two_pi; }
constexpr double khz_from_angular(double w) { return 1e3 * w / two_pi; }
constexpr double us_from_ns(double ns) { return 1e-3 * ns; }
} // namespace units

/// Measured device constants, in the tabulated (divided-by-2pi) units.
struct DeviceParams {
    double omega_ge_max_ghz = 2.417; ///< flux sweet-spot qubit frequency
    double omega_ge_ghz = 2.317;     ///< operating point for number splitting
    double alpha_mhz = 138.0;        ///< anharmonicity, omega_ge - omega_ef
    double omega_m_ghz = 2.405;      ///< mechanical mode used for splitting
    double g_mhz = 15.7;
    double t1_us = 1.14;
    double gamma_total_khz = 600.0;  ///< total qubit linewidth
    double kappa_khz = 370.0;        ///< mechanical energy decay rate
    double a1_mhz_per_v = 93.9;      ///< A1 / 2pi
    double a3_mhz_per_v = 93.9 * std::numbers::sqrt2; ///< A3 / 2pi (extra 3 dB attenuator)
    double chi_tabulated_mhz = -1.56; ///< recorded only; simulations use chi()

    double delta_mhz() const { return 1e3 * (omega_ge_ghz - omega_m_ghz); }
    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// One mechanical mode of the resonator array.
struct MechanicalMode {
    double omega_ghz = 0.0;
    double g_mhz = 0.0;
};

/// The five strongly coupled modes of the measured device.
std::vector<MechanicalMode> table_s1_modes();

struct FrameSpec {
    double omega_d_ghz = 0.0;
};

/// Lumped equivalent of the piezoelectric mode. Capacitances in fF, inductance in nH.
struct FosterCircuit {
    double c0_ff = 0.0;
    double c1_ff = 0.0;
    double l1_nh = 0.0;
    double c_sigma_ff = 0.0;

    void validate() const;
};

/// Transmon (index 0) and mechanics (index 1) operators on a two-mode layout.
struct ModeOperators {
    Operator a;
    Operator b;
    Operator n_q;
    Operator n_m;
    Operator kerr; ///< a^dag a^dag a a
};

ModeOperators mode_operators(const SpaceLayout& layout);

/// Rotating-frame Hamiltonian (rad/us):
/// Dge a^dag a - (alpha/2) a^dag a^dag a a + Dm b^dag b + g (a b^dag + a^dag b).
Operator build_h0(const DeviceParams& params, const FrameSpec& frame, const SpaceLayout& layout);

/// Static operators of the drive. Contract: H_d(t) = 1/2 Omega(t) lowering + 1/2 conj(Omega(t)) raising,
/// with Omega in rad/us; the integrator applies the coefficients.
struct DriveOperators {
    Operator lowering;
    Operator raising;
};

DriveOperators build_drive_term(const SpaceLayout& layout);

/// Dispersive shift chi/2pi = -(g^2/Delta) alpha/(Delta - alpha). All arguments and
/// the result in the same divided-by-2pi unit. Throws PoleError at Delta = 0 or Delta = alpha.
double chi(double g, double delta, double alpha);

struct DispersiveHamiltonian {
    Operator h;
    double chi_mhz = 0.0;
    double g_over_delta_sq = 0.0;
    double g_over_delta_minus_alpha_sq = 0.0;
    /// False when either ratio above exceeds 0.1.
    bool dispersive_valid = true;
};

/// Dge a^dag a + Dm b^dag b + 2 chi a^dag a b^dag b, diagonal in the product Fock basis.
DispersiveHamiltonian build_h_dispersive(const DeviceParams& params, const FrameSpec& frame,
                                         const SpaceLayout& layout);

struct PolaronTransform {
    double theta = 0.0;
    /// Rows give (c_plus, c_minus) in terms of (a, b).
    Eigen::Matrix2d mixing;
    /// Set at Delta = 0 where theta = pi/2 by convention.
    bool degenerate = false;
};

/// Mixing with tan(theta) = 2g/Delta; c+ = cos(theta/2) a + sin(theta/2) b,
/// c- = -sin(theta/2) a + cos(theta/2) b.
PolaronTransform polaron_transform(double g, double delta);

struct PolaritonFrequencies {
    double omega_plus = 0.0;
    double omega_minus = 0.0;
};

/// omega_pm = (omega_ge + omega_m)/2 +- sqrt(Delta^2/4 + g^2). Units of the inputs.
PolaritonFrequencies polariton_frequencies(double omega_ge, double omega_m, double g);

/// omega_max sqrt(|cos(pi phi)|), phi in units of the flux quantum.
double flux_to_frequency(double phi, double omega_max);
/// Inverse on [0, 1/2]; requires 0 <= omega <= omega_max.
double frequency_to_flux(double omega, double omega_max);

/// Qubit decay rates for the master equation
///   gamma1 D[a] + (gamma_phi / 2) D[a^dag a].
/// The measured linewidth gamma = 1/(2 T1) + 1/T_phi is the angular coherence
/// decay rate 2pi * gamma_total. With the (gamma_phi/2) D[a^dag a] convention
/// the g-e coherence decays at gamma1/2 + gamma_phi/4, so gamma_phi = 4/T_phi.
struct GammaRates {
    double gamma1 = 0.0;    ///< 1/us
    double gamma_phi = 0.0; ///< 1/us, as it enters (gamma_phi/2) D[a^dag a]
    double t_phi_us = 0.0;  ///< +inf when the line is T1 limited
};

GammaRates gamma_decomposition(double t1_us, double gamma_total_khz);

/// delta_chi / chi = -((2 Delta - alpha)/(Delta - alpha)) * (d_delta / Delta).
double chi_dispersion(double delta, double alpha, double d_delta);

/// Dimensionless coupling constant of the Foster circuit; independent of C_sigma.
double xi_from_foster(const FosterCircuit& fc);

/// Coupling g/2pi (MHz) from the three-factor expression
/// h g = 8 E_C^{phi,theta} n_zp^theta n_zp^phi. EJ and EC are E/h in MHz; the
/// transmon capacitance is taken as C_sigma = e^2 / (2 EC).
double g_from_foster(const FosterCircuit& fc, double ej_mhz, double ec_mhz);

/// Reduced form xi (8 EJ EC^3)^(1/4), MHz.
double g_reduced(double xi, double ej_mhz, double ec_mhz);

/// g/2pi (MHz) with alpha = EC/h: xi sqrt(alpha (omega_ge + alpha)).
double g_of_alpha(double xi, double omega_ge_ghz, double alpha_mhz);

/// EJ/h (MHz) from h omega_ge = sqrt(8 EJ EC) - EC.
double ej_from_frequency(double omega_ge_ghz, double ec_mhz);
/// omega_ge/2pi (GHz) from EJ/h and EC/h in MHz.
double transmon_frequency(double ej_mhz, double ec_mhz);

/// Charging energy EC/h (MHz) of a capacitance in fF.
double charging_energy_mhz(double c_ff);

} // namespace phonon
