#include "phonon/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "phonon/errors.hpp"

namespace phonon {

namespace {

// CODATA exact values.
constexpr double elementary_charge = 1.602176634e-19; // C
constexpr double planck = 6.62607015e-34;              // J s
constexpr double hbar = planck / units::two_pi;

void require_positive(double v, const char* name)
{
    if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string(name) + " must be positive and finite, got " + std::to_string(v));
}

void require_two_mode(const SpaceLayout& layout)
{
    if (layout.subsystems() != 2)
        throw InvalidLayout("expected a [N_q, N_m] layout");
}

} // namespace

void DeviceParams::validate() const
{
    require_positive(omega_ge_max_ghz, "omega_ge_max_ghz");
    require_positive(omega_ge_ghz, "omega_ge_ghz");
    require_positive(alpha_mhz, "alpha_mhz");
    require_positive(omega_m_ghz, "omega_m_ghz");
    require_positive(g_mhz, "g_mhz");
    require_positive(t1_us, "t1_us");
    require_positive(gamma_total_khz, "gamma_total_khz");
    require_positive(kappa_khz, "kappa_khz");
    require_positive(a1_mhz_per_v, "a1_mhz_per_v");
    require_positive(a3_mhz_per_v, "a3_mhz_per_v");
    // Pure dephasing cannot be negative: 2pi gamma >= 1/(2 T1).
    if (units::angular_from_khz(gamma_total_khz) < 1.0 / (2.0 * t1_us))
        throw ConfigError("gamma_total_khz is below the T1 limit 1/(2 T1) = " +
                          std::to_string(units::khz_from_angular(1.0 / (2.0 * t1_us))) + " kHz");
}

std::vector<MechanicalMode> table_s1_modes()
{
    return {{2.405, 15.7}, {2.257, 15.2}, {2.153, 14.0}, {2.065, 14.2}, {2.002, 13.0}};
}

void FosterCircuit::validate() const
{
    require_positive(c0_ff, "c0_ff");
    require_positive(c1_ff, "c1_ff");
    require_positive(l1_nh, "l1_nh");
    require_positive(c_sigma_ff, "c_sigma_ff");
}

ModeOperators mode_operators(const SpaceLayout& layout)
{
    require_two_mode(layout);
    const int nq = layout.dim(0);
    const int nm = layout.dim(1);
    Operator a = tensor_lift(annihilation_op(nq), 0, layout);
    Operator b = tensor_lift(annihilation_op(nm), 1, layout);
    Operator ad = a.dagger();
    Operator n_q = ad * a;
    Operator n_m = b.dagger() * b;
    Operator kerr = ad * ad * a * a;
    return {std::move(a), std::move(b), std::move(n_q), std::move(n_m), std::move(kerr)};
}

Operator build_h0(const DeviceParams& params, const FrameSpec& frame, const SpaceLayout& layout)
{
    const ModeOperators ops = mode_operators(layout);
    const double d_ge = units::angular_from_ghz(params.omega_ge_ghz - frame.omega_d_ghz);
    const double d_m = units::angular_from_ghz(params.omega_m_ghz - frame.omega_d_ghz);
    const double alpha = units::angular_from_mhz(params.alpha_mhz);
    const double g = units::angular_from_mhz(params.g_mhz);

    Operator h = d_ge * ops.n_q;
    h -= (0.5 * alpha) * ops.kerr;
    h += d_m * ops.n_m;
    h += g * (ops.a * ops.b.dagger() + ops.a.dagger() * ops.b);
    return h;
}

DriveOperators build_drive_term(const SpaceLayout& layout)
{
    require_two_mode(layout);
    Operator a = tensor_lift(annihilation_op(layout.dim(0)), 0, layout);
    Operator ad = a.dagger();
    return {std::move(a), std::move(ad)};
}

double chi(double g, double delta, double alpha)
{
    if (delta == 0.0)
        throw PoleError("chi: pole at Delta = 0");
    if (delta - alpha == 0.0)
        throw PoleError("chi: pole at Delta = alpha");
    return -(g * g / delta) * alpha / (delta - alpha);
}

DispersiveHamiltonian build_h_dispersive(const DeviceParams& params, const FrameSpec& frame,
                                         const SpaceLayout& layout)
{
    const ModeOperators ops = mode_operators(layout);
    const double delta = params.delta_mhz();
    const double chi_mhz = chi(params.g_mhz, delta, params.alpha_mhz);

    const double d_ge = units::angular_from_ghz(params.omega_ge_ghz - frame.omega_d_ghz);
    const double d_m = units::angular_from_ghz(params.omega_m_ghz - frame.omega_d_ghz);
    Operator h = d_ge * ops.n_q;
    h += d_m * ops.n_m;
    h += (2.0 * units::angular_from_mhz(chi_mhz)) * (ops.n_q * ops.n_m);

    DispersiveHamiltonian out{std::move(h), chi_mhz, 0.0, 0.0, true};
    out.g_over_delta_sq = std::pow(params.g_mhz / delta, 2);
    out.g_over_delta_minus_alpha_sq = std::pow(params.g_mhz / (delta - params.alpha_mhz), 2);
    out.dispersive_valid = out.g_over_delta_sq <= 0.1 && out.g_over_delta_minus_alpha_sq <= 0.1;
    return out;
}

PolaronTransform polaron_transform(double g, double delta)
{
    PolaronTransform out;
    if (delta == 0.0) {
        out.theta = std::numbers::pi / 2.0;
        out.degenerate = true;
    } else {
        out.theta = std::atan(2.0 * g / delta);
    }
    const double c = std::cos(out.theta / 2.0);
    const double s = std::sin(out.theta / 2.0);
    out.mixing << c, s, -s, c;
    return out;
}

PolaritonFrequencies polariton_frequencies(double omega_ge, double omega_m, double g)
{
    const double mean = 0.5 * (omega_ge + omega_m);
    const double delta = omega_ge - omega_m;
    const double half_split = std::sqrt(0.25 * delta * delta + g * g);
    return {mean + half_split, mean - half_split};
}

double flux_to_frequency(double phi, double omega_max)
{
    return omega_max * std::sqrt(std::abs(std::cos(std::numbers::pi * phi)));
}

double frequency_to_flux(double omega, double omega_max)
{
    if (omega < 0.0 || omega > omega_max)
        throw NumericError("frequency_to_flux: frequency outside [0, omega_max]");
    const double r = omega / omega_max;
    return std::acos(r * r) / std::numbers::pi;
}

GammaRates gamma_decomposition(double t1_us, double gamma_total_khz)
{
    if (!(t1_us > 0.0))
        throw NumericError("gamma_decomposition: T1 must be positive");
    const double gamma = units::angular_from_khz(gamma_total_khz);
    const double t1_limit = 1.0 / (2.0 * t1_us);
    const double inv_t_phi = gamma - t1_limit;
    // Allow rounding noise at the T1 limit itself.
    if (inv_t_phi < -1e-12 * gamma)
        throw NumericError("infeasible linewidth: gamma/2pi = " + std::to_string(gamma_total_khz) +
                           " kHz is below the T1 limit " + std::to_string(units::khz_from_angular(t1_limit)) +
                           " kHz");
    GammaRates out;
    out.gamma1 = 1.0 / t1_us;
    if (inv_t_phi <= 0.0) {
        out.gamma_phi = 0.0;
        out.t_phi_us = std::numeric_limits<double>::infinity();
    } else {
        out.gamma_phi = 4.0 * inv_t_phi;
        out.t_phi_us = 1.0 / inv_t_phi;
    }
    return out;
}

double chi_dispersion(double delta, double alpha, double d_delta)
{
    if (delta == 0.0)
        throw PoleError("chi_dispersion: pole at Delta = 0");
    if (delta - alpha == 0.0)
        throw PoleError("chi_dispersion: pole at Delta = alpha");
    return -((2.0 * delta - alpha) / (delta - alpha)) * (d_delta / delta);
}

double xi_from_foster(const FosterCircuit& fc)
{
    require_positive(fc.c0_ff, "c0_ff");
    require_positive(fc.c1_ff, "c1_ff");
    require_positive(fc.l1_nh, "l1_nh");
    // Phi0 = hbar / 2e (reduced flux quantum), so Phi0 / e is an impedance.
    const double phi0_over_e = hbar / (2.0 * elementary_charge * elementary_charge);
    const double c_total = (fc.c0_ff + fc.c1_ff) * 1e-15;
    const double l1 = fc.l1_nh * 1e-9;
    return fc.c0_ff / (fc.c0_ff + fc.c1_ff) * std::pow(c_total / l1 * phi0_over_e * phi0_over_e, 0.25);
}

double charging_energy_mhz(double c_ff)
{
    require_positive(c_ff, "capacitance");
    const double e2 = elementary_charge * elementary_charge;
    return e2 / (2.0 * c_ff * 1e-15) / planck * 1e-6;
}

double g_from_foster(const FosterCircuit& fc, double ej_mhz, double ec_mhz)
{
    require_positive(ej_mhz, "EJ");
    require_positive(ec_mhz, "EC");
    const double e2 = elementary_charge * elementary_charge;
    const double c0 = fc.c0_ff * 1e-15;
    const double c1 = fc.c1_ff * 1e-15;
    const double c_sigma = e2 / (2.0 * ec_mhz * 1e6 * planck);

    // Cross charging energy of the capacitive network, as a frequency E/h in MHz.
    const double c_series = 1.0 / (1.0 / c1 + 1.0 / c_sigma);
    const double e_cross = c0 / (c1 + c_sigma) * e2 / (2.0 * (c0 + c_series)) / planck * 1e-6;

    const double n_zp_phi = 0.5 * std::pow(ej_mhz / (2.0 * ec_mhz), 0.25);
    const double phi0_over_e = hbar / (2.0 * elementary_charge * elementary_charge);
    const double n_zp_theta = 0.5 * std::pow((c0 + c1) / (fc.l1_nh * 1e-9) * phi0_over_e * phi0_over_e, 0.25);

    return 8.0 * e_cross * n_zp_theta * n_zp_phi;
}

double g_reduced(double xi, double ej_mhz, double ec_mhz)
{
    return xi * std::pow(8.0 * ej_mhz * ec_mhz * ec_mhz * ec_mhz, 0.25);
}

double g_of_alpha(double xi, double omega_ge_ghz, double alpha_mhz)
{
    const double omega = 1e3 * omega_ge_ghz;
    return xi * std::sqrt(alpha_mhz * (omega + alpha_mhz));
}

double ej_from_frequency(double omega_ge_ghz, double ec_mhz)
{
    require_positive(omega_ge_ghz, "omega_ge");
    require_positive(ec_mhz, "EC");
    const double w = 1e3 * omega_ge_ghz + ec_mhz;
    return w * w / (8.0 * ec_mhz);
}

double transmon_frequency(double ej_mhz, double ec_mhz)
{
    return 1e-3 * (std::sqrt(8.0 * ej_mhz * ec_mhz) - ec_mhz);
}

} // namespace phonon
