#include "phonon/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "phonon/errors.hpp"

namespace phonon {

namespace {

Operator transmon_hamiltonian(const DeviceParams& params, double frame_ghz, int n_q)
{
    const SpaceLayout layout({n_q});
    const Operator a = annihilation_op(n_q);
    const Operator ad = a.dagger();
    Operator h = units::angular_from_ghz(params.omega_ge_ghz - frame_ghz) * (ad * a);
    h -= (0.5 * units::angular_from_mhz(params.alpha_mhz)) * (ad * ad * a * a);
    return h;
}

Operator excited_projector(const SpaceLayout& layout)
{
    return tensor_lift(projector(layout.dim(0), 1), 0, layout);
}

void add_pulse(LindbladModel& model, const PulseSegment& pulse, const DeviceParams& params)
{
    const SpaceLayout& layout = model.h_static.layout();
    const Operator a = tensor_lift(annihilation_op(layout.dim(0)), 0, layout);
    // H_d = 1/2 (Omega a + Omega* a^dag) with a real envelope.
    model.drives.push_back({a, [pulse, params](double t) { return cplx(0.5 * pulse.rabi_rate(t, params)); }});
}

double peak_rabi_mhz(const PulseSegment& pulse, const DeviceParams& params)
{
    return pulse.correction * rabi_rate_from_voltage(pulse.envelope.v0, pulse.calibration, params);
}

// Series value at a time that is exactly on the sample grid.
double sample_at(const Trajectory& traj, const std::string& name, double t)
{
    const auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
    if (it == traj.times.end() || *it != t)
        throw NumericError("no sample recorded at t = " + std::to_string(t) + " us");
    return traj.series(name)[std::size_t(it - traj.times.begin())];
}

void require_sorted_nonnegative(const std::vector<double>& v, const char* what)
{
    if (v.empty())
        throw ConfigError(std::string(what) + " must not be empty");
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0))
            throw ConfigError(std::string(what) + " must be non-negative");
        if (i > 0 && !(v[i] > v[i - 1]))
            throw ConfigError(std::string(what) + " must be strictly increasing");
    }
}

struct Prominence {
    std::size_t index;
    double prominence;
    double fwhm;
};

std::vector<Prominence> local_maxima(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<Prominence> out;
    const std::size_t n = y.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] > y[i - 1] && y[i] >= y[i + 1]))
            continue;
        double left = y[i];
        std::size_t l = i;
        while (l > 0 && y[l - 1] <= y[i]) {
            --l;
            left = std::min(left, y[l]);
        }
        double right = y[i];
        std::size_t r = i;
        while (r + 1 < n && y[r + 1] <= y[i]) {
            ++r;
            right = std::min(right, y[r]);
        }
        const double prom = y[i] - std::max(left, right);
        if (!(prom > 0.0))
            continue;
        const double half = y[i] - 0.5 * prom;
        std::size_t a = i, b = i;
        while (a > 0 && y[a - 1] > half)
            --a;
        while (b + 1 < n && y[b + 1] > half)
            ++b;
        const double step = x[std::min(i + 1, n - 1)] - x[i - 1];
        out.push_back({i, prom, std::max(0.5 * step, x[std::min(b + 1, n - 1)] - x[a > 0 ? a - 1 : 0])});
    }
    return out;
}

} // namespace

Rates device_rates(const DeviceParams& params)
{
    const GammaRates g = gamma_decomposition(params.t1_us, params.gamma_total_khz);
    return {g.gamma1, g.gamma_phi, units::angular_from_khz(params.kappa_khz)};
}

std::vector<CollapseTerm> collapse_terms(const Rates& rates, const SpaceLayout& layout)
{
    const Operator a = tensor_lift(annihilation_op(layout.dim(0)), 0, layout);
    std::vector<CollapseTerm> out{{a, rates.gamma1}, {a.dagger() * a, 0.5 * rates.gamma_phi}};
    if (layout.subsystems() > 1)
        out.push_back({tensor_lift(annihilation_op(layout.dim(1)), 1, layout), rates.kappa});
    return out;
}

void SimulationSettings::validate() const
{
    if (n_q < 2 || n_m < 2)
        throw ConfigError("truncation must be at least 2 levels per mode (got N_q = " + std::to_string(n_q) +
                          ", N_m = " + std::to_string(n_m) + ")");
    if (integrator.method == IntegratorMethod::rk45 &&
        !(integrator.tolerance > 0.0 && integrator.tolerance <= 1e-3))
        throw ConfigError("integrator tolerance must lie in (0, 1e-3]");
    if (rates && (rates->gamma1 < 0.0 || rates->gamma_phi < 0.0 || rates->kappa < 0.0))
        throw ConfigError("rates must be non-negative");
    if (!fan_out)
        throw ConfigError("fan-out callback is empty");
}

double frame_frequency_scale(const DeviceParams& params, double omega_d_ghz, double omega0_mhz)
{
    return std::max({std::abs(1e3 * (params.omega_ge_ghz - omega_d_ghz)),
                     std::abs(1e3 * (params.omega_m_ghz - omega_d_ghz)), params.alpha_mhz, params.g_mhz,
                     std::abs(omega0_mhz)});
}

IntegratorConfig stage_integrator(const IntegratorConfig& base, double f_max_mhz, double tau_env_us)
{
    IntegratorConfig cfg = base;
    if (!(cfg.dt > 0.0))
        cfg.dt = default_time_step(f_max_mhz, tau_env_us);
    return cfg;
}

void Diagnostics::absorb(const Trajectory& traj)
{
    max_trace_drift = std::max(max_trace_drift, traj.max_trace_drift);
    max_hermiticity_error = std::max(max_hermiticity_error, traj.max_hermiticity_error);
    if (traj.final_state)
        min_final_eigenvalue = std::min(min_final_eigenvalue, traj.final_state->min_eigenvalue());
    steps += traj.steps;
    dt_us = std::max(dt_us, traj.dt_used);
}

void Diagnostics::absorb(const Diagnostics& other)
{
    max_trace_drift = std::max(max_trace_drift, other.max_trace_drift);
    max_hermiticity_error = std::max(max_hermiticity_error, other.max_hermiticity_error);
    min_final_eigenvalue = std::min(min_final_eigenvalue, other.min_final_eigenvalue);
    steps += other.steps;
    dt_us = std::max(dt_us, other.dt_us);
}

void SpectrumFrame::validate() const
{
    if (detunings_mhz.size() != response.size())
        throw NumericError("spectrum frame: detuning and response lengths differ");
    for (std::size_t i = 1; i < detunings_mhz.size(); ++i)
        if (!(detunings_mhz[i] > detunings_mhz[i - 1]))
            throw NumericError("spectrum frame: detunings must be strictly increasing");
}

// ---- Rabi -------------------------------------------------------------------

RabiScan rabi_scan(const DeviceParams& params, const std::vector<double>& voltages, const RabiOptions& options,
                   const SimulationSettings& settings)
{
    settings.validate();
    if (!(options.sigma_ns > 0.0) || !(options.duration_sigmas > 0.0))
        throw ConfigError("Rabi pulse sigma and window must be positive");
    if (voltages.empty())
        throw ConfigError("Rabi scan needs at least one voltage");

    const SpaceLayout layout = options.include_mechanics ? settings.layout() : SpaceLayout({settings.n_q});
    const double frame = options.include_mechanics ? dressed_qubit_ghz(params) : params.omega_ge_ghz;
    const Operator h0 = options.include_mechanics ? build_h0(params, {frame}, layout)
                                                  : transmon_hamiltonian(params, frame, settings.n_q);
    const Rates rates = settings.rates.value_or(device_rates(params));
    const Operator pe = excited_projector(layout);
    const double duration_ns = options.duration_sigmas * options.sigma_ns;
    const double vmax = *std::max_element(voltages.begin(), voltages.end());
    const IntegratorConfig cfg =
        stage_integrator(settings.integrator,
                         frame_frequency_scale(params, frame, rabi_rate_from_voltage(vmax, CalibrationKey::a1, params)),
                         units::us_from_ns(duration_ns));

    RabiScan scan{voltages, std::vector<double>(voltages.size()), options, rates, {}};
    std::vector<Diagnostics> diags(voltages.size());
    std::vector<int> ground(layout.subsystems(), 0);
    const DensityState rho0 = basis_state(layout, ground);

    settings.fan_out(voltages.size(), [&](std::size_t i) {
        PulseSegment pulse;
        pulse.envelope = {EnvelopeShape::gaussian, duration_ns, options.sigma_ns, voltages[i]};
        pulse.carrier_ghz = frame;
        pulse.calibration = CalibrationKey::a1;
        pulse.validate();
        LindbladModel model(h0);
        model.collapses = collapse_terms(rates, layout);
        add_pulse(model, pulse, params);
        const Trajectory traj = evolve(model, rho0, 0.0, pulse.end_us(), cfg, {{"p_e", pe}});
        scan.p_e[i] = traj.series("p_e").back();
        diags[i].absorb(traj);
    });
    for (const Diagnostics& d : diags)
        scan.diagnostics.absorb(d);
    return scan;
}

RabiCalibration extract_a1(const RabiScan& scan)
{
    const std::vector<double>& v = scan.voltages;
    const std::vector<double>& p = scan.p_e;
    const int n = int(v.size());
    if (n < 5)
        throw FitError("Rabi fit needs at least 5 voltages");

    // First lobe maximum seeds the pi-pulse voltage.
    const double pmax = *std::max_element(p.begin(), p.end());
    const double pmin = *std::min_element(p.begin(), p.end());
    int ipi = 0;
    for (int i = 1; i < n; ++i) {
        if (p[i] > p[ipi])
            ipi = i;
        if (p[ipi] > pmin + 0.5 * (pmax - pmin) && p[i] < p[ipi] - 0.1 * (pmax - pmin))
            break;
    }
    if (!(v[ipi] > 0.0))
        throw FitError("Rabi fit: no oscillation found in the scan");

    // Pulse area of the truncated gaussian per unit Omega0 (us).
    const double sigma = units::us_from_ns(scan.options.sigma_ns);
    const double window = scan.options.duration_sigmas * sigma;
    const double area = sigma * std::sqrt(units::two_pi) * std::erf(scan.options.duration_sigmas / (2.0 * std::numbers::sqrt2));

    Eigen::VectorXd p0(3);
    p0 << std::numbers::pi / v[ipi], pmax - pmin, pmin;
    const ResidualFn sin2 = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        for (int i = 0; i < n; ++i) {
            const double s = std::sin(0.5 * q(0) * v[i]);
            r(i) = q(1) * s * s + q(2) - p[i];
        }
    };
    FitResult fr = least_squares(sin2, n, p0, "Rabi oscillation fit");
    double omega_per_v = std::abs(fr.params(0)) / area;

    const double g1 = scan.rates.gamma1;
    const double g2 = 0.5 * scan.rates.gamma1 + 0.25 * scan.rates.gamma_phi;
    if (g1 > 0.0 || g2 > 0.0) {
        // Decay damps weak drives (coherence decays at g2) more than strong ones
        // (mean of g1 and g2), which biases the plain fit low.
        const int steps = std::max(200, int(std::ceil(window / 1e-3)));
        const double h = window / steps;
        const auto excited = [&](double omega0) {
            const auto rhs = [&](double t, const Eigen::Vector2d& y) {
                const double x = (t - 0.5 * window) / sigma;
                const double om = omega0 * std::exp(-0.5 * x * x);
                return Eigen::Vector2d(-g2 * y(0) - om * y(1), om * y(0) - g1 * (y(1) + 1.0));
            };
            Eigen::Vector2d y(0.0, -1.0); // (v, w), resonant drive about x
            for (int k = 0; k < steps; ++k) {
                const double t = k * h;
                const Eigen::Vector2d k1 = rhs(t, y);
                const Eigen::Vector2d k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
                const Eigen::Vector2d k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
                const Eigen::Vector2d k4 = rhs(t + h, y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            return 0.5 * (1.0 + y(1));
        };
        const ResidualFn bloch = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
            for (int i = 0; i < n; ++i)
                r(i) = q(1) * excited(q(0) * v[i]) + q(2) - p[i];
        };
        Eigen::VectorXd q0(3);
        q0 << omega_per_v, 1.0, 0.0;
        fr = least_squares(bloch, n, q0, "damped Rabi fit");
        omega_per_v = std::abs(fr.params(0));
    }
    return {units::mhz_from_angular(omega_per_v), fr.params(1), fr.params(2), fr.residual_norm};
}

// ---- T1 and ringdown --------------------------------------------------------

DecayMeasurement t1_experiment(const DeviceParams& params, const std::vector<double>& delays_us,
                               const SimulationSettings& settings)
{
    settings.validate();
    require_sorted_nonnegative(delays_us, "T1 delays");
    if (!(delays_us.back() > 0.0))
        throw ConfigError("T1 delays must include a positive delay");

    const SpaceLayout layout({settings.n_q});
    LindbladModel model(transmon_hamiltonian(params, params.omega_ge_ghz, settings.n_q));
    model.collapses = collapse_terms(settings.rates.value_or(device_rates(params)), layout);
    const double span = delays_us.back();
    const IntegratorConfig cfg = stage_integrator(settings.integrator, params.alpha_mhz, span);

    SampleSpec sampling;
    sampling.times = delays_us;
    const Trajectory traj =
        evolve(model, basis_state(layout, {1}), 0.0, span, cfg, {{"p_e", projector(settings.n_q, 1)}}, sampling);

    DecayMeasurement out;
    out.delays_us = delays_us;
    for (double t : delays_us)
        out.signal.push_back(sample_at(traj, "p_e", t));
    out.diagnostics.absorb(traj);
    out.fit = fit_exponential(out.delays_us, out.signal, false);
    out.time_constant_us = out.fit.rate > 0.0 ? out.fit.time_constant() : std::numeric_limits<double>::infinity();
    return out;
}

DecayMeasurement ringdown_experiment(const DeviceParams& params, const std::vector<double>& delays_us,
                                     const RingdownOptions& options, const SimulationSettings& settings)
{
    settings.validate();
    require_sorted_nonnegative(delays_us, "ringdown delays");
    DecayMeasurement out;

    DeviceParams p = params;
    p.omega_ge_ghz = options.omega_ge_ghz;
    if (std::abs(p.delta_mhz()) < 5.0 * p.g_mhz) {
        std::ostringstream os;
        os << "ringdown: |Delta| = " << std::abs(p.delta_mhz()) << " MHz is below 5 g = " << 5.0 * p.g_mhz
           << " MHz; the measured decay mixes qubit and mechanics";
        out.warnings.push_back(os.str());
    }

    const SpaceLayout layout = settings.layout();
    PulseSegment pulse;
    pulse.envelope = {EnvelopeShape::cosine, options.tau_ns, 0.0, options.v_drive};
    pulse.carrier_ghz = p.omega_m_ghz;
    pulse.calibration = CalibrationKey::a3;
    pulse.validate();

    LindbladModel model(build_h0(p, {pulse.carrier_ghz}, layout));
    model.collapses = collapse_terms(settings.rates.value_or(device_rates(p)), layout);
    add_pulse(model, pulse, p);
    const double t_end = pulse.end_us() + delays_us.back();
    const IntegratorConfig cfg = stage_integrator(
        settings.integrator, frame_frequency_scale(p, pulse.carrier_ghz, peak_rabi_mhz(pulse, p)), pulse.end_us());

    SampleSpec sampling;
    for (double d : delays_us)
        sampling.times.push_back(pulse.end_us() + d);
    const Operator nm = tensor_lift(number_op(settings.n_m), 1, layout);
    const Trajectory traj = evolve(model, basis_state(layout, {0, 0}), 0.0, t_end, cfg, {{"n_m", nm}}, sampling);

    out.delays_us = delays_us;
    for (double t : sampling.times)
        out.signal.push_back(sample_at(traj, "n_m", t));
    out.diagnostics.absorb(traj);
    out.fit = fit_exponential(out.delays_us, out.signal, false);
    out.time_constant_us = out.fit.rate > 0.0 ? out.fit.time_constant() : std::numeric_limits<double>::infinity();
    return out;
}

// ---- flux sweep -------------------------------------------------------------

Eigen::VectorXd one_excitation_frequencies(const std::vector<MechanicalMode>& modes, double qubit_ghz)
{
    const Eigen::Index m = Eigen::Index(modes.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m + 1);
    h(0, 0) = qubit_ghz;
    for (Eigen::Index i = 0; i < m; ++i) {
        h(i + 1, i + 1) = modes[std::size_t(i)].omega_ghz;
        h(0, i + 1) = h(i + 1, 0) = 1e-3 * modes[std::size_t(i)].g_mhz;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

AnticrossingMap flux_sweep_spectrum(const std::vector<MechanicalMode>& modes, double omega_max_ghz,
                                    const std::vector<double>& flux_grid)
{
    if (flux_grid.empty())
        throw ConfigError("flux grid must not be empty");
    AnticrossingMap map;
    map.flux = flux_grid;
    map.branches_ghz.resize(Eigen::Index(flux_grid.size()), Eigen::Index(modes.size() + 1));
    for (std::size_t k = 0; k < flux_grid.size(); ++k) {
        const double wq = flux_to_frequency(flux_grid[k], omega_max_ghz);
        map.qubit_ghz.push_back(wq);
        map.branches_ghz.row(Eigen::Index(k)) = one_excitation_frequencies(modes, wq).transpose();
    }
    return map;
}

namespace {

// Rank of mode `index` in ascending frequency order: the bracketing branch pair is (rank, rank + 1).
std::size_t mode_rank(const std::vector<MechanicalMode>& modes, std::size_t index)
{
    if (index >= modes.size())
        throw ConfigError("mode index " + std::to_string(index) + " out of range");
    std::size_t rank = 0;
    for (std::size_t j = 0; j < modes.size(); ++j)
        if (modes[j].omega_ghz < modes[index].omega_ghz || (modes[j].omega_ghz == modes[index].omega_ghz && j < index))
            ++rank;
    return rank;
}

double branch_gap_mhz(const std::vector<MechanicalMode>& modes, std::size_t rank, double qubit_ghz)
{
    const Eigen::VectorXd e = one_excitation_frequencies(modes, qubit_ghz);
    return 1e3 * (e(Eigen::Index(rank + 1)) - e(Eigen::Index(rank)));
}

} // namespace

Splitting grid_minimal_splitting(const AnticrossingMap& map, const std::vector<MechanicalMode>& modes,
                                 std::size_t index)
{
    if (map.branches_ghz.cols() != Eigen::Index(modes.size() + 1))
        throw ConfigError("anticrossing map does not match the mode list");
    const std::size_t r = mode_rank(modes, index);
    Splitting best{0.0, std::numeric_limits<double>::infinity()};
    for (Eigen::Index k = 0; k < map.branches_ghz.rows(); ++k) {
        const double gap = 1e3 * (map.branches_ghz(k, Eigen::Index(r + 1)) - map.branches_ghz(k, Eigen::Index(r)));
        if (gap < best.gap_mhz)
            best = {map.qubit_ghz[std::size_t(k)], gap};
    }
    return best;
}

Splitting minimal_splitting(const std::vector<MechanicalMode>& modes, std::size_t index)
{
    const std::size_t r = mode_rank(modes, index);
    const double w = modes[index].omega_ghz;
    double half = 0.1;
    for (std::size_t j = 0; j < modes.size(); ++j)
        if (j != index && modes[j].omega_ghz != w)
            half = std::min(half, 0.5 * std::abs(modes[j].omega_ghz - w));

    double lo = w - half, hi = w + half;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = branch_gap_mhz(modes, r, x1), f2 = branch_gap_mhz(modes, r, x2);
    while (hi - lo > 1e-12) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = branch_gap_mhz(modes, r, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = branch_gap_mhz(modes, r, x2);
        }
    }
    const double x = 0.5 * (lo + hi);
    return {x, branch_gap_mhz(modes, r, x)};
}

std::vector<double> extract_couplings(const std::vector<MechanicalMode>& modes)
{
    std::vector<double> g;
    for (std::size_t i = 0; i < modes.size(); ++i)
        g.push_back(0.5 * minimal_splitting(modes, i).gap_mhz);
    return g;
}

std::vector<MechanicalMode> calibrate_bare_couplings(const std::vector<MechanicalMode>& measured)
{
    std::vector<MechanicalMode> bare = measured;
    for (int iter = 0; iter < 200; ++iter) {
        const std::vector<double> g = extract_couplings(bare);
        double worst = 0.0;
        for (std::size_t i = 0; i < bare.size(); ++i) {
            worst = std::max(worst, std::abs(g[i] - measured[i].g_mhz));
            if (g[i] > 0.0)
                bare[i].g_mhz *= measured[i].g_mhz / g[i];
        }
        if (worst < 1e-9)
            return bare;
    }
    throw NumericError("coupling calibration did not converge");
}

// ---- number splitting -------------------------------------------------------

double dressed_qubit_excitation(const DeviceParams& params, const DensityState& rho)
{
    const SpaceLayout& layout = rho.layout();
    // Lab frame: no accidental degeneracies between the |g, n> ladder states.
    const Operator h = build_h0(params, {0.0}, layout);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h.matrix());
    if (eig.info() != Eigen::Success)
        throw NumericError("dressed basis diagonalization failed");
    const int nm = layout.dim(1);
    double excited = 0.0;
    for (int k = 0; k < layout.total(); ++k) {
        const Vector v = eig.eigenvectors().col(k);
        Eigen::Index dominant = 0;
        v.cwiseAbs2().maxCoeff(&dominant);
        if (dominant / nm >= 1)
            excited += (v.adjoint() * rho.matrix() * v)(0, 0).real();
    }
    return excited;
}

PhononPreparation prepare_phonons(const DeviceParams& params, const PumpProbeSchedule& schedule,
                                  const SimulationSettings& settings)
{
    settings.validate();
    const SpaceLayout layout = settings.layout();
    const PulseSegment& pulse = schedule.phonon_pulse;
    LindbladModel model(build_h0(params, {pulse.carrier_ghz}, layout));
    model.collapses = collapse_terms(settings.rates.value_or(device_rates(params)), layout);
    add_pulse(model, pulse, params);
    const IntegratorConfig cfg =
        stage_integrator(settings.integrator,
                         frame_frequency_scale(params, pulse.carrier_ghz, peak_rabi_mhz(pulse, params)),
                         pulse.envelope.duration_us());
    const ModeOperators ops = mode_operators(layout);
    const Trajectory traj = evolve(model, basis_state(layout, {0, 0}), pulse.start_us, pulse.end_us(), cfg,
                                   {{"n_m", ops.n_m}, {"n_q", ops.n_q}});
    PhononPreparation out{*traj.final_state, traj.series("n_m").back(),
                          dressed_qubit_excitation(params, *traj.final_state), {}};
    out.diagnostics.absorb(traj);
    return out;
}

SpectroscopyPoint spectroscopy_point(const DeviceParams& params, const PumpProbeSchedule& schedule,
                                     const DensityState& prepared, const SimulationSettings& settings)
{
    const SpaceLayout& layout = prepared.layout();
    const PulseSegment& pulse = schedule.spectroscopy_pulse;
    LindbladModel model(build_h0(params, {pulse.carrier_ghz}, layout));
    model.collapses = collapse_terms(settings.rates.value_or(device_rates(params)), layout);
    add_pulse(model, pulse, params);
    const IntegratorConfig cfg =
        stage_integrator(settings.integrator,
                         frame_frequency_scale(params, pulse.carrier_ghz, peak_rabi_mhz(pulse, params)),
                         pulse.envelope.duration_us());

    const double t_read = schedule.readout_start_us(), t_end = schedule.readout_end_us();
    // Readout samples every ~0.5 ns.
    SampleSpec sampling = SampleSpec::uniform(t_read, t_end, std::max(2, int(std::ceil(2.0 * schedule.readout_ns))));
    sampling.times.push_back(schedule.nbar_time_us());

    const Operator nm = tensor_lift(number_op(layout.dim(1)), 1, layout);
    const Trajectory traj = evolve(model, prepared, pulse.start_us, t_end, cfg,
                                   {{"p_e", excited_projector(layout)}, {"n_m", nm}}, sampling);
    SpectroscopyPoint out;
    out.p_e = time_averaged_population(traj, "p_e", t_read, t_end - t_read);
    out.nbar = sample_at(traj, "n_m", schedule.nbar_time_us());
    out.diagnostics.absorb(traj);
    return out;
}

NumberSplittingResult number_splitting_sweep(const DeviceParams& params, const std::vector<double>& voltages,
                                             const std::vector<double>& detunings_mhz,
                                             const ScheduleOptions& options, const SimulationSettings& settings)
{
    settings.validate();
    options.validate();
    if (voltages.empty())
        throw ConfigError("number splitting needs at least one voltage");
    SpectrumFrame probe{detunings_mhz, std::vector<double>(detunings_mhz.size()), {}};
    probe.validate();
    if (detunings_mhz.empty())
        throw ConfigError("number splitting needs at least one detuning");

    NumberSplittingResult result;
    const double gd2 = std::pow(params.g_mhz / params.delta_mhz(), 2);
    if (gd2 >= 0.1) {
        std::ostringstream os;
        os << "dispersive check failed: (g/Delta)^2 = " << gd2 << " >= 0.1";
        result.warnings.push_back(os.str());
    }

    const std::size_t nv = voltages.size(), nd = detunings_mhz.size();
    std::vector<std::optional<PhononPreparation>> preps(nv);
    settings.fan_out(nv, [&](std::size_t i) {
        preps[i].emplace(prepare_phonons(params, pump_probe_schedule(params, voltages[i], 0.0, options), settings));
    });

    std::vector<SpectroscopyPoint> points(nv * nd);
    settings.fan_out(nv * nd, [&](std::size_t k) {
        const std::size_t i = k / nd, j = k % nd;
        const PumpProbeSchedule s = pump_probe_schedule(params, voltages[i], detunings_mhz[j], options);
        points[k] = spectroscopy_point(params, s, preps[i]->state, settings);
    });

    for (std::size_t i = 0; i < nv; ++i) {
        VoltageSpectrum vs;
        vs.voltage = voltages[i];
        vs.spectrum.detunings_mhz = detunings_mhz;
        double nbar = 0.0;
        for (std::size_t j = 0; j < nd; ++j) {
            const SpectroscopyPoint& pt = points[i * nd + j];
            vs.spectrum.response.push_back(pt.p_e);
            nbar += pt.nbar;
            result.diagnostics.absorb(pt.diagnostics);
        }
        vs.nbar = nbar / double(nd);
        vs.phonons_after_pulse = preps[i]->mean_phonons;
        vs.qubit_residual = preps[i]->qubit_residual;
        result.diagnostics.absorb(preps[i]->diagnostics);
        vs.spectrum.metadata = {{"voltage_V", vs.voltage},
                                {"nbar", vs.nbar},
                                {"phonons_after_pulse", vs.phonons_after_pulse},
                                {"qubit_residual", vs.qubit_residual},
                                {"tau_mech_ns", options.tau_mech_ns},
                                {"tau_ns", options.tau_ns},
                                {"readout_ns", options.readout_ns},
                                {"v_spectroscopy_V", options.v_spectroscopy},
                                {"phonon_correction", options.phonon_correction}};
        result.spectra.push_back(std::move(vs));
    }
    return result;
}

double mean_phonon_number(const DeviceParams& params, double voltage, const ScheduleOptions& options,
                          const SimulationSettings& settings)
{
    const PumpProbeSchedule s = pump_probe_schedule(params, voltage, 0.0, options);
    const PhononPreparation prep = prepare_phonons(params, s, settings);
    return spectroscopy_point(params, s, prep.state, settings).nbar;
}

double voltage_for_nbar(const DeviceParams& params, double target_nbar, const ScheduleOptions& options,
                        const SimulationSettings& settings)
{
    if (!(target_nbar > 0.0))
        throw ConfigError("target mean phonon number must be positive");
    double v0 = 0.3;
    double n0 = mean_phonon_number(params, v0, options, settings);
    if (!(n0 > 0.0))
        throw NumericError("phonon drive produces no occupation");
    double v1 = v0 * std::sqrt(target_nbar / n0);
    for (int iter = 0; iter < 12; ++iter) {
        const double n1 = mean_phonon_number(params, v1, options, settings);
        if (std::abs(n1 - target_nbar) < 1e-6 * target_nbar)
            return v1;
        const double slope = (std::sqrt(n1) - std::sqrt(n0)) / (v1 - v0);
        if (!(slope > 0.0))
            throw NumericError("mean phonon number is not increasing with drive voltage");
        v0 = v1;
        n0 = n1;
        v1 = v1 + (std::sqrt(target_nbar) - std::sqrt(n1)) / slope;
    }
    return v1;
}

std::vector<double> linear_grid(double lo, double hi, int points)
{
    if (points < 2 || !(hi > lo))
        throw ConfigError("grid needs hi > lo and at least 2 points");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        g[std::size_t(i)] = i == points - 1 ? hi : lo + (hi - lo) * i / (points - 1);
    return g;
}

// ---- peaks ------------------------------------------------------------------

std::vector<double> PeakFit::spacings() const
{
    std::vector<double> s;
    for (std::size_t i = 1; i < peaks.size(); ++i)
        s.push_back(peaks[i].center - peaks[i - 1].center);
    return s;
}

PeakFit peak_fit(const SpectrumFrame& frame, int n_peaks)
{
    frame.validate();
    if (n_peaks < 1)
        throw ConfigError("peak_fit needs n_peaks >= 1");
    const std::vector<double>& x = frame.detunings_mhz;
    const std::vector<double>& y = frame.response;
    std::vector<Prominence> maxima = local_maxima(x, y);
    if (int(maxima.size()) < n_peaks) {
        std::ostringstream os;
        os << "peak_fit: requested " << n_peaks << " peaks but found " << maxima.size() << " local maxima";
        for (const Prominence& m : maxima)
            os << " [" << x[m.index] << " MHz, prominence " << m.prominence << "]";
        throw FitError(os.str());
    }
    std::sort(maxima.begin(), maxima.end(),
              [](const Prominence& a, const Prominence& b) { return a.prominence > b.prominence; });
    maxima.resize(std::size_t(n_peaks));

    const double base = *std::min_element(y.begin(), y.end());
    std::vector<Lorentzian> guess;
    for (const Prominence& m : maxima)
        guess.push_back({x[m.index], m.fwhm, y[m.index] - base});
    const MultiLorentzianFit fit = fit_lorentzians(x, y, guess, base, true);
    return {fit.peaks, fit.offset, fit.residual_norm};
}

PeakFit peak_fit(const SpectrumFrame& frame, const std::vector<double>& centers, double fwhm)
{
    frame.validate();
    if (centers.empty() || !(fwhm > 0.0))
        throw ConfigError("peak_fit needs seed centers and a positive seed width");
    const std::vector<double>& x = frame.detunings_mhz;
    const std::vector<double>& y = frame.response;
    const double base = *std::min_element(y.begin(), y.end());
    std::vector<Lorentzian> guess;
    for (double c : centers) {
        const auto it = std::lower_bound(x.begin(), x.end(), c);
        const std::size_t i = std::min<std::size_t>(std::size_t(it - x.begin()), x.size() - 1);
        guess.push_back({c, fwhm, std::max(y[i] - base, 1e-3 * (*std::max_element(y.begin(), y.end()) - base))});
    }
    const MultiLorentzianFit fit = fit_lorentzians(x, y, guess, base, true);
    return {fit.peaks, fit.offset, fit.residual_norm};
}

PeakFit ladder_peak_fit(const SpectrumFrame& frame, int n_peaks, double chi_mhz)
{
    frame.validate();
    if (n_peaks < 2)
        throw ConfigError("ladder_peak_fit needs n_peaks >= 2");
    if (!(chi_mhz != 0.0) || !std::isfinite(chi_mhz))
        throw ConfigError("ladder_peak_fit needs a finite nonzero chi");
    std::vector<Prominence> maxima = local_maxima(frame.detunings_mhz, frame.response);
    if (maxima.empty())
        throw FitError("ladder_peak_fit: no local maximum to seed the ladder");
    std::sort(maxima.begin(), maxima.end(),
              [](const Prominence& a, const Prominence& b) { return a.prominence > b.prominence; });
    double a = frame.detunings_mhz[maxima[0].index];
    double step = 2.0 * chi_mhz;
    if (maxima.size() >= 2) {
        double b = frame.detunings_mhz[maxima[1].index];
        // Peak n sits at c0 + 2 chi n: the zero-phonon line is on the side opposite to chi's sign.
        if ((chi_mhz < 0.0) == (a < b))
            std::swap(a, b);
        step = b - a;
    }
    std::vector<double> centers;
    for (int n = 0; n < n_peaks; ++n)
        centers.push_back(a + n * step);
    return peak_fit(frame, centers, std::min(maxima[0].fwhm, 0.5 * std::abs(step)));
}

int resolved_peak_count(const PeakFit& fit, double min_height_fraction)
{
    double top = 0.0;
    for (const Lorentzian& p : fit.peaks)
        top = std::max(top, p.height);
    std::vector<const Lorentzian*> kept;
    for (const Lorentzian& p : fit.peaks)
        if (p.height >= min_height_fraction * top && p.height > 0.0)
            kept.push_back(&p);
    if (kept.empty())
        return 0;
    // Sparrow limit for two Lorentzians of widths w1, w2: separation >= (w1 + w2) / (2 sqrt 3).
    int count = 1;
    for (std::size_t i = 1; i < kept.size(); ++i)
        if (kept[i]->center - kept[i - 1]->center >= (kept[i]->fwhm + kept[i - 1]->fwhm) / (2.0 * std::sqrt(3.0)))
            ++count;
    return count;
}

int count_resolved_peaks(const SpectrumFrame& frame, double min_fraction)
{
    frame.validate();
    const std::vector<Prominence> maxima = local_maxima(frame.detunings_mhz, frame.response);
    double top = 0.0;
    for (const Prominence& m : maxima)
        top = std::max(top, m.prominence);
    int count = 0;
    for (const Prominence& m : maxima)
        if (m.prominence >= min_fraction * top)
            ++count;
    return count;
}

} // namespace phonon
