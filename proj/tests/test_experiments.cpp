#include <algorithm>
#include <cmath>
#include <numbers>

#include <doctest.h>

#include "phonon/errors.hpp"
#include "phonon/experiments.hpp"

using namespace phonon;

namespace {

SimulationSettings small(int n_m)
{
    SimulationSettings s;
    s.n_q = 3;
    s.n_m = n_m;
    s.fan_out = thread_fan_out(default_thread_count());
    return s;
}

void check_invariants(const Diagnostics& d)
{
    CHECK(d.max_trace_drift < 1e-8);
    CHECK(d.max_hermiticity_error < 1e-9);
    CHECK(d.min_final_eigenvalue > -1e-7);
}

/// Voltage whose gaussian pulse area equals pi for the given calibration (MHz/V).
double pi_voltage(const RabiOptions& o, double a1_mhz_per_v)
{
    const double sigma = units::us_from_ns(o.sigma_ns);
    const double area = sigma * std::sqrt(units::two_pi) * std::erf(o.duration_sigmas / (2.0 * std::numbers::sqrt2));
    return std::numbers::pi / (units::angular_from_mhz(a1_mhz_per_v) * area);
}

} // namespace

TEST_SUITE("experiments")
{
    TEST_CASE("Rabi scan on the bare transmon")
    {
        const DeviceParams p;
        RabiOptions o;
        o.include_mechanics = false;
        const std::vector<double> volts = linear_grid(0.0, 0.12, 41);
        const RabiScan scan = rabi_scan(p, volts, o, small(4));
        check_invariants(scan.diagnostics);
        CHECK(std::abs(scan.p_e.front()) < 1e-12);

        // Coherent scan: first maximum at the pi-area voltage.
        SimulationSettings coherent = small(4);
        coherent.rates = Rates{};
        const double vpi = pi_voltage(o, p.a1_mhz_per_v);
        const std::vector<double> fine = linear_grid(0.8 * vpi, 1.2 * vpi, 41);
        const RabiScan c = rabi_scan(p, fine, o, coherent);
        const auto imax = std::max_element(c.p_e.begin(), c.p_e.end()) - c.p_e.begin();
        CHECK(fine[std::size_t(imax)] == doctest::Approx(vpi).epsilon(0.011));
        CHECK(c.p_e[std::size_t(imax)] > 0.99);

        const RabiCalibration cal = extract_a1(scan);
        CHECK(cal.a1_mhz_per_v == doctest::Approx(p.a1_mhz_per_v).epsilon(0.02));
    }

    TEST_CASE("Rabi calibration with the mechanics present")
    {
        const DeviceParams p;
        const RabiScan scan = rabi_scan(p, linear_grid(0.0, 0.12, 41), RabiOptions{}, small(4));
        check_invariants(scan.diagnostics);
        CHECK(extract_a1(scan).a1_mhz_per_v == doctest::Approx(p.a1_mhz_per_v).epsilon(0.02));
    }

    TEST_CASE("Rabi fit needs an oscillation")
    {
        RabiScan flat;
        flat.voltages = linear_grid(0.0, 0.1, 11);
        flat.p_e.assign(11, 0.0);
        CHECK_THROWS_AS(extract_a1(flat), FitError);
    }

    TEST_CASE("T1 experiment")
    {
        const DeviceParams p;
        const std::vector<double> delays = linear_grid(0.0, 5.0, 51);
        const DecayMeasurement m = t1_experiment(p, delays, small(4));
        check_invariants(m.diagnostics);
        CHECK(m.signal.front() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(m.time_constant_us == doctest::Approx(1.14).epsilon(0.01));

        SimulationSettings closed = small(4);
        closed.rates = Rates{};
        const DecayMeasurement f = t1_experiment(p, delays, closed);
        for (double v : f.signal)
            CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("ringdown far from the qubit recovers kappa")
    {
        const DeviceParams p;
        RingdownOptions o;
        o.omega_ge_ghz = 2.0;
        const DecayMeasurement m = ringdown_experiment(p, linear_grid(0.0, 2.0, 41), o, small(10));
        check_invariants(m.diagnostics);
        CHECK(m.warnings.empty());
        const double tau_us = 1.0 / units::angular_from_khz(p.kappa_khz);
        CHECK(m.time_constant_us == doctest::Approx(tau_us).epsilon(0.02));
    }

    TEST_CASE("ringdown without mechanical loss is flat")
    {
        const DeviceParams p;
        RingdownOptions o;
        o.omega_ge_ghz = 2.0;
        SimulationSettings s = small(10);
        s.rates = Rates{device_rates(p).gamma1, device_rates(p).gamma_phi, 0.0};
        const DecayMeasurement m = ringdown_experiment(p, linear_grid(0.0, 1.0, 11), o, s);
        for (double v : m.signal)
            CHECK(v == doctest::Approx(m.signal.front()).epsilon(2e-3));
    }

    TEST_CASE("ringdown warns when the qubit is parked too close")
    {
        const DeviceParams p;
        RingdownOptions o;
        o.omega_ge_ghz = p.omega_m_ghz - 0.05;
        const DecayMeasurement m = ringdown_experiment(p, linear_grid(0.0, 0.5, 6), o, small(6));
        CHECK_FALSE(m.warnings.empty());
    }

    TEST_CASE("phonon occupation scales as V^2 in the linear regime")
    {
        const DeviceParams p;
        const SimulationSettings s = small(12);
        const double n1 = prepare_phonons(p, pump_probe_schedule(p, 0.1, 0.0), s).mean_phonons;
        const double n2 = prepare_phonons(p, pump_probe_schedule(p, 0.2, 0.0), s).mean_phonons;
        CHECK(n1 > 0.0);
        CHECK(n2 / n1 == doctest::Approx(4.0).epsilon(0.05));
    }

    TEST_CASE("phonon pulse leaves the dressed qubit unexcited under coherent evolution")
    {
        const DeviceParams p;
        SimulationSettings s = small(14);
        const Rates r = device_rates(p);
        s.rates = Rates{r.gamma1, 0.0, r.kappa};
        const PhononPreparation prep = prepare_phonons(p, pump_probe_schedule(p, 0.55, 0.0), s);
        check_invariants(prep.diagnostics);
        CHECK(prep.mean_phonons > 1.0);
        CHECK(prep.qubit_residual < 0.05);
    }

    TEST_CASE("coherent drive prepares Poisson phonon statistics")
    {
        const DeviceParams p;
        const SimulationSettings s = [] {
            SimulationSettings x = small(20);
            x.rates = Rates{};
            return x;
        }();
        const PhononPreparation prep = prepare_phonons(p, pump_probe_schedule(p, 0.3, 0.0), s);
        const Eigen::VectorXd pn = partial_trace(prep.state, 1).populations();
        const double nbar = prep.mean_phonons;
        double poisson = std::exp(-nbar);
        for (int n = 0; n < 6; ++n) {
            if (n > 0)
                poisson *= nbar / n;
            CHECK(std::abs(pn(n) - poisson) < 0.02);
        }
    }

    TEST_CASE("probe peak heights follow the number-state populations")
    {
        const DeviceParams p;
        SimulationSettings s = small(10);
        s.rates = Rates{};
        ScheduleOptions o;
        o.v_spectroscopy = 1e-3;
        const double vph = 0.3;

        // Exact transition detunings of |g,n> -> |e,n> relative to the dressed qubit.
        const SpaceLayout l = s.layout();
        Eigen::SelfAdjointEigenSolver<Matrix> es(build_h0(p, {dressed_qubit_ghz(p)}, l).matrix());
        const auto level = [&](int nq, int nm) {
            Eigen::Index k = 0;
            (es.eigenvectors().adjoint() * basis_vector(l, {nq, nm})).cwiseAbs().maxCoeff(&k);
            return es.eigenvalues()(k);
        };
        const PhononPreparation prep = prepare_phonons(p, pump_probe_schedule(p, vph, 0.0, o), s);
        const Eigen::VectorXd pn = partial_trace(prep.state, 1).populations();
        // Without decay the qubit keeps what the phonon pulse left in it: a flat background.
        const double background =
            spectroscopy_point(p, pump_probe_schedule(p, vph, 20.0, o), prep.state, s).p_e;
        std::vector<double> height;
        for (int n = 0; n < 3; ++n) {
            const double delta = units::mhz_from_angular(level(1, n) - level(0, n));
            const PumpProbeSchedule sch = pump_probe_schedule(p, vph, delta, o);
            height.push_back(spectroscopy_point(p, sch, prep.state, s).p_e - background);
        }
        CHECK(height[0] > 0.0);
        CHECK(height[1] / height[0] == doctest::Approx(pn(1) / pn(0)).epsilon(0.1));
        CHECK(height[2] / height[1] == doctest::Approx(pn(2) / pn(1)).epsilon(0.1));
    }

    TEST_CASE("probe far from resonance keeps the state positive")
    {
        // Qubit 8 g below the mode: phonon coherences rotate quickly in the probe frame.
        DeviceParams p;
        p.omega_ge_ghz = p.omega_m_ghz - 8e-3 * p.g_mhz;
        const SimulationSettings s = small(10);
        const PhononPreparation prep = prepare_phonons(p, pump_probe_schedule(p, 0.356, 0.0, ScheduleOptions{}), s);
        const SpectroscopyPoint pt = spectroscopy_point(p, pump_probe_schedule(p, 0.356, 3.0, ScheduleOptions{}),
                                                        prep.state, s);
        check_invariants(prep.diagnostics);
        check_invariants(pt.diagnostics);
    }

    TEST_CASE("undriven spectrum is a single line near the qubit linewidth")
    {
        const DeviceParams p;
        const std::vector<double> grid = linear_grid(-4.0, 4.0, 41);
        const NumberSplittingResult r = number_splitting_sweep(p, {0.0}, grid, ScheduleOptions{}, small(3));
        REQUIRE(r.spectra.size() == 1);
        check_invariants(r.diagnostics);
        const SpectrumFrame& f = r.spectra[0].spectrum;
        CHECK(f.detunings_mhz == grid);
        CHECK(count_resolved_peaks(f) == 1);
        const PeakFit fit = peak_fit(f, 1);
        CHECK(std::abs(fit.peaks[0].center) < 0.1);
        CHECK(fit.peaks[0].fwhm > 0.6);
        CHECK(fit.peaks[0].fwhm < 2.0);
        // Only the hybridized admixture of the probed qubit: at most (g / Delta)^2.
        CHECK(r.spectra[0].nbar >= 0.0);
        CHECK(r.spectra[0].nbar <= std::pow(p.g_mhz / p.delta_mhz(), 2));
    }

    TEST_CASE("phonon-pulse voltage for a target occupation")
    {
        const DeviceParams p;
        const SimulationSettings s = small(10);
        const double v = voltage_for_nbar(p, 0.5, ScheduleOptions{}, s);
        CHECK(mean_phonon_number(p, v, ScheduleOptions{}, s) == doctest::Approx(0.5).epsilon(1e-4));
        CHECK_THROWS_AS(voltage_for_nbar(p, 0.0, ScheduleOptions{}, s), ConfigError);
    }

    TEST_CASE("dispersive-regime check warns but runs")
    {
        DeviceParams p;
        p.omega_ge_ghz = p.omega_m_ghz - 0.03;
        const NumberSplittingResult r = number_splitting_sweep(p, {0.0}, linear_grid(-1.0, 1.0, 3), ScheduleOptions{},
                                                               small(3));
        CHECK_FALSE(r.warnings.empty());
        CHECK(r.spectra.size() == 1);
    }

    TEST_CASE("anticrossing map splittings")
    {
        const std::vector<MechanicalMode> measured = table_s1_modes();
        const std::vector<MechanicalMode> bare = calibrate_bare_couplings(measured);
        const AnticrossingMap map = flux_sweep_spectrum(bare, 2.417, linear_grid(0.0, 0.3, 4001));
        CHECK(map.branches_ghz.cols() == 6);
        const Splitting s = grid_minimal_splitting(map, bare, 1);
        CHECK(std::abs(s.gap_mhz - 2.0 * 15.2) <= 0.2);
        CHECK(std::abs(s.qubit_ghz - 2.257) < 0.01);
        const std::vector<double> g = extract_couplings(bare);
        for (std::size_t i = 0; i < measured.size(); ++i)
            CHECK(g[i] == doctest::Approx(measured[i].g_mhz).epsilon(1e-6));

        std::vector<MechanicalMode> uncoupled = measured;
        for (MechanicalMode& m : uncoupled)
            m.g_mhz = 0.0;
        CHECK(minimal_splitting(uncoupled, 1).gap_mhz < 1e-6);

        const Eigen::VectorXd far = one_excitation_frequencies(measured, 1.0);
        double bound = 0.0;
        for (const MechanicalMode& m : measured)
            bound = std::max(bound, 1e-3 * m.g_mhz * m.g_mhz / std::abs(1e3 * (1.0 - m.omega_ghz)) * 5.0);
        for (std::size_t i = 0; i < measured.size(); ++i)
            CHECK(std::abs(far(Eigen::Index(i + 1)) - std::vector<double>{2.002, 2.065, 2.153, 2.257, 2.405}[i]) <
                  bound);
        CHECK(std::abs(far(0) - 1.0) < bound);
    }
}
