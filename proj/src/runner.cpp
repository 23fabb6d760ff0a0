#include "phonon/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "phonon/errors.hpp"

#ifndef PHONON_VERSION
#define PHONON_VERSION "0.0.0"
#endif

namespace phonon {

namespace fs = std::filesystem;
using nlohmann::json;

std::string code_version() { return PHONON_VERSION; }

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void Table::add_row(const std::vector<double>& values)
{
    std::vector<std::string> row;
    for (double v : values)
        row.push_back(format_number(v));
    rows.push_back(std::move(row));
}

bool ConvergenceReport::passed() const
{
    return std::all_of(entries.begin(), entries.end(),
                       [&](const ConvergenceEntry& e) { return e.relative_change < tolerance; });
}

void ConvergenceReport::add(const std::string& quantity, double base, double refined)
{
    const double scale = std::max(std::abs(base), std::abs(refined));
    entries.push_back({quantity, base, refined, scale > 0.0 ? std::abs(refined - base) / scale : 0.0});
}

namespace {

std::vector<double> linspace(double lo, double hi, int points) { return linear_grid(lo, hi, points); }

json diagnostics_json(const Diagnostics& d)
{
    return {{"max_trace_drift", d.max_trace_drift},
            {"max_hermiticity_error", d.max_hermiticity_error},
            {"min_final_eigenvalue", std::isfinite(d.min_final_eigenvalue) ? json(d.min_final_eigenvalue) : json()},
            {"steps", d.steps},
            {"dt_us", d.dt_us}};
}

SimulationSettings refined(SimulationSettings s)
{
    s.n_q += 1;
    s.n_m += 5;
    return s;
}

void begin_convergence(ResultBundle& b, const RunConfig& c, bool applicable, const std::string& note = {})
{
    b.convergence.n_q = c.n_q;
    b.convergence.n_m = c.n_m;
    b.convergence.n_q_refined = c.n_q + 1;
    b.convergence.n_m_refined = c.n_m + 5;
    b.convergence.performed = applicable && c.convergence_check;
    b.convergence.note = !applicable ? "not applicable: no truncated Hilbert space"
                                     : (c.convergence_check ? note : "disabled by run.convergence_check");
}

void run_rabi(ResultBundle& b, const RunConfig& c, const SimulationSettings& s)
{
    const std::vector<double> volts = linspace(0.0, c.rabi.voltage_hi_v, c.rabi.points);
    const RabiScan scan = rabi_scan(c.device, volts, c.rabi.options, s);
    const RabiCalibration cal = extract_a1(scan);
    Table t{"rabi_scan", {"Rabi calibration scan: gaussian pulse amplitude vs excited-state population"},
            {"voltage_V", "p_e"}, {}};
    for (std::size_t i = 0; i < volts.size(); ++i)
        t.add_row({volts[i], scan.p_e[i]});
    b.tables.push_back(std::move(t));
    const double v_spec = c.schedule.v_spectroscopy;
    b.summary = {{"a1_extracted_MHz_per_V", cal.a1_mhz_per_v},
                 {"a1_configured_MHz_per_V", c.device.a1_mhz_per_v},
                 {"a1_relative_error", cal.a1_mhz_per_v / c.device.a1_mhz_per_v - 1.0},
                 {"contrast", cal.contrast},
                 {"offset", cal.offset},
                 {"spectroscopy_voltage_V", v_spec},
                 {"spectroscopy_rabi_MHz", rabi_rate_from_voltage(v_spec, CalibrationKey::a1, c.device)},
                 {"spectroscopy_rabi_extracted_MHz", cal.a1_mhz_per_v * v_spec},
                 {"include_mechanics", c.rabi.options.include_mechanics},
                 {"diagnostics", diagnostics_json(scan.diagnostics)}};
    begin_convergence(b, c, true);
    if (b.convergence.performed) {
        const RabiCalibration fine = extract_a1(rabi_scan(c.device, volts, c.rabi.options, refined(s)));
        b.convergence.add("a1_MHz_per_V", cal.a1_mhz_per_v, fine.a1_mhz_per_v);
    }
}

void add_decay_table(ResultBundle& b, const std::string& name, const std::string& comment,
                     const std::string& signal, const DecayMeasurement& m)
{
    Table t{name, {comment}, {"delay_us", signal}, {}};
    for (std::size_t i = 0; i < m.delays_us.size(); ++i)
        t.add_row({m.delays_us[i], m.signal[i]});
    b.tables.push_back(std::move(t));
    b.warnings.insert(b.warnings.end(), m.warnings.begin(), m.warnings.end());
}

void run_t1(ResultBundle& b, const RunConfig& c, const SimulationSettings& s)
{
    const std::vector<double> delays = linspace(0.0, c.t1.delay_max_us, c.t1.points);
    const DecayMeasurement m = t1_experiment(c.device, delays, s);
    add_decay_table(b, "t1_decay", "Free decay after an ideal pi pulse (transmon alone)", "p_e", m);
    b.summary = {{"t1_fit_us", m.time_constant_us},
                 {"t1_configured_us", c.device.t1_us},
                 {"t1_relative_error", m.time_constant_us / c.device.t1_us - 1.0},
                 {"amplitude", m.fit.amplitude},
                 {"diagnostics", diagnostics_json(m.diagnostics)}};
    begin_convergence(b, c, true, "transmon-only layout: only N_q is refined");
    if (b.convergence.performed)
        b.convergence.add("t1_us", m.time_constant_us, t1_experiment(c.device, delays, refined(s)).time_constant_us);
}

void run_ringdown(ResultBundle& b, const RunConfig& c, const SimulationSettings& s)
{
    const std::vector<double> delays = linspace(0.0, c.ringdown_delays.delay_max_us, c.ringdown_delays.points);
    const DecayMeasurement m = ringdown_experiment(c.device, delays, c.ringdown, s);
    add_decay_table(b, "ringdown", "Mechanical occupation after a resonant excitation pulse", "n_phonon", m);
    const double kappa_khz = units::khz_from_angular(1.0 / m.time_constant_us);
    b.summary = {{"decay_time_us", m.time_constant_us},
                 {"decay_time_configured_us", 1.0 / units::angular_from_khz(c.device.kappa_khz)},
                 {"kappa_fit_kHz", kappa_khz},
                 {"kappa_configured_kHz", c.device.kappa_khz},
                 {"kappa_relative_error", kappa_khz / c.device.kappa_khz - 1.0},
                 {"initial_phonons", m.fit.amplitude},
                 {"diagnostics", diagnostics_json(m.diagnostics)}};
    begin_convergence(b, c, true);
    if (b.convergence.performed)
        b.convergence.add("decay_time_us", m.time_constant_us,
                          ringdown_experiment(c.device, delays, c.ringdown, refined(s)).time_constant_us);
}

void run_flux_sweep(ResultBundle& b, const RunConfig& c)
{
    const std::vector<MechanicalMode> modes =
        c.flux_sweep.calibrate_couplings ? calibrate_bare_couplings(c.mechanics) : c.mechanics;
    const std::vector<double> flux = linspace(0.0, 0.5, c.flux_sweep.points);
    const AnticrossingMap map = flux_sweep_spectrum(modes, c.device.omega_ge_max_ghz, flux);

    Table t{"anticrossing_map", {"One-excitation eigenfrequencies vs applied flux (units of the flux quantum)"},
            {"flux_Phi0", "qubit_GHz"}, {}};
    for (Eigen::Index k = 0; k < map.branches_ghz.cols(); ++k)
        t.columns.push_back("branch" + std::to_string(k) + "_GHz");
    for (std::size_t i = 0; i < flux.size(); ++i) {
        std::vector<double> row{map.flux[i], map.qubit_ghz[i]};
        for (Eigen::Index k = 0; k < map.branches_ghz.cols(); ++k)
            row.push_back(map.branches_ghz(Eigen::Index(i), k));
        t.add_row(row);
    }
    b.tables.push_back(std::move(t));

    Table sp{"splittings", {"Minimal splitting at each mode crossing"},
             {"mode_GHz", "g_configured_MHz", "g_bare_MHz", "gap_continuous_MHz", "gap_grid_MHz", "qubit_at_gap_GHz"},
             {}};
    json modes_json = json::array();
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const Splitting cont = minimal_splitting(modes, i);
        const Splitting grid = grid_minimal_splitting(map, modes, i);
        sp.add_row({modes[i].omega_ghz, c.mechanics[i].g_mhz, modes[i].g_mhz, cont.gap_mhz, grid.gap_mhz,
                    cont.qubit_ghz});
        modes_json.push_back({{"mode_GHz", modes[i].omega_ghz},
                              {"gap_continuous_MHz", cont.gap_mhz},
                              {"gap_grid_MHz", grid.gap_mhz}});
    }
    b.tables.push_back(std::move(sp));
    b.summary = {{"couplings_calibrated", c.flux_sweep.calibrate_couplings},
                 {"flux_points", c.flux_sweep.points},
                 {"modes", modes_json}};
    begin_convergence(b, c, false);
}

void run_number_splitting(ResultBundle& b, const RunConfig& c, const SimulationSettings& s)
{
    const NumberSplittingConfig& ns = c.number_splitting;
    const std::vector<double> grid = linspace(ns.detuning_lo_mhz, ns.detuning_hi_mhz, ns.detuning_points);
    const NumberSplittingResult r = number_splitting_sweep(c.device, ns.voltages, grid, c.schedule, s);
    b.warnings.insert(b.warnings.end(), r.warnings.begin(), r.warnings.end());

    const double chi_mhz = chi(c.device.g_mhz, c.device.delta_mhz(), c.device.alpha_mhz);
    Table nbar{"nbar_summary",
               {"Mean phonon number midway through the spectroscopy pulse, per phonon-pulse voltage"},
               {"voltage_V", "nbar", "phonons_after_pulse", "qubit_residual"},
               {}};
    json per_voltage = json::array();
    for (const VoltageSpectrum& vs : r.spectra) {
        char name[64];
        std::snprintf(name, sizeof name, "spectrum_V%.4f", vs.voltage);
        Table t{name, {"Qubit spectroscopy after the phonon pulse; p_e time-averaged over the readout window"},
                {"delta_MHz", "p_e"}, {}};
        for (const auto& [k, v] : vs.spectrum.metadata)
            t.comments.push_back(k + " = " + format_number(v));
        for (std::size_t j = 0; j < grid.size(); ++j)
            t.add_row({grid[j], vs.spectrum.response[j]});
        b.tables.push_back(std::move(t));
        nbar.add_row({vs.voltage, vs.nbar, vs.phonons_after_pulse, vs.qubit_residual});

        json entry = {{"voltage_V", vs.voltage}, {"nbar", vs.nbar}, {"spectrum_table", name}};
        const int n_peaks = std::clamp(int(std::ceil(vs.nbar + 2.0 * std::sqrt(vs.nbar))) + 1, 1, 4);
        try {
            const PeakFit fit = n_peaks >= 2 && count_resolved_peaks(vs.spectrum) >= 2
                                    ? ladder_peak_fit(vs.spectrum, n_peaks, chi_mhz)
                                    : peak_fit(vs.spectrum, 1);
            json peaks = json::array();
            for (const Lorentzian& p : fit.peaks)
                peaks.push_back({{"center_MHz", p.center}, {"fwhm_MHz", p.fwhm}, {"height", p.height}});
            entry["peaks"] = peaks;
            entry["spacings_MHz"] = fit.spacings();
            entry["resolved_peaks"] = resolved_peak_count(fit);
            entry["fit_offset"] = fit.offset;
        } catch (const FitError& e) {
            b.warnings.push_back("peak fit at V = " + format_number(vs.voltage) + " failed: " + e.what());
        }
        per_voltage.push_back(entry);
    }
    b.tables.push_back(std::move(nbar));
    b.summary = {{"chi_formula_MHz", chi_mhz},
                 {"two_chi_formula_MHz", 2.0 * chi_mhz},
                 {"chi_tabulated_MHz", c.device.chi_tabulated_mhz},
                 {"dressed_qubit_GHz", dressed_qubit_ghz(c.device)},
                 {"peak_model", "lorentzian"},
                 {"phonon_correction", c.schedule.phonon_correction},
                 {"spectra", per_voltage},
                 {"diagnostics", diagnostics_json(r.diagnostics)}};

    begin_convergence(b, c, true, "mean phonon number and on-resonance p_e per voltage");
    if (b.convergence.performed) {
        const SimulationSettings fine = refined(s);
        std::vector<double> out(4 * ns.voltages.size());
        s.fan_out(2 * ns.voltages.size(), [&](std::size_t k) {
            const std::size_t i = k / 2;
            const SimulationSettings& st = k % 2 ? fine : s;
            const PumpProbeSchedule sch = pump_probe_schedule(c.device, ns.voltages[i], 0.0, c.schedule);
            const PhononPreparation prep = prepare_phonons(c.device, sch, st);
            const SpectroscopyPoint pt = spectroscopy_point(c.device, sch, prep.state, st);
            out[4 * i + 2 * (k % 2)] = pt.nbar;
            out[4 * i + 2 * (k % 2) + 1] = pt.p_e;
        });
        for (std::size_t i = 0; i < ns.voltages.size(); ++i) {
            const std::string tag = "V=" + format_number(ns.voltages[i]);
            if (ns.voltages[i] > 0.0)
                b.convergence.add("nbar@" + tag, out[4 * i], out[4 * i + 2]);
            b.convergence.add("p_e(delta=0)@" + tag, out[4 * i + 1], out[4 * i + 3]);
        }
    }
}

void run_optimize_chi(ResultBundle& b, const RunConfig& c, const FanOut& fan_out)
{
    const DesignResult r = optimize_chi(c.design.constraints, c.design.grid, fan_out);
    const StraddlingReport st = straddling_feasibility(c.design.constraints);
    Table t{"optimum", {"Constrained maximum of |chi| (dispersive margins and transmon limit)"},
            {"alpha_opt_MHz", "delta_opt_MHz", "g_opt_MHz", "chi_opt_MHz", "mirror_delta_MHz", "ej_ec"}, {}};
    t.add_row({r.alpha_opt, r.delta_opt, r.g_opt, r.chi_opt, r.mirror_delta,
               ej_ec_ratio(c.design.constraints.omega_ge_ghz, r.alpha_opt)});
    b.tables.push_back(std::move(t));

    std::vector<double> alphas;
    for (double a = c.design.grid.alpha_lo; a <= c.design.grid.alpha_hi + 1e-9; a += c.design.grid.alpha_step)
        alphas.push_back(a);
    const AlphaProfile p = max_chi_vs_alpha(c.design.constraints, alphas);
    Table prof{"chi_vs_alpha", {"max over dispersive-feasible detunings of |chi|; transmon limit reported separately"},
               {"alpha_MHz", "max_chi_abs_MHz", "straddling_open", "transmon_ok"}, {}};
    for (std::size_t i = 0; i < alphas.size(); ++i)
        prof.add_row({alphas[i], p.max_chi[i], double(p.straddling_open[i]), double(p.transmon_ok[i])});
    b.tables.push_back(std::move(prof));

    b.summary = {{"alpha_opt_MHz", r.alpha_opt},
                 {"delta_opt_MHz", r.delta_opt},
                 {"delta_opt_over_g", r.delta_opt / r.g_opt},
                 {"g_opt_MHz", r.g_opt},
                 {"chi_opt_MHz", r.chi_opt},
                 {"branch", to_string(r.branch)},
                 {"mirror_delta_MHz", r.mirror_delta},
                 {"mirror_chi_MHz", r.mirror_chi},
                 {"slacks",
                  {{"detuning_MHz", r.slacks.detuning},
                   {"anharmonic_MHz", r.slacks.anharmonic},
                   {"transmon_ratio", r.slacks.transmon}}},
                 {"grid_optimum", {{"alpha_MHz", r.grid_alpha}, {"delta_MHz", r.grid_delta}, {"chi_abs_MHz", r.grid_chi_abs}}},
                 {"straddling",
                  {{"alpha_threshold_MHz", st.alpha_threshold},
                   {"alpha_transmon_max_MHz", st.alpha_transmon_max},
                   {"feasible", st.feasible}}}};
    begin_convergence(b, c, false);
}

void run_feasibility_map(ResultBundle& b, const RunConfig& c, const FanOut& fan_out)
{
    const FeasibilityMap m = feasibility_map(c.design.constraints, c.design.map_grid, c.design.map_cap_mhz, fan_out);
    Table t{"feasibility_map",
            {"|chi| capped at " + format_number(m.cap_mhz) + " MHz; pole cells are nan and infeasible"},
            {"alpha_MHz", "delta_MHz", "chi_abs_MHz", "feasible"}, {}};
    for (std::size_t i = 0; i < m.alphas.size(); ++i)
        for (std::size_t j = 0; j < m.deltas.size(); ++j)
            t.add_row({m.alphas[i], m.deltas[j], m.chi_abs[i][j], double(m.feasible[i][j])});
    b.tables.push_back(std::move(t));
    b.summary = {{"best_feasible_chi_abs_MHz", m.best_feasible_chi},
                 {"best_alpha_MHz", m.best_alpha},
                 {"best_delta_MHz", m.best_delta},
                 {"cap_MHz", m.cap_mhz},
                 {"cells", m.alphas.size() * m.deltas.size()}};
    begin_convergence(b, c, false);
}

void run_driftfix(ResultBundle& b, const RunConfig& c)
{
    std::vector<TrackingRecord> records;
    std::vector<double> injected;
    if (c.driftfix.records_path.empty()) {
        SyntheticDrift spec = c.driftfix.synthetic;
        spec.seed = c.seed;
        SyntheticRecords syn = synthetic_records(spec);
        records = std::move(syn.records);
        injected = std::move(syn.drift_mhz);
        b.tables.push_back(record_set_table(records));
    } else {
        records = read_record_set(c.driftfix.records_path);
    }
    const AlignedAverage a = align_and_average(records, c.driftfix.detection);
    b.warnings.insert(b.warnings.end(), a.warnings.begin(), a.warnings.end());
    const ChiDispersionReport d = residual_chi_dispersion(a.offsets, c.device, c.driftfix.clarity_factor);

    Table off{"offsets", {"Detected tracking-line centers; offset = center - reference"},
              {"record_id", "center_MHz", "offset_MHz", "delta_chi_over_chi", "method_lorentzian"}, {}};
    for (std::size_t i = 0; i < a.offsets.size(); ++i)
        off.add_row({double(a.record_ids[i]), a.centers[i], a.offsets[i], d.relative[i],
                     double(a.methods[i] == CenterMethod::lorentzian)});
    b.tables.push_back(std::move(off));
    Table tr{"tracking_average", {"Averaged tracking line before and after alignment"},
             {"frequency_MHz", "naive_response", "aligned_response"}, {}};
    for (std::size_t i = 0; i < a.tracking_grid.size(); ++i)
        tr.add_row({a.tracking_grid[i], a.naive_tracking[i], a.aligned_tracking[i]});
    b.tables.push_back(std::move(tr));
    Table da{"data_average", {"Averaged data spectra before and after alignment"},
             {"frequency_MHz", "naive_response", "aligned_response"}, {}};
    for (std::size_t i = 0; i < a.data_grid.size(); ++i)
        da.add_row({a.data_grid[i], a.naive_data[i], a.aligned_data[i]});
    b.tables.push_back(std::move(da));

    b.summary = {{"records", records.size()},
                 {"records_kept", a.record_ids.size()},
                 {"source", c.driftfix.records_path.empty() ? "synthetic" : c.driftfix.records_path},
                 {"peak_detection", "single lorentzian least squares, top-20% centroid fallback"},
                 {"reference_frequency_MHz", a.reference_frequency},
                 {"width_before_MHz", a.width_before},
                 {"width_after_MHz", a.width_after},
                 {"chi_MHz", d.chi_mhz},
                 {"max_abs_delta_chi_MHz", d.max_abs_dchi_mhz},
                 {"gamma_MHz", d.gamma_mhz},
                 {"kappa_MHz", d.kappa_mhz},
                 {"clarity_factor", d.clarity_factor},
                 {"clarity_ok", d.clarity_ok}};
    if (!injected.empty()) {
        double se = 0.0;
        for (std::size_t i = 0; i < a.offsets.size(); ++i) {
            const double mean_drift = [&] {
                double m = 0.0;
                for (int id : a.record_ids)
                    m += injected[std::size_t(id)];
                return m / double(a.record_ids.size());
            }();
            const double e = a.offsets[i] - (injected[std::size_t(a.record_ids[i])] - mean_drift);
            se += e * e;
        }
        b.summary["offset_rms_error_MHz"] = std::sqrt(se / double(a.offsets.size()));
        b.summary["seed"] = c.seed;
    }
    begin_convergence(b, c, false);
}

} // namespace

const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> names = {"rabi",           "t1",           "ringdown",        "flux-sweep",
                                                   "number-splitting", "optimize-chi", "feasibility-map", "driftfix"};
    return names;
}

ResultBundle run(const std::string& subcommand, const RunConfig& config, const FanOut& fan_out)
{
    config.validate();
    ResultBundle b;
    b.subcommand = subcommand;
    b.version = code_version();
    b.config_hash = config_hash(config);
    const auto start = std::chrono::steady_clock::now();
    const SimulationSettings s = config.simulation(fan_out);
    if (subcommand == "rabi")
        run_rabi(b, config, s);
    else if (subcommand == "t1")
        run_t1(b, config, s);
    else if (subcommand == "ringdown")
        run_ringdown(b, config, s);
    else if (subcommand == "flux-sweep")
        run_flux_sweep(b, config);
    else if (subcommand == "number-splitting")
        run_number_splitting(b, config, s);
    else if (subcommand == "optimize-chi")
        run_optimize_chi(b, config, fan_out);
    else if (subcommand == "feasibility-map")
        run_feasibility_map(b, config, fan_out);
    else if (subcommand == "driftfix")
        run_driftfix(b, config);
    else
        throw ConfigError("unknown subcommand '" + subcommand + "'");
    if (b.convergence.performed && !b.convergence.passed())
        b.warnings.push_back("truncation convergence check exceeded the relative tolerance " +
                             format_number(b.convergence.tolerance));
    b.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return b;
}

void write_table(const Table& table, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path + "'");
    for (const std::string& c : table.comments)
        out << "# " << c << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const std::vector<std::string>& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << '\n';
    }
    if (!out)
        throw IoError("write failed for '" + path + "'");
}

void write_bundle(const ResultBundle& b, const RunConfig& config, const std::string& dir)
{
    const fs::path root = fs::path(dir) / b.subcommand;
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec)
        throw IoError("cannot create output directory '" + root.string() + "': " + ec.message());
    json tables = json::array();
    for (const Table& t : b.tables) {
        write_table(t, (root / (t.name + ".csv")).string());
        tables.push_back(t.name + ".csv");
    }
    json conv = {{"performed", b.convergence.performed},
                 {"note", b.convergence.note},
                 {"n_q", b.convergence.n_q},
                 {"n_m", b.convergence.n_m},
                 {"n_q_refined", b.convergence.n_q_refined},
                 {"n_m_refined", b.convergence.n_m_refined},
                 {"tolerance", b.convergence.tolerance},
                 {"passed", b.convergence.passed()},
                 {"entries", json::array()}};
    for (const ConvergenceEntry& e : b.convergence.entries)
        conv["entries"].push_back({{"quantity", e.quantity},
                                   {"base", e.base},
                                   {"refined", e.refined},
                                   {"relative_change", e.relative_change}});
    const json meta = {{"subcommand", b.subcommand},
                       {"version", b.version},
                       {"config_hash", b.config_hash},
                       {"wall_time_s", b.wall_time_s},
                       {"seed", config.seed},
                       {"profile", config.profile},
                       {"config", json::parse(config_json(config))},
                       {"summary", b.summary},
                       {"convergence", conv},
                       {"warnings", b.warnings},
                       {"tables", tables}};
    std::ofstream out(root / "metadata.json", std::ios::binary);
    if (!out)
        throw IoError("cannot write metadata in '" + root.string() + "'");
    out << meta.dump(2) << '\n';
    if (!out)
        throw IoError("metadata write failed in '" + root.string() + "'");
}

std::vector<TrackingRecord> read_record_set(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read record set '" + path + "'");
    std::map<int, TrackingRecord> by_id;
    std::string line;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');)
            cells.push_back(cell);
        if (!header) {
            if (cells != std::vector<std::string>{"record_id", "kind", "frequency_MHz", "response"})
                throw ConfigError(path + ":" + std::to_string(lineno) +
                                  ": expected header record_id,kind,frequency_MHz,response");
            header = true;
            continue;
        }
        if (cells.size() != 4)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 4 columns");
        int id = 0;
        double f = 0.0, r = 0.0;
        try {
            std::size_t pos = 0;
            id = std::stoi(cells[0], &pos);
            if (pos != cells[0].size())
                throw std::invalid_argument("id");
            f = std::stod(cells[2]);
            r = std::stod(cells[3]);
        } catch (const std::exception&) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed number");
        }
        TrackingRecord& rec = by_id[id];
        rec.id = id;
        SpectrumFrame* frame = nullptr;
        if (cells[1] == "tracking")
            frame = &rec.tracking;
        else if (cells[1] == "data")
            frame = &rec.data;
        else
            throw ConfigError(path + ":" + std::to_string(lineno) + ": kind must be 'tracking' or 'data'");
        frame->detunings_mhz.push_back(f);
        frame->response.push_back(r);
    }
    if (!header)
        throw ConfigError(path + ": missing header row");
    std::vector<TrackingRecord> out;
    for (auto& [id, rec] : by_id) {
        if (rec.tracking.response.empty() || rec.data.response.empty())
            throw ConfigError(path + ": record " + std::to_string(id) + " needs both tracking and data rows");
        for (SpectrumFrame* fr : {&rec.tracking, &rec.data}) {
            std::vector<std::size_t> idx(fr->detunings_mhz.size());
            for (std::size_t i = 0; i < idx.size(); ++i)
                idx[i] = i;
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t b) { return fr->detunings_mhz[a] < fr->detunings_mhz[b]; });
            SpectrumFrame sorted;
            for (std::size_t i : idx) {
                sorted.detunings_mhz.push_back(fr->detunings_mhz[i]);
                sorted.response.push_back(fr->response[i]);
            }
            try {
                sorted.validate();
            } catch (const NumericError& e) {
                throw ConfigError(path + ": record " + std::to_string(id) + ": " + e.what());
            }
            *fr = std::move(sorted);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

Table record_set_table(const std::vector<TrackingRecord>& records)
{
    Table t{"records", {"Interleaved tracking and data spectra; frequencies relative to the nominal qubit line"},
            {"record_id", "kind", "frequency_MHz", "response"}, {}};
    for (const TrackingRecord& r : records) {
        for (std::size_t i = 0; i < r.tracking.response.size(); ++i)
            t.rows.push_back({std::to_string(r.id), "tracking", format_number(r.tracking.detunings_mhz[i]),
                              format_number(r.tracking.response[i])});
        for (std::size_t i = 0; i < r.data.response.size(); ++i)
            t.rows.push_back({std::to_string(r.id), "data", format_number(r.data.detunings_mhz[i]),
                              format_number(r.data.response[i])});
    }
    return t;
}

void write_record_set(const std::vector<TrackingRecord>& records, const std::string& path)
{
    write_table(record_set_table(records), path);
}

} // namespace phonon
