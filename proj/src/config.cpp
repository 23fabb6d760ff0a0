#include "phonon/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <toml.hpp>

#include "phonon/errors.hpp"

namespace phonon {

namespace {

std::string type_name(const toml::node& n)
{
    std::ostringstream os;
    os << n.type();
    return os.str();
}

// One TOML table; every key read is recorded so leftovers can be reported.
class Section {
public:
    Section(const toml::table& table, std::string path) : table_(&table), path_(std::move(path)) {}

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const toml::node* find(const std::string& key)
    {
        const toml::node* n = table_->get(key);
        if (n)
            used_.insert(key);
        return n;
    }

    void read(const std::string& key, double& out)
    {
        if (const toml::node* n = find(key)) {
            if (!n->is_number())
                throw ConfigError(key_path(key) + ": expected a number, got " + type_name(*n));
            out = *n->value<double>();
        }
    }

    void read(const std::string& key, int& out)
    {
        if (const toml::node* n = find(key)) {
            const auto v = n->value_exact<std::int64_t>();
            if (!v || *v < INT32_MIN || *v > INT32_MAX)
                throw ConfigError(key_path(key) + ": expected an integer, got " + type_name(*n));
            out = int(*v);
        }
    }

    void read(const std::string& key, std::uint64_t& out)
    {
        if (const toml::node* n = find(key)) {
            const auto v = n->value_exact<std::int64_t>();
            if (!v || *v < 0)
                throw ConfigError(key_path(key) + ": expected a non-negative integer");
            out = std::uint64_t(*v);
        }
    }

    void read(const std::string& key, bool& out)
    {
        if (const toml::node* n = find(key)) {
            const auto v = n->value_exact<bool>();
            if (!v)
                throw ConfigError(key_path(key) + ": expected a boolean, got " + type_name(*n));
            out = *v;
        }
    }

    void read(const std::string& key, std::string& out)
    {
        if (const toml::node* n = find(key)) {
            const auto v = n->value_exact<std::string>();
            if (!v)
                throw ConfigError(key_path(key) + ": expected a string, got " + type_name(*n));
            out = *v;
        }
    }

    void read(const std::string& key, std::vector<double>& out)
    {
        if (const toml::node* n = find(key)) {
            const toml::array* arr = n->as_array();
            if (!arr)
                throw ConfigError(key_path(key) + ": expected an array of numbers");
            std::vector<double> v;
            for (const toml::node& e : *arr) {
                if (!e.is_number())
                    throw ConfigError(key_path(key) + ": expected an array of numbers");
                v.push_back(*e.value<double>());
            }
            out = std::move(v);
        }
    }

    std::optional<Section> table(const std::string& key)
    {
        const toml::node* n = find(key);
        if (!n)
            return std::nullopt;
        const toml::table* t = n->as_table();
        if (!t)
            throw ConfigError(key_path(key) + ": expected a table, got " + type_name(*n));
        return Section(*t, key_path(key));
    }

    void finish() const
    {
        for (const auto& [k, v] : *table_)
            if (!used_.count(std::string(k.str())))
                throw ConfigError("unknown key '" + key_path(std::string(k.str())) + "'");
    }

private:
    const toml::table* table_;
    std::string path_;
    std::set<std::string> used_;
};

template <typename Fn>
void with_table(Section& parent, const std::string& key, Fn&& fn)
{
    if (std::optional<Section> s = parent.table(key)) {
        fn(*s);
        s->finish();
    }
}

IntegratorMethod parse_method(const std::string& s)
{
    if (s == "rk4")
        return IntegratorMethod::rk4;
    if (s == "rk45")
        return IntegratorMethod::rk45;
    throw ConfigError("integrator.method: expected 'rk4' or 'rk45', got '" + s + "'");
}

std::string method_name(IntegratorMethod m) { return m == IntegratorMethod::rk4 ? "rk4" : "rk45"; }

PhononCarrier parse_carrier(const std::string& s)
{
    if (s == "mechanics")
        return PhononCarrier::mechanics;
    if (s == "phonon_like_polariton")
        return PhononCarrier::phonon_like_polariton;
    throw ConfigError("schedule.phonon_carrier: expected 'mechanics' or 'phonon_like_polariton', got '" + s + "'");
}

std::string carrier_name(PhononCarrier c)
{
    return c == PhononCarrier::mechanics ? "mechanics" : "phonon_like_polariton";
}

DriftKind parse_drift(const std::string& s)
{
    if (s == "gaussian")
        return DriftKind::gaussian;
    if (s == "sinusoidal")
        return DriftKind::sinusoidal;
    throw ConfigError("driftfix.synthetic.kind: expected 'gaussian' or 'sinusoidal', got '" + s + "'");
}

void read_grid(Section& s, SearchGrid& g, const std::string& prefix)
{
    s.read(prefix + "alpha_lo_mhz", g.alpha_lo);
    s.read(prefix + "alpha_hi_mhz", g.alpha_hi);
    s.read(prefix + "alpha_step_mhz", g.alpha_step);
    s.read(prefix + "delta_lo_mhz", g.delta_lo);
    s.read(prefix + "delta_hi_mhz", g.delta_hi);
    s.read(prefix + "delta_step_mhz", g.delta_step);
}

void apply(RunConfig& c, const toml::table& root)
{
    Section top(root, "");
    with_table(top, "run", [&](Section& s) {
        std::string profile = c.profile;
        s.read("profile", profile);
        if (profile != c.profile)
            throw ConfigError("run.profile: unknown profile '" + profile + "' (available: tableS1)");
        s.read("seed", c.seed);
        s.read("output_dir", c.output_dir);
        s.read("convergence_check", c.convergence_check);
    });
    with_table(top, "device", [&](Section& s) {
        DeviceParams& d = c.device;
        s.read("omega_ge_max_ghz", d.omega_ge_max_ghz);
        s.read("omega_ge_ghz", d.omega_ge_ghz);
        s.read("alpha_mhz", d.alpha_mhz);
        s.read("omega_m_ghz", d.omega_m_ghz);
        s.read("g_mhz", d.g_mhz);
        s.read("t1_us", d.t1_us);
        s.read("gamma_total_khz", d.gamma_total_khz);
        s.read("kappa_khz", d.kappa_khz);
        s.read("a1_mhz_per_v", d.a1_mhz_per_v);
        s.read("a3_mhz_per_v", d.a3_mhz_per_v);
        s.read("chi_tabulated_mhz", d.chi_tabulated_mhz);
    });
    if (const toml::node* n = top.find("mechanics")) {
        const toml::array* arr = n->as_array();
        if (!arr || !arr->is_array_of_tables())
            throw ConfigError("mechanics: expected an array of tables ([[mechanics]])");
        std::vector<MechanicalMode> modes;
        std::size_t i = 0;
        for (const toml::node& e : *arr) {
            Section s(*e.as_table(), "mechanics[" + std::to_string(i++) + "]");
            MechanicalMode m;
            s.read("omega_ghz", m.omega_ghz);
            s.read("g_mhz", m.g_mhz);
            s.finish();
            modes.push_back(m);
        }
        c.mechanics = std::move(modes);
    }
    with_table(top, "truncation", [&](Section& s) {
        s.read("n_q", c.n_q);
        s.read("n_m", c.n_m);
    });
    with_table(top, "integrator", [&](Section& s) {
        std::string method = method_name(c.integrator.method);
        s.read("method", method);
        c.integrator.method = parse_method(method);
        s.read("dt_us", c.integrator.dt);
        s.read("tolerance", c.integrator.tolerance);
        s.read("abs_tolerance", c.integrator.abs_tolerance);
        s.read("max_step_us", c.integrator.max_step);
        s.read("min_step_us", c.integrator.min_step);
        s.read("stability_limit", c.integrator.stability_limit);
    });
    with_table(top, "schedule", [&](Section& s) {
        ScheduleOptions& o = c.schedule;
        s.read("tau_mech_ns", o.tau_mech_ns);
        s.read("tau_ns", o.tau_ns);
        s.read("v_spectroscopy_v", o.v_spectroscopy);
        s.read("readout_ns", o.readout_ns);
        s.read("phonon_correction", o.phonon_correction);
        std::string carrier = carrier_name(o.phonon_carrier);
        s.read("phonon_carrier", carrier);
        o.phonon_carrier = parse_carrier(carrier);
    });
    with_table(top, "number_splitting", [&](Section& s) {
        s.read("voltages_v", c.number_splitting.voltages);
        s.read("detuning_lo_mhz", c.number_splitting.detuning_lo_mhz);
        s.read("detuning_hi_mhz", c.number_splitting.detuning_hi_mhz);
        s.read("detuning_points", c.number_splitting.detuning_points);
    });
    with_table(top, "rabi", [&](Section& s) {
        s.read("voltage_hi_v", c.rabi.voltage_hi_v);
        s.read("points", c.rabi.points);
        s.read("sigma_ns", c.rabi.options.sigma_ns);
        s.read("duration_sigmas", c.rabi.options.duration_sigmas);
        s.read("include_mechanics", c.rabi.options.include_mechanics);
    });
    with_table(top, "t1", [&](Section& s) {
        s.read("delay_max_us", c.t1.delay_max_us);
        s.read("points", c.t1.points);
    });
    with_table(top, "ringdown", [&](Section& s) {
        s.read("delay_max_us", c.ringdown_delays.delay_max_us);
        s.read("points", c.ringdown_delays.points);
        s.read("omega_ge_ghz", c.ringdown.omega_ge_ghz);
        s.read("v_drive_v", c.ringdown.v_drive);
        s.read("tau_ns", c.ringdown.tau_ns);
    });
    with_table(top, "flux_sweep", [&](Section& s) {
        s.read("points", c.flux_sweep.points);
        s.read("calibrate_couplings", c.flux_sweep.calibrate_couplings);
    });
    with_table(top, "design", [&](Section& s) {
        DesignConstraints& k = c.design.constraints;
        s.read("dispersive_margin", k.dispersive_margin);
        s.read("ej_ec_min", k.ej_ec_min);
        s.read("omega_ge_ghz", k.omega_ge_ghz);
        s.read("xi", k.xi);
        read_grid(s, c.design.grid, "");
        s.read("tolerance_mhz", c.design.grid.tolerance);
        read_grid(s, c.design.map_grid, "map_");
        s.read("map_cap_mhz", c.design.map_cap_mhz);
    });
    with_table(top, "driftfix", [&](Section& s) {
        s.read("records_path", c.driftfix.records_path);
        s.read("snr_floor", c.driftfix.detection.snr_floor);
        s.read("clarity_factor", c.driftfix.clarity_factor);
        with_table(s, "synthetic", [&](Section& t) {
            SyntheticDrift& d = c.driftfix.synthetic;
            std::string kind = d.kind == DriftKind::gaussian ? "gaussian" : "sinusoidal";
            t.read("kind", kind);
            d.kind = parse_drift(kind);
            t.read("excursion_mhz", d.excursion_mhz);
            t.read("correlation_records", d.correlation_records);
            t.read("period_records", d.period_records);
            t.read("records", d.records);
            t.read("linewidth_mhz", d.linewidth_mhz);
            t.read("tracking_half_span_mhz", d.tracking_half_span_mhz);
            t.read("data_lo_mhz", d.data_lo_mhz);
            t.read("data_hi_mhz", d.data_hi_mhz);
            t.read("step_mhz", d.step_mhz);
            t.read("noise", d.noise);
        });
    });
    top.finish();
}

} // namespace

void RunConfig::validate() const
{
    if (profile != "tableS1")
        throw ConfigError("unknown profile '" + profile + "' (available: tableS1)");
    device.validate();
    if (mechanics.empty())
        throw ConfigError("mechanics: at least one mode is required");
    for (std::size_t i = 0; i < mechanics.size(); ++i) {
        if (!(mechanics[i].omega_ghz > 0.0))
            throw ConfigError("mechanics[" + std::to_string(i) + "].omega_ghz must be positive");
        if (!(mechanics[i].g_mhz >= 0.0))
            throw ConfigError("mechanics[" + std::to_string(i) + "].g_mhz must be non-negative");
    }
    if (n_q < 3)
        throw ConfigError("truncation.n_q must be at least 3 (the second excited level sets chi)");
    if (n_m < 2)
        throw ConfigError("truncation.n_m must be at least 2");
    if (integrator.dt < 0.0)
        throw ConfigError("integrator.dt_us must be non-negative (0 selects the automatic step)");
    {
        IntegratorConfig probe = integrator;
        if (!(probe.dt > 0.0))
            probe.dt = 1e-4;
        probe.validate();
    }
    schedule.validate();
    const NumberSplittingConfig& ns = number_splitting;
    if (ns.voltages.empty())
        throw ConfigError("number_splitting.voltages_v must not be empty");
    for (double v : ns.voltages)
        if (!(v >= 0.0))
            throw ConfigError("number_splitting.voltages_v must be non-negative");
    if (!(ns.detuning_hi_mhz > ns.detuning_lo_mhz) || ns.detuning_points < 2)
        throw ConfigError("number_splitting: need detuning_lo_mhz < detuning_hi_mhz and detuning_points >= 2");
    if (!(rabi.voltage_hi_v > 0.0) || rabi.points < 5)
        throw ConfigError("rabi: need voltage_hi_v > 0 and points >= 5");
    if (!(rabi.options.sigma_ns > 0.0) || !(rabi.options.duration_sigmas > 0.0))
        throw ConfigError("rabi: sigma_ns and duration_sigmas must be positive");
    if (!(t1.delay_max_us > 0.0) || t1.points < 3)
        throw ConfigError("t1: need delay_max_us > 0 and points >= 3");
    if (!(ringdown_delays.delay_max_us > 0.0) || ringdown_delays.points < 3)
        throw ConfigError("ringdown: need delay_max_us > 0 and points >= 3");
    if (!(ringdown.omega_ge_ghz > 0.0) || !(ringdown.v_drive >= 0.0) || !(ringdown.tau_ns > 0.0))
        throw ConfigError("ringdown: omega_ge_ghz and tau_ns must be positive, v_drive_v non-negative");
    if (flux_sweep.points < 2)
        throw ConfigError("flux_sweep.points must be at least 2");
    design.constraints.validate();
    design.grid.validate();
    design.map_grid.validate();
    if (!(design.map_cap_mhz > 0.0))
        throw ConfigError("design.map_cap_mhz must be positive");
    if (!(driftfix.detection.snr_floor >= 0.0))
        throw ConfigError("driftfix.snr_floor must be non-negative");
    if (!(driftfix.clarity_factor > 0.0))
        throw ConfigError("driftfix.clarity_factor must be positive");
    driftfix.synthetic.validate();
    if (output_dir.empty())
        throw ConfigError("run.output_dir must not be empty");
}

SimulationSettings RunConfig::simulation(const FanOut& fan_out) const
{
    SimulationSettings s;
    s.n_q = n_q;
    s.n_m = n_m;
    s.integrator = integrator;
    s.fan_out = fan_out;
    return s;
}

RunConfig profile_config(const std::string& name)
{
    if (name != "tableS1")
        throw ConfigError("unknown profile '" + name + "' (available: tableS1)");
    return RunConfig{};
}

RunConfig parse_config(const std::string& toml_text, const std::string& profile, const std::string& source)
{
    RunConfig c = profile_config(profile);
    toml::table root;
    try {
        root = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": "
           << e.description();
        throw ConfigError(os.str());
    }
    apply(c, root);
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path, const std::string& profile)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), profile, path);
}

std::string config_json(const RunConfig& c)
{
    using nlohmann::json;
    json mech = json::array();
    for (const MechanicalMode& m : c.mechanics)
        mech.push_back({{"omega_ghz", m.omega_ghz}, {"g_mhz", m.g_mhz}});
    const DeviceParams& d = c.device;
    const auto grid = [](const SearchGrid& g) {
        return json{{"alpha_lo_mhz", g.alpha_lo},   {"alpha_hi_mhz", g.alpha_hi}, {"alpha_step_mhz", g.alpha_step},
                    {"delta_lo_mhz", g.delta_lo},   {"delta_hi_mhz", g.delta_hi}, {"delta_step_mhz", g.delta_step},
                    {"tolerance_mhz", g.tolerance}};
    };
    const SyntheticDrift& sd = c.driftfix.synthetic;
    json j = {
        {"profile", c.profile},
        {"seed", c.seed},
        {"convergence_check", c.convergence_check},
        {"device",
         {{"omega_ge_max_ghz", d.omega_ge_max_ghz},
          {"omega_ge_ghz", d.omega_ge_ghz},
          {"alpha_mhz", d.alpha_mhz},
          {"omega_m_ghz", d.omega_m_ghz},
          {"g_mhz", d.g_mhz},
          {"t1_us", d.t1_us},
          {"gamma_total_khz", d.gamma_total_khz},
          {"kappa_khz", d.kappa_khz},
          {"a1_mhz_per_v", d.a1_mhz_per_v},
          {"a3_mhz_per_v", d.a3_mhz_per_v},
          {"chi_tabulated_mhz", d.chi_tabulated_mhz}}},
        {"mechanics", mech},
        {"truncation", {{"n_q", c.n_q}, {"n_m", c.n_m}}},
        {"integrator",
         {{"method", method_name(c.integrator.method)},
          {"dt_us", c.integrator.dt},
          {"tolerance", c.integrator.tolerance},
          {"abs_tolerance", c.integrator.abs_tolerance},
          {"max_step_us", c.integrator.max_step},
          {"min_step_us", c.integrator.min_step},
          {"stability_limit", c.integrator.stability_limit}}},
        {"schedule",
         {{"tau_mech_ns", c.schedule.tau_mech_ns},
          {"tau_ns", c.schedule.tau_ns},
          {"v_spectroscopy_v", c.schedule.v_spectroscopy},
          {"readout_ns", c.schedule.readout_ns},
          {"phonon_correction", c.schedule.phonon_correction},
          {"phonon_carrier", carrier_name(c.schedule.phonon_carrier)}}},
        {"number_splitting",
         {{"voltages_v", c.number_splitting.voltages},
          {"detuning_lo_mhz", c.number_splitting.detuning_lo_mhz},
          {"detuning_hi_mhz", c.number_splitting.detuning_hi_mhz},
          {"detuning_points", c.number_splitting.detuning_points}}},
        {"rabi",
         {{"voltage_hi_v", c.rabi.voltage_hi_v},
          {"points", c.rabi.points},
          {"sigma_ns", c.rabi.options.sigma_ns},
          {"duration_sigmas", c.rabi.options.duration_sigmas},
          {"include_mechanics", c.rabi.options.include_mechanics}}},
        {"t1", {{"delay_max_us", c.t1.delay_max_us}, {"points", c.t1.points}}},
        {"ringdown",
         {{"delay_max_us", c.ringdown_delays.delay_max_us},
          {"points", c.ringdown_delays.points},
          {"omega_ge_ghz", c.ringdown.omega_ge_ghz},
          {"v_drive_v", c.ringdown.v_drive},
          {"tau_ns", c.ringdown.tau_ns}}},
        {"flux_sweep", {{"points", c.flux_sweep.points}, {"calibrate_couplings", c.flux_sweep.calibrate_couplings}}},
        {"design",
         {{"dispersive_margin", c.design.constraints.dispersive_margin},
          {"ej_ec_min", c.design.constraints.ej_ec_min},
          {"omega_ge_ghz", c.design.constraints.omega_ge_ghz},
          {"xi", c.design.constraints.xi},
          {"grid", grid(c.design.grid)},
          {"map_grid", grid(c.design.map_grid)},
          {"map_cap_mhz", c.design.map_cap_mhz}}},
        {"driftfix",
         {{"records_path", c.driftfix.records_path},
          {"snr_floor", c.driftfix.detection.snr_floor},
          {"clarity_factor", c.driftfix.clarity_factor},
          {"synthetic",
           {{"kind", sd.kind == DriftKind::gaussian ? "gaussian" : "sinusoidal"},
            {"excursion_mhz", sd.excursion_mhz},
            {"correlation_records", sd.correlation_records},
            {"period_records", sd.period_records},
            {"records", sd.records},
            {"linewidth_mhz", sd.linewidth_mhz},
            {"tracking_half_span_mhz", sd.tracking_half_span_mhz},
            {"data_lo_mhz", sd.data_lo_mhz},
            {"data_hi_mhz", sd.data_hi_mhz},
            {"step_mhz", sd.step_mhz},
            {"noise", sd.noise}}}}},
    };
    return j.dump();
}

std::string config_hash(const RunConfig& config)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : config_json(config)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace phonon
