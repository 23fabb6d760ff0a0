#include "phonon/designopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "phonon/errors.hpp"
#include "phonon/model.hpp"

namespace phonon {

namespace {

double coupling(double alpha, const DesignConstraints& c) { return g_of_alpha(c.xi, c.omega_ge_ghz, alpha); }

bool on_pole(double alpha, double delta) { return std::abs(delta) < 1e-12 || std::abs(delta - alpha) < 1e-12; }

std::vector<double> axis(double lo, double hi, double step)
{
    const long n = long(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i)
        v[std::size_t(i)] = lo + step * double(i);
    return v;
}

DetuningBranch branch_of(double alpha, double delta)
{
    if (delta < 0.0)
        return DetuningBranch::below;
    return delta < alpha ? DetuningBranch::straddling : DetuningBranch::above;
}

struct Candidate {
    bool ok = false;
    double delta = 0.0;
    double chi_abs = 0.0;
};

// Bisection between a feasible and an infeasible detuning; returns the feasible end.
double bisect_boundary(double alpha, double good, double bad, const DesignConstraints& c)
{
    for (int i = 0; i < 200 && std::abs(good - bad) > 1e-10 * std::max(1.0, std::abs(good)); ++i) {
        const double mid = 0.5 * (good + bad);
        const Feasibility f = feasible(alpha, mid, c);
        (f.feasible && !on_pole(alpha, mid) ? good : bad) = mid;
    }
    return good;
}

// |chi| grows toward the poles, so the branch optimum is the feasible edge nearest a pole.
Candidate branch_optimum(double alpha, DetuningBranch branch, const DesignConstraints& c, const SearchGrid& grid)
{
    const auto usable = [&](double d) {
        return d >= grid.delta_lo && d <= grid.delta_hi && feasible(alpha, d, c).feasible && !on_pole(alpha, d);
    };
    double good = 0.0, bad = 0.0;
    switch (branch) {
    case DetuningBranch::below:
        good = grid.delta_lo;
        bad = std::min(0.0, grid.delta_hi);
        break;
    case DetuningBranch::straddling:
        good = 0.5 * alpha;
        bad = 0.0;
        break;
    case DetuningBranch::above:
        good = grid.delta_hi;
        bad = std::max(alpha, grid.delta_lo);
        break;
    }
    if (!usable(good))
        return {};
    const double d = bisect_boundary(alpha, good, bad, c);
    return {true, d, design_chi_abs(alpha, d, c)};
}

} // namespace

void DesignConstraints::validate() const
{
    if (!(dispersive_margin > 1.0))
        throw ConfigError("dispersive_margin must be > 1");
    if (!(ej_ec_min > 1.0))
        throw ConfigError("ej_ec_min must be > 1");
    if (!(omega_ge_ghz > 0.0))
        throw ConfigError("omega_ge must be positive");
    if (!(xi >= 0.0) || !std::isfinite(xi))
        throw ConfigError("xi must be finite and non-negative");
}

void SearchGrid::validate() const
{
    if (!(alpha_lo > 0.0) || !(alpha_hi > alpha_lo) || !(alpha_step > 0.0))
        throw ConfigError("alpha grid needs 0 < lo < hi and a positive step");
    if (!(delta_hi > delta_lo) || !(delta_step > 0.0))
        throw ConfigError("delta grid needs lo < hi and a positive step");
    if (!(tolerance > 0.0))
        throw ConfigError("refinement tolerance must be positive");
}

std::vector<double> SearchGrid::alphas() const { return axis(alpha_lo, alpha_hi, alpha_step); }
std::vector<double> SearchGrid::deltas() const { return axis(delta_lo, delta_hi, delta_step); }

double ej_ec_ratio(double omega_ge_ghz, double alpha_mhz)
{
    const double w = 1e3 * omega_ge_ghz + alpha_mhz;
    return w * w / (8.0 * alpha_mhz * alpha_mhz);
}

Feasibility feasible(double alpha_mhz, double delta_mhz, const DesignConstraints& c)
{
    if (!(alpha_mhz > 0.0))
        throw ConfigError("alpha must be positive");
    const double mg = c.dispersive_margin * coupling(alpha_mhz, c);
    Feasibility f;
    f.slacks.detuning = std::abs(delta_mhz) - mg;
    f.slacks.anharmonic = std::abs(delta_mhz - alpha_mhz) - mg;
    f.slacks.transmon = ej_ec_ratio(c.omega_ge_ghz, alpha_mhz) - c.ej_ec_min;
    f.feasible = f.slacks.detuning >= 0.0 && f.slacks.anharmonic >= 0.0 && f.slacks.transmon >= 0.0;
    return f;
}

double design_chi_abs(double alpha_mhz, double delta_mhz, const DesignConstraints& c)
{
    const double g = coupling(alpha_mhz, c);
    if (g == 0.0)
        return 0.0;
    return std::abs(chi(g, delta_mhz, alpha_mhz));
}

const char* to_string(DetuningBranch b)
{
    switch (b) {
    case DetuningBranch::below:
        return "below";
    case DetuningBranch::straddling:
        return "straddling";
    case DetuningBranch::above:
        return "above";
    }
    return "?";
}

DesignResult optimize_chi(const DesignConstraints& c, const SearchGrid& grid, const FanOut& fan_out)
{
    c.validate();
    grid.validate();
    const std::vector<double> alphas = grid.alphas(), deltas = grid.deltas();

    struct RowBest {
        double chi = -1.0;
        double delta = 0.0;
    };
    std::vector<RowBest> rows(alphas.size());
    std::vector<long> violations(alphas.size() * 3, 0);
    fan_out(alphas.size(), [&](std::size_t i) {
        const double a = alphas[i];
        for (double d : deltas) {
            const Feasibility f = feasible(a, d, c);
            violations[3 * i] += f.slacks.detuning < 0.0;
            violations[3 * i + 1] += f.slacks.anharmonic < 0.0;
            violations[3 * i + 2] += f.slacks.transmon < 0.0;
            if (!f.feasible || on_pole(a, d))
                continue;
            const double x = design_chi_abs(a, d, c);
            if (x > rows[i].chi)
                rows[i] = {x, d};
        }
    });

    DesignResult r;
    std::size_t best = alphas.size();
    for (std::size_t i = 0; i < alphas.size(); ++i)
        if (rows[i].chi >= 0.0 && (best == alphas.size() || rows[i].chi > rows[best].chi))
            best = i;
    if (best == alphas.size()) {
        long v[3] = {0, 0, 0};
        for (std::size_t i = 0; i < alphas.size(); ++i)
            for (int k = 0; k < 3; ++k)
                v[k] += violations[3 * i + std::size_t(k)];
        const StraddlingReport s = straddling_feasibility(c);
        std::ostringstream os;
        os << "design space infeasible: no grid cell satisfies all constraints (cells violating |Delta| >= m g: " << v[0]
           << ", |Delta - alpha| >= m g: " << v[1] << ", EJ/EC >= " << c.ej_ec_min << ": " << v[2]
           << "; largest transmon-limit alpha " << s.alpha_transmon_max << " MHz)";
        throw NumericError(os.str());
    }
    r.grid_alpha = alphas[best];
    r.grid_delta = rows[best].delta;
    r.grid_chi_abs = rows[best].chi;
    r.branch = branch_of(r.grid_alpha, r.grid_delta);

    // Coordinate refinement: Delta by bisection onto the active boundary, alpha by
    // golden section on the branch optimum within two grid steps.
    const auto value = [&](double a) {
        if (a < grid.alpha_lo || a > grid.alpha_hi || feasible(a, 0.0, c).slacks.transmon < 0.0)
            return Candidate{};
        return branch_optimum(a, r.branch, c, grid);
    };
    double lo = std::max(grid.alpha_lo, r.grid_alpha - 2.0 * grid.alpha_step);
    double hi = std::min(grid.alpha_hi, r.grid_alpha + 2.0 * grid.alpha_step);
    double best_alpha = r.grid_alpha;
    Candidate best_c = value(best_alpha);
    if (!best_c.ok)
        best_c = {true, r.grid_delta, r.grid_chi_abs};
    const auto consider = [&](double a) {
        const Candidate cand = value(a);
        if (cand.ok && cand.chi_abs > best_c.chi_abs) {
            best_c = cand;
            best_alpha = a;
        }
        return cand.ok ? cand.chi_abs : -1.0;
    };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = consider(x1), f2 = consider(x2);
    while (hi - lo > 0.1 * grid.tolerance) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = consider(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = consider(x1);
        }
    }
    consider(lo);
    consider(hi);

    r.alpha_opt = best_alpha;
    r.delta_opt = best_c.delta;
    r.g_opt = coupling(best_alpha, c);

    // Mirror candidate at the same alpha; the larger |chi| wins, ties keep the lower branch.
    const DetuningBranch mirror_branch =
        r.branch == DetuningBranch::above ? DetuningBranch::below
                                          : (r.branch == DetuningBranch::below ? DetuningBranch::above
                                                                               : DetuningBranch::straddling);
    Candidate mirror;
    if (r.branch == DetuningBranch::straddling) {
        const double d = bisect_boundary(best_alpha, 0.5 * best_alpha, best_alpha, c);
        mirror = {true, d, design_chi_abs(best_alpha, d, c)};
    } else {
        mirror = branch_optimum(best_alpha, mirror_branch, c, grid);
    }
    if (mirror.ok) {
        const bool mirror_wins = mirror.chi_abs > best_c.chi_abs * (1.0 + 1e-9) ||
                                 (r.branch == DetuningBranch::above && mirror.chi_abs >= best_c.chi_abs * (1.0 - 1e-9));
        if (mirror_wins) {
            std::swap(mirror, best_c);
            r.delta_opt = best_c.delta;
            r.branch = mirror_branch;
        }
        r.mirror_delta = mirror.delta;
        r.mirror_chi = r.g_opt == 0.0 ? 0.0 : chi(r.g_opt, mirror.delta, best_alpha);
    }
    r.chi_opt = r.g_opt == 0.0 ? 0.0 : chi(r.g_opt, r.delta_opt, r.alpha_opt);
    r.slacks = feasible(r.alpha_opt, r.delta_opt, c).slacks;
    return r;
}

FeasibilityMap feasibility_map(const DesignConstraints& c, const SearchGrid& grid, double cap_mhz,
                               const FanOut& fan_out)
{
    c.validate();
    grid.validate();
    if (!(cap_mhz > 0.0))
        throw ConfigError("map cap must be positive");
    FeasibilityMap m;
    m.alphas = grid.alphas();
    m.deltas = grid.deltas();
    m.cap_mhz = cap_mhz;
    m.chi_abs.assign(m.alphas.size(), std::vector<double>(m.deltas.size()));
    m.feasible.assign(m.alphas.size(), std::vector<bool>(m.deltas.size()));
    fan_out(m.alphas.size(), [&](std::size_t i) {
        const double a = m.alphas[i];
        std::vector<bool> flags(m.deltas.size());
        for (std::size_t j = 0; j < m.deltas.size(); ++j) {
            const double d = m.deltas[j];
            if (on_pole(a, d)) {
                m.chi_abs[i][j] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            m.chi_abs[i][j] = std::min(cap_mhz, design_chi_abs(a, d, c));
            flags[j] = feasible(a, d, c).feasible;
        }
        m.feasible[i] = std::move(flags);
    });
    m.best_feasible_chi = -1.0;
    for (std::size_t i = 0; i < m.alphas.size(); ++i)
        for (std::size_t j = 0; j < m.deltas.size(); ++j)
            if (m.feasible[i][j] && m.chi_abs[i][j] > m.best_feasible_chi) {
                m.best_feasible_chi = m.chi_abs[i][j];
                m.best_alpha = m.alphas[i];
                m.best_delta = m.deltas[j];
            }
    return m;
}

AlphaProfile max_chi_vs_alpha(const DesignConstraints& c, const std::vector<double>& alphas)
{
    c.validate();
    AlphaProfile p;
    p.alphas = alphas;
    for (double a : alphas) {
        if (!(a > 0.0))
            throw ConfigError("alpha must be positive");
        const double mg = c.dispersive_margin * coupling(a, c);
        double best = 0.0;
        if (mg > 0.0) {
            best = std::max(design_chi_abs(a, -mg, c), design_chi_abs(a, a + mg, c));
            if (a >= 2.0 * mg && mg < 0.5 * a)
                best = std::max(best, design_chi_abs(a, mg, c));
        }
        p.max_chi.push_back(best);
        p.straddling_open.push_back(a >= 2.0 * mg);
        p.transmon_ok.push_back(ej_ec_ratio(c.omega_ge_ghz, a) >= c.ej_ec_min);
    }
    return p;
}

StraddlingReport straddling_feasibility(const DesignConstraints& c)
{
    c.validate();
    StraddlingReport s;
    // alpha >= 2 m g(alpha) with g = xi sqrt(alpha (omega + alpha)).
    const double k = 4.0 * std::pow(c.dispersive_margin * c.xi, 2);
    const double w = 1e3 * c.omega_ge_ghz;
    s.alpha_threshold = k < 1.0 ? k * w / (1.0 - k) : std::numeric_limits<double>::infinity();
    s.alpha_transmon_max = w / (std::sqrt(8.0 * c.ej_ec_min) - 1.0);
    s.feasible = s.alpha_threshold <= s.alpha_transmon_max;
    return s;
}

} // namespace phonon
