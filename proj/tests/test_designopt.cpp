#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "phonon/designopt.hpp"
#include "phonon/errors.hpp"
#include "phonon/model.hpp"

using namespace phonon;

TEST_SUITE("designopt")
{
    TEST_CASE("feasibility of individual points")
    {
        const DesignConstraints c;
        const double g = g_of_alpha(c.xi, c.omega_ge_ghz, 120.0);
        const Feasibility edge = feasible(120.0, -5.0 * g, c);
        CHECK(edge.feasible);
        CHECK(std::abs(edge.slacks.detuning) < 1e-9);
        CHECK(edge.slacks.anharmonic > 0.0);
        CHECK(edge.slacks.transmon > 0.0);

        CHECK_FALSE(feasible(200.0, -1000.0, c).feasible); // EJ/EC below 50
        CHECK(feasible(200.0, -1000.0, c).slacks.transmon < 0.0);
        CHECK_FALSE(feasible(120.0, -4.0 * g, c).feasible);
        CHECK_FALSE(feasible(120.0, 2.0 * g, c).feasible);
        CHECK(ej_ec_ratio(2.3, 120.0) == doctest::Approx(2420.0 * 2420.0 / (8.0 * 120.0 * 120.0)).epsilon(1e-12));
        CHECK_THROWS_AS(feasible(-1.0, -100.0, c), ConfigError);
    }

    TEST_CASE("dispersive shift at design points")
    {
        const DesignConstraints c;
        const double g = g_of_alpha(c.xi, c.omega_ge_ghz, 120.0);
        CHECK(design_chi_abs(120.0, -100.0, c) == doctest::Approx(std::abs(chi(g, -100.0, 120.0))));
        CHECK_THROWS_AS(design_chi_abs(120.0, 0.0, c), PoleError);
        CHECK_THROWS_AS(design_chi_abs(120.0, 120.0, c), PoleError);
    }

    TEST_CASE("constrained optimum")
    {
        const DesignConstraints c;
        const DesignResult r = optimize_chi(c);
        CHECK(r.alpha_opt == doctest::Approx(120.0).epsilon(10.0 / 120.0));
        CHECK(r.g_opt == doctest::Approx(g_of_alpha(c.xi, c.omega_ge_ghz, r.alpha_opt)).epsilon(1e-12));
        const bool below = std::abs(r.delta_opt + c.dispersive_margin * r.g_opt) < 1e-3;
        const bool mirrored = std::abs(r.delta_opt - r.alpha_opt - c.dispersive_margin * r.g_opt) < 1e-3;
        CHECK((below || mirrored));
        CHECK(r.branch != DetuningBranch::straddling);
        CHECK(std::abs(r.mirror_chi) == doctest::Approx(std::abs(r.chi_opt)).epsilon(1e-9));
        CHECK(std::abs(r.chi_opt) >= r.grid_chi_abs - 1e-12);
        CHECK(r.slacks.detuning > -1e-3);
        CHECK(r.slacks.anharmonic > -1e-3);
        CHECK(r.slacks.transmon > -1e-3);
        // Optimum sits on the transmon limit.
        CHECK(std::abs(r.slacks.transmon) < 1e-2);
    }

    TEST_CASE("grid refinement is stable")
    {
        const DesignConstraints c;
        SearchGrid coarse;
        SearchGrid fine = coarse;
        fine.alpha_step = 0.5;
        fine.delta_step = 0.5;
        const DesignResult a = optimize_chi(c, coarse);
        const DesignResult b = optimize_chi(c, fine);
        CHECK(std::abs(b.chi_opt) == doctest::Approx(std::abs(a.chi_opt)).epsilon(0.005));
    }

    TEST_CASE("feasibility map agrees with the optimizer")
    {
        const DesignConstraints c;
        SearchGrid g;
        g.alpha_step = 5.0;
        g.delta_step = 5.0;
        const FeasibilityMap m = feasibility_map(c, g);
        const DesignResult r = optimize_chi(c);
        CHECK(m.best_feasible_chi <= std::abs(r.chi_opt) + 1e-12);
        CHECK(m.best_feasible_chi == doctest::Approx(std::abs(r.chi_opt)).epsilon(0.02));

        // Pole cells are excluded.
        for (std::size_t i = 0; i < m.alphas.size(); ++i)
            for (std::size_t j = 0; j < m.deltas.size(); ++j)
                if (m.deltas[j] == 0.0 || m.deltas[j] == m.alphas[i]) {
                    CHECK(std::isnan(m.chi_abs[i][j]));
                    CHECK_FALSE(m.feasible[i][j]);
                }
        for (const auto& row : m.chi_abs)
            for (double v : row)
                CHECK((std::isnan(v) || v <= m.cap_mhz));
    }

    TEST_CASE("straddling regime")
    {
        const DesignConstraints c;
        const StraddlingReport s = straddling_feasibility(c);
        CHECK(s.alpha_threshold > s.alpha_transmon_max);
        CHECK_FALSE(s.feasible);
        CHECK(s.alpha_transmon_max == doctest::Approx(2300.0 / 19.0).epsilon(1e-9));

        // Below the threshold the best |chi| grows monotonically with alpha.
        std::vector<double> alphas;
        for (double a = 10.0; a < 0.99 * s.alpha_threshold; a += 5.0)
            alphas.push_back(a);
        const AlphaProfile prof = max_chi_vs_alpha(c, alphas);
        for (std::size_t i = 1; i < alphas.size(); ++i) {
            CHECK(prof.max_chi[i] > prof.max_chi[i - 1]);
            CHECK_FALSE(prof.straddling_open[i]);
        }
        const AlphaProfile above = max_chi_vs_alpha(c, {1.05 * s.alpha_threshold});
        CHECK(above.straddling_open[0]);
        CHECK_FALSE(above.transmon_ok[0]);
    }

    TEST_CASE("vanishing coupling")
    {
        DesignConstraints c;
        c.xi = 1e-6;
        const DesignResult r = optimize_chi(c);
        CHECK(std::abs(r.chi_opt) < 1e-3);
        CHECK(std::min(std::abs(r.slacks.detuning), std::abs(r.slacks.anharmonic)) < 1e-3);
        CHECK(design_chi_abs(120.0, -100.0, DesignConstraints{5.0, 50.0, 2.3, 0.0}) == 0.0);
    }

    TEST_CASE("infeasible constraints are reported")
    {
        DesignConstraints c;
        c.ej_ec_min = 1e6;
        CHECK_THROWS_AS(optimize_chi(c), NumericError);
        SearchGrid bad;
        bad.alpha_step = 0.0;
        CHECK_THROWS_AS(bad.validate(), ConfigError);
    }
}
