#include <cmath>
#include <random>

#include <doctest.h>

#include "phonon/errors.hpp"
#include "phonon/experiments.hpp"
#include "phonon/fitting.hpp"

using namespace phonon;

namespace {

SpectrumFrame synthetic_frame(const std::vector<Lorentzian>& peaks, double lo, double hi, int n, double noise,
                              std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, noise);
    SpectrumFrame f;
    for (double x : linear_grid(lo, hi, n)) {
        double y = 0.02;
        for (const Lorentzian& l : peaks)
            y += lorentzian(x, l);
        f.detunings_mhz.push_back(x);
        f.response.push_back(noise > 0.0 ? y + nd(rng) : y);
    }
    return f;
}

} // namespace

TEST_SUITE("fitting")
{
    TEST_CASE("exponential fit recovers the rate")
    {
        std::vector<double> t, y, yo;
        for (int i = 0; i <= 40; ++i) {
            t.push_back(0.05 * i);
            y.push_back(0.8 * std::exp(-2.3 * t.back()));
            yo.push_back(y.back() + 0.1);
        }
        const ExponentialFit f = fit_exponential(t, y, false);
        CHECK(f.rate == doctest::Approx(2.3).epsilon(1e-9));
        CHECK(f.amplitude == doctest::Approx(0.8).epsilon(1e-9));
        const ExponentialFit fo = fit_exponential(t, yo, true);
        CHECK(fo.rate == doctest::Approx(2.3).epsilon(1e-6));
        CHECK(fo.offset == doctest::Approx(0.1).epsilon(1e-6));
    }

    TEST_CASE("single Lorentzian is recovered exactly")
    {
        const SpectrumFrame f = synthetic_frame({{-1.3, 0.8, 0.5}}, -10.0, 10.0, 201, 0.0, 0);
        const PeakFit fit = peak_fit(f, 1);
        REQUIRE(fit.peaks.size() == 1);
        CHECK(std::abs(fit.peaks[0].center + 1.3) < 1e-6);
        CHECK(std::abs(fit.peaks[0].fwhm - 0.8) < 1e-6);
        CHECK(std::abs(fit.peaks[0].height - 0.5) < 1e-6);
        CHECK(std::abs(fit.offset - 0.02) < 1e-6);
    }

    TEST_CASE("two Lorentzians split by five widths")
    {
        const double w = 0.6, split = 5.0 * w;
        const SpectrumFrame f = synthetic_frame({{0.0, w, 0.6}, {-split, w, 0.3}}, -8.0, 5.0, 261, 0.0, 0);
        const PeakFit fit = peak_fit(f, 2);
        REQUIRE(fit.peaks.size() == 2);
        CHECK(std::abs(fit.peaks[0].center + split) < 0.01 * split);
        CHECK(std::abs(fit.peaks[1].center) < 0.01 * split);
        CHECK(resolved_peak_count(fit) == 2);
        CHECK(count_resolved_peaks(f) == 2);
    }

    TEST_CASE("noisy Lorentzian pair at SNR 20")
    {
        const double w = 0.6, split = 5.0 * w, height = 0.6;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const SpectrumFrame f =
                synthetic_frame({{0.0, w, height}, {-split, w, height}}, -8.0, 5.0, 261, height / 20.0, seed);
            const PeakFit fit = peak_fit(f, 2);
            REQUIRE(fit.peaks.size() == 2);
            CHECK(std::abs(fit.peaks[0].center + split) < 0.05 * split);
            CHECK(std::abs(fit.peaks[1].center) < 0.05 * split);
        }
    }

    TEST_CASE("ladder fit runs along the sign of chi")
    {
        const std::vector<Lorentzian> truth = {{0.0, 1.0, 0.5}, {-3.0, 1.2, 0.35}, {-6.0, 1.5, 0.15}};
        const SpectrumFrame f = synthetic_frame(truth, -12.0, 4.0, 161, 0.0, 0);
        const PeakFit fit = ladder_peak_fit(f, 3, -1.0);
        REQUIRE(fit.peaks.size() == 3);
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(fit.peaks[k].center == doctest::Approx(truth[2 - k].center).epsilon(1e-6));
        for (double s : fit.spacings())
            CHECK(s == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(resolved_peak_count(fit) == 3);
    }

    TEST_CASE("ladder fit recovers a shoulder from the chi-seeded step")
    {
        // The n = 1 line sits on the flank of n = 0 without a maximum of its own.
        const std::vector<Lorentzian> truth = {{0.0, 1.9, 0.5}, {-2.05, 2.1, 0.15}};
        const SpectrumFrame f = synthetic_frame(truth, -8.0, 5.0, 105, 0.0, 0);
        REQUIRE(count_resolved_peaks(f) == 1);
        const PeakFit fit = ladder_peak_fit(f, 2, -1.0);
        REQUIRE(fit.peaks.size() == 2);
        CHECK(fit.spacings().at(0) == doctest::Approx(2.05).epsilon(1e-6));
        CHECK_THROWS_AS(ladder_peak_fit(f, 2, 0.0), ConfigError);
    }

    TEST_CASE("Sparrow criterion merges overlapping peaks")
    {
        PeakFit fit;
        fit.peaks = {{0.0, 2.0, 1.0}, {0.5, 2.0, 1.0}};
        CHECK(resolved_peak_count(fit) == 1);
        fit.peaks[1].center = 2.0;
        CHECK(resolved_peak_count(fit) == 2);
        fit.peaks[1].height = 0.05;
        CHECK(resolved_peak_count(fit) == 1);
    }

    TEST_CASE("sampled FWHM")
    {
        std::vector<double> x, y;
        for (int i = -1000; i <= 1000; ++i) {
            x.push_back(0.02 * i);
            y.push_back(lorentzian(x.back(), {0.3, 1.1, 1.0}));
        }
        CHECK(sampled_fwhm(x, y) == doctest::Approx(1.1).epsilon(2e-3));
    }

    TEST_CASE("fit failures are reported")
    {
        const ResidualFn bad = [](const Eigen::VectorXd&, Eigen::VectorXd& r) {
            r.setConstant(std::numeric_limits<double>::quiet_NaN());
        };
        CHECK_THROWS_AS(least_squares(bad, 3, Eigen::VectorXd::Ones(2), "test"), FitError);
    }
}
