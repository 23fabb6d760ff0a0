#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "phonon/driftfix.hpp"
#include "phonon/errors.hpp"

using namespace phonon;

namespace {

SpectrumFrame line(double center, double fwhm, double noise, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, noise);
    SpectrumFrame f;
    for (double x : linear_grid(-8.0, 8.0, 321)) {
        f.detunings_mhz.push_back(x);
        f.response.push_back(lorentzian(x, {center, fwhm, 1.0}) + (noise > 0.0 ? nd(rng) : 0.0));
    }
    return f;
}

} // namespace

TEST_SUITE("driftfix")
{
    TEST_CASE("noiseless line center")
    {
        for (double c : {-2.37, 0.0, 0.013, 3.1}) {
            const LineCenter lc = detect_line_center(line(c, 1.1, 0.0, 0));
            CHECK(std::abs(lc.center - c) < 0.05 / 100.0);
            CHECK(lc.method == CenterMethod::lorentzian);
        }
    }

    TEST_CASE("noisy line center at SNR 10")
    {
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            const LineCenter lc = detect_line_center(line(0.7, 1.1, 0.1, seed));
            CHECK(std::abs(lc.center - 0.7) < 0.1 * 1.1);
        }
    }

    TEST_CASE("flat or tiny frames are rejected")
    {
        SpectrumFrame flat;
        flat.detunings_mhz = linear_grid(-5.0, 5.0, 101);
        flat.response.assign(101, 0.3);
        CHECK_THROWS_AS(detect_line_center(flat), NumericError);
        CHECK_THROWS_AS(detect_line_center(line(0.0, 1.1, 1.0, 3)), NumericError);
        SpectrumFrame tiny;
        tiny.detunings_mhz = {0.0, 1.0};
        tiny.response = {0.0, 1.0};
        CHECK_THROWS_AS(detect_line_center(tiny), NumericError);
    }

    TEST_CASE("shifted samples")
    {
        const SpectrumFrame f = line(0.0, 1.1, 0.0, 0);
        const std::vector<double> grid = {-1.0, 0.0, 1.0};
        const std::vector<double> s = shifted_samples(f, 0.5, grid);
        CHECK(s[1] == doctest::Approx(lorentzian(0.5, {0.0, 1.1, 1.0})).epsilon(1e-2));
        CHECK_THROWS_AS(shifted_samples(f, 10.0, grid), NumericError);
    }

    TEST_CASE("zero drift leaves the average unchanged")
    {
        SyntheticDrift d;
        d.excursion_mhz = 0.0;
        d.records = 20;
        const AlignedAverage a = align_and_average(synthetic_records(d).records);
        for (std::size_t i = 0; i < a.data_grid.size(); ++i)
            CHECK(std::abs(a.aligned_data[i] - a.naive_data[i]) < 1e-6);
        CHECK(a.width_after == doctest::Approx(a.width_before).epsilon(1e-6));
        const ChiDispersionReport r = residual_chi_dispersion(a.offsets, DeviceParams{});
        CHECK(r.max_abs_dchi_mhz < 1e-6);
    }

    TEST_CASE("drift correction narrows the averaged line")
    {
        double naive = 0.0, aligned = 0.0;
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            SyntheticDrift d;
            d.seed = seed;
            const SyntheticRecords syn = synthetic_records(d);
            const AlignedAverage a = align_and_average(syn.records);
            CHECK(a.width_after <= a.width_before);
            CHECK(a.warnings.empty());
            naive += a.width_before / 100.0;
            aligned += a.width_after / 100.0;
        }
        CHECK(naive == doctest::Approx(2.8).epsilon(0.15));
        CHECK(aligned == doctest::Approx(1.1).epsilon(0.15));
    }

    TEST_CASE("alignment is rigid and idempotent")
    {
        SyntheticDrift d;
        d.seed = 7;
        d.records = 40;
        const SyntheticRecords syn = synthetic_records(d);
        const AlignedAverage a = align_and_average(syn.records);

        SpectrumFrame avg;
        avg.detunings_mhz = a.data_grid;
        avg.response = a.aligned_data;
        const PeakFit fit = peak_fit(avg, {-3.0, 0.0}, 1.2);
        REQUIRE(fit.peaks.size() == 2);
        CHECK(fit.spacings()[0] == doctest::Approx(3.0).epsilon(1e-3));

        // Records already shifted by their offsets need no further correction.
        std::vector<TrackingRecord> shifted;
        for (std::size_t i = 0; i < syn.records.size(); ++i) {
            TrackingRecord r = syn.records[i];
            const double off = a.offsets[i];
            std::vector<double> grid;
            for (double x : r.tracking.detunings_mhz)
                if (x + off >= r.tracking.detunings_mhz.front() && x + off <= r.tracking.detunings_mhz.back())
                    grid.push_back(x);
            r.tracking.response = shifted_samples(r.tracking, off, grid);
            r.tracking.detunings_mhz = grid;
            shifted.push_back(r);
        }
        const AlignedAverage again = align_and_average(shifted);
        for (double o : again.offsets)
            CHECK(std::abs(o) < 2e-3);
    }

    TEST_CASE("sinusoidal drift excursion")
    {
        SyntheticDrift d;
        d.kind = DriftKind::sinusoidal;
        const SyntheticRecords syn = synthetic_records(d);
        const auto [lo, hi] = std::minmax_element(syn.drift_mhz.begin(), syn.drift_mhz.end());
        CHECK(*hi <= 1.5 + 1e-12);
        CHECK(*lo >= -1.5 - 1e-12);
        CHECK(*hi - *lo > 2.9);
        const AlignedAverage a = align_and_average(syn.records);
        CHECK(a.width_after == doctest::Approx(1.1).epsilon(0.15));
        CHECK(a.width_before > 2.0 * a.width_after);
    }

    TEST_CASE("records that cannot be detected are dropped")
    {
        SyntheticDrift d;
        d.records = 5;
        std::vector<TrackingRecord> recs = synthetic_records(d).records;
        std::fill(recs[2].tracking.response.begin(), recs[2].tracking.response.end(), 0.0);
        const AlignedAverage a = align_and_average(recs);
        CHECK(a.record_ids.size() == 4);
        CHECK(a.warnings.size() == 1);
        CHECK_THROWS_AS(align_and_average({recs[0]}), ConfigError);
    }

    TEST_CASE("residual dispersive-shift spread")
    {
        const DeviceParams p;
        const double delta = p.delta_mhz();
        const ChiDispersionReport r = residual_chi_dispersion({0.015 * delta, 0.0}, p);
        CHECK(std::abs(r.relative[0]) == doctest::Approx(0.0208).epsilon(0.01));
        CHECK(r.relative[1] == 0.0);

        const ChiDispersionReport c = residual_chi_dispersion({-1.5, 1.5}, p);
        CHECK(c.max_abs_dchi_mhz > 0.01);
        CHECK(c.max_abs_dchi_mhz < 0.1);
        CHECK(c.max_abs_dchi_mhz < 0.1 * c.gamma_mhz);
        CHECK(c.clarity_ok);
        CHECK_FALSE(residual_chi_dispersion({-1.5, 1.5}, p, 0.05).clarity_ok);
        CHECK_THROWS_AS(residual_chi_dispersion({0.0}, p, 0.0), ConfigError);
    }

    TEST_CASE("synthetic records are seeded")
    {
        SyntheticDrift d;
        d.noise = 0.05;
        d.records = 10;
        const SyntheticRecords a = synthetic_records(d);
        const SyntheticRecords b = synthetic_records(d);
        CHECK(a.drift_mhz == b.drift_mhz);
        CHECK(a.records[3].data.response == b.records[3].data.response);
        d.seed = 2;
        CHECK(synthetic_records(d).drift_mhz != a.drift_mhz);
    }
}
