#include "phonon/driftfix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "phonon/errors.hpp"
#include "phonon/fitting.hpp"

namespace phonon {

namespace {

double median(std::vector<double> v)
{
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + long(m), v.end());
    if (v.size() % 2)
        return v[m];
    return 0.5 * (v[m] + *std::max_element(v.begin(), v.begin() + long(m)));
}

// Noise from the median absolute first difference (robust against the line itself).
double noise_estimate(const std::vector<double>& y)
{
    std::vector<double> d;
    for (std::size_t i = 1; i < y.size(); ++i)
        d.push_back(std::abs(y[i] - y[i - 1]));
    return 1.4826 * median(d) / std::sqrt(2.0);
}

double centroid_top(const std::vector<double>& x, const std::vector<double>& y)
{
    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = std::max<std::size_t>(1, sorted.size() / 5);
    const double threshold = sorted[sorted.size() - k];
    const double floor = sorted[sorted.size() - k - (sorted.size() > k ? 1 : 0)];
    double w = 0.0, wx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (y[i] >= threshold) {
            const double weight = y[i] - floor;
            w += weight;
            wx += weight * x[i];
        }
    if (!(w > 0.0))
        throw NumericError("centroid: no weight above the top-20% threshold");
    return wx / w;
}

std::vector<double> average(const std::vector<std::vector<double>>& rows)
{
    std::vector<double> out(rows.front().size(), 0.0);
    for (const std::vector<double>& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i)
            out[i] += r[i];
    for (double& v : out)
        v /= double(rows.size());
    return out;
}

// Points of `grid` at which every frame, shifted by its offset, is defined.
std::vector<double> common_grid(const std::vector<double>& grid, const std::vector<const SpectrumFrame*>& frames,
                                const std::vector<double>& shifts)
{
    double lo = -INFINITY, hi = INFINITY;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        lo = std::max(lo, frames[k]->detunings_mhz.front() - shifts[k]);
        hi = std::min(hi, frames[k]->detunings_mhz.back() - shifts[k]);
    }
    const double eps = 1e-9 * std::max(1.0, std::abs(hi - lo));
    std::vector<double> out;
    for (double x : grid)
        if (x >= lo - eps && x <= hi + eps)
            out.push_back(x);
    if (out.size() < 3)
        throw NumericError("drift exceeds the spectral window: common grid has fewer than 3 points");
    return out;
}

} // namespace

const char* to_string(CenterMethod m) { return m == CenterMethod::lorentzian ? "lorentzian" : "centroid"; }

LineCenter detect_line_center(const SpectrumFrame& frame, const DetectionOptions& options)
{
    frame.validate();
    const std::vector<double>& x = frame.detunings_mhz;
    const std::vector<double>& y = frame.response;
    if (x.size() < 5)
        throw NumericError("line detection needs at least 5 points");
    const auto peak = std::max_element(y.begin(), y.end());
    const double base = median(y);
    const double contrast = *peak - base;
    const double noise = noise_estimate(y);
    LineCenter out;
    out.snr = contrast > 0.0 ? (noise > 0.0 ? contrast / noise : INFINITY) : 0.0;
    if (!(out.snr >= options.snr_floor)) {
        std::ostringstream os;
        os << "no discernible line: contrast/noise = " << out.snr << " below the floor " << options.snr_floor;
        throw NumericError(os.str());
    }
    try {
        const double width_guess = [&] {
            try {
                return sampled_fwhm(x, y);
            } catch (const NumericError&) {
                return 0.1 * (x.back() - x.front());
            }
        }();
        const MultiLorentzianFit fit =
            fit_lorentzians(x, y, {{x[std::size_t(peak - y.begin())], width_guess, contrast}}, base, true);
        const Lorentzian& l = fit.peaks.front();
        if (l.height > 0.0 && l.center >= x.front() && l.center <= x.back()) {
            out.center = l.center;
            out.method = CenterMethod::lorentzian;
            return out;
        }
    } catch (const FitError&) {
    }
    out.center = centroid_top(x, y);
    out.method = CenterMethod::centroid;
    return out;
}

std::vector<double> shifted_samples(const SpectrumFrame& frame, double shift, const std::vector<double>& grid)
{
    const std::vector<double>& x = frame.detunings_mhz;
    const std::vector<double>& y = frame.response;
    const double eps = 1e-9 * std::max(1.0, x.back() - x.front());
    std::vector<double> out;
    out.reserve(grid.size());
    for (double g : grid) {
        const double q = g + shift;
        if (q < x.front() - eps || q > x.back() + eps)
            throw NumericError("shifted sample outside the spectrum window");
        auto it = std::upper_bound(x.begin(), x.end(), q);
        std::size_t i = std::size_t(std::clamp<long>(long(it - x.begin()) - 1, 0, long(x.size()) - 2));
        const double t = std::clamp((q - x[i]) / (x[i + 1] - x[i]), 0.0, 1.0);
        out.push_back((1.0 - t) * y[i] + t * y[i + 1]);
    }
    return out;
}

AlignedAverage align_and_average(const std::vector<TrackingRecord>& records, const DetectionOptions& options)
{
    if (records.size() < 2)
        throw ConfigError("alignment needs at least 2 records");
    AlignedAverage out;
    std::vector<const TrackingRecord*> kept;
    for (const TrackingRecord& r : records) {
        try {
            r.data.validate();
            const LineCenter c = detect_line_center(r.tracking, options);
            kept.push_back(&r);
            out.record_ids.push_back(r.id);
            out.centers.push_back(c.center);
            out.methods.push_back(c.method);
        } catch (const NumericError& e) {
            out.warnings.push_back("record " + std::to_string(r.id) + " dropped: " + e.what());
        } catch (const ConfigError& e) {
            out.warnings.push_back("record " + std::to_string(r.id) + " dropped: " + e.what());
        }
    }
    if (kept.size() < 2)
        throw NumericError("alignment failed: fewer than 2 records with a detectable line");

    out.reference_frequency = std::accumulate(out.centers.begin(), out.centers.end(), 0.0) / double(kept.size());
    for (double c : out.centers)
        out.offsets.push_back(c - out.reference_frequency);

    std::vector<const SpectrumFrame*> data, tracking;
    for (const TrackingRecord* r : kept) {
        data.push_back(&r->data);
        tracking.push_back(&r->tracking);
    }
    const std::vector<double> zero(kept.size(), 0.0);
    const auto both = [&](const std::vector<const SpectrumFrame*>& frames, std::vector<double>& grid,
                          std::vector<double>& naive, std::vector<double>& aligned) {
        // The same grid carries both averages, so it must cover unshifted and shifted frames.
        const std::vector<double> g1 = common_grid(frames.front()->detunings_mhz, frames, zero);
        grid = common_grid(g1, frames, out.offsets);
        std::vector<std::vector<double>> a, b;
        for (std::size_t k = 0; k < frames.size(); ++k) {
            a.push_back(shifted_samples(*frames[k], 0.0, grid));
            b.push_back(shifted_samples(*frames[k], out.offsets[k], grid));
        }
        naive = average(a);
        aligned = average(b);
    };
    both(data, out.data_grid, out.naive_data, out.aligned_data);
    both(tracking, out.tracking_grid, out.naive_tracking, out.aligned_tracking);
    out.width_before = sampled_fwhm(out.tracking_grid, out.naive_tracking);
    out.width_after = sampled_fwhm(out.tracking_grid, out.aligned_tracking);
    return out;
}

ChiDispersionReport residual_chi_dispersion(const std::vector<double>& offsets_mhz, const DeviceParams& params,
                                            double clarity_factor)
{
    if (!(clarity_factor > 0.0))
        throw ConfigError("clarity factor must be positive");
    ChiDispersionReport r;
    r.clarity_factor = clarity_factor;
    const double delta = params.delta_mhz();
    r.chi_mhz = chi(params.g_mhz, delta, params.alpha_mhz);
    for (double d : offsets_mhz) {
        const double rel = chi_dispersion(delta, params.alpha_mhz, d);
        r.relative.push_back(rel);
        r.dchi_mhz.push_back(rel * r.chi_mhz);
        r.max_abs_dchi_mhz = std::max(r.max_abs_dchi_mhz, std::abs(rel * r.chi_mhz));
    }
    r.gamma_mhz = 1e-3 * params.gamma_total_khz;
    r.kappa_mhz = 1e-3 * params.kappa_khz;
    r.clarity_ok = r.max_abs_dchi_mhz <= clarity_factor * std::min(r.gamma_mhz, r.kappa_mhz);
    return r;
}

void SyntheticDrift::validate() const
{
    if (!(excursion_mhz >= 0.0))
        throw ConfigError("drift excursion must be non-negative");
    if (!(correlation_records > 0.0) || !(period_records > 0.0))
        throw ConfigError("drift correlation length and period must be positive");
    if (records < 2)
        throw ConfigError("synthetic drift needs at least 2 records");
    if (!(linewidth_mhz > 0.0) || !(step_mhz > 0.0) || !(tracking_half_span_mhz > 0.0))
        throw ConfigError("linewidth, step and tracking span must be positive");
    if (!(data_hi_mhz > data_lo_mhz))
        throw ConfigError("data window needs lo < hi");
    if (!(noise >= 0.0))
        throw ConfigError("noise must be non-negative");
}

SyntheticRecords synthetic_records(const SyntheticDrift& spec)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SyntheticRecords out;

    // 1.6449 = two-sided 90% quantile of the standard normal.
    const double sigma = spec.excursion_mhz / 1.6448536269514722;
    const double rho = std::exp(-1.0 / spec.correlation_records);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    double x = sigma * normal(rng);
    for (int k = 0; k < spec.records; ++k) {
        if (spec.kind == DriftKind::gaussian) {
            if (k > 0)
                x = rho * x + sigma * std::sqrt(1.0 - rho * rho) * normal(rng);
            out.drift_mhz.push_back(x);
        } else {
            out.drift_mhz.push_back(spec.excursion_mhz *
                                    std::sin(2.0 * std::numbers::pi * k / spec.period_records + phase));
        }
    }

    const int nt = int(std::lround(2.0 * spec.tracking_half_span_mhz / spec.step_mhz));
    const int nd = int(std::lround((spec.data_hi_mhz - spec.data_lo_mhz) / spec.step_mhz));
    const std::vector<double> tgrid = linear_grid(-spec.tracking_half_span_mhz, spec.tracking_half_span_mhz, nt + 1);
    const std::vector<double> dgrid = linear_grid(spec.data_lo_mhz, spec.data_hi_mhz, nd + 1);
    for (int k = 0; k < spec.records; ++k) {
        const double d = out.drift_mhz[std::size_t(k)];
        TrackingRecord r;
        r.id = k;
        r.timestamp_s = 20.0 * k;
        r.tracking.detunings_mhz = tgrid;
        for (double f : tgrid)
            r.tracking.response.push_back(lorentzian(f, {d, spec.linewidth_mhz, 1.0}) +
                                          (spec.noise > 0.0 ? spec.noise * normal(rng) : 0.0));
        r.data.detunings_mhz = dgrid;
        for (double f : dgrid) {
            double v = 0.0;
            for (const Lorentzian& p : spec.data_peaks)
                v += lorentzian(f, {p.center + d, p.fwhm, p.height});
            r.data.response.push_back(v + (spec.noise > 0.0 ? spec.noise * normal(rng) : 0.0));
        }
        r.tracking.metadata = {{"record_id", double(k)}};
        r.data.metadata = {{"record_id", double(k)}};
        out.records.push_back(std::move(r));
    }
    return out;
}

} // namespace phonon
