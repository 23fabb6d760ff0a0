#include "phonon/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "phonon/errors.hpp"

namespace phonon {

namespace {

struct Functor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const ResidualFn* fn;
    int n_inputs;
    int n_values;

    int inputs() const { return n_inputs; }
    int values() const { return n_values; }
    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const
    {
        (*fn)(p, r);
        return 0;
    }
};

std::string describe(const Eigen::VectorXd& v)
{
    std::ostringstream os;
    os << '[';
    for (Eigen::Index i = 0; i < v.size(); ++i)
        os << (i ? ", " : "") << v(i);
    os << ']';
    return os.str();
}

} // namespace

FitResult least_squares(const ResidualFn& residuals, int n_residuals, const Eigen::VectorXd& p0,
                        const std::string& what)
{
    if (n_residuals < p0.size())
        throw FitError(what + ": fewer data points (" + std::to_string(n_residuals) + ") than parameters (" +
                       std::to_string(p0.size()) + ")");
    Functor f{&residuals, int(p0.size()), n_residuals};
    Eigen::NumericalDiff<Functor, Eigen::Central> diff(f);
    Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Functor, Eigen::Central>> lm(diff);
    lm.parameters.maxfev = 4000 * int(p0.size() + 1);
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;

    Eigen::VectorXd p = p0;
    const int status = lm.minimize(p);
    Eigen::VectorXd r(n_residuals);
    residuals(p, r);
    const double norm = r.norm();

    using namespace Eigen::LevenbergMarquardtSpace;
    const bool failed = status == ImproperInputParameters || status == TooManyFunctionEvaluation ||
                        status == UserAsked || !p.allFinite() || !std::isfinite(norm);
    if (failed) {
        Eigen::VectorXd r0(n_residuals);
        residuals(p0, r0);
        throw FitError(what + ": least squares did not converge (status " + std::to_string(status) +
                       "), initial guess " + describe(p0) + " with residual norm " + std::to_string(r0.norm()) +
                       ", final residual norm " + std::to_string(norm));
    }
    return {p, norm, int(lm.nfev), status};
}

ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y, bool with_offset)
{
    if (t.size() != y.size() || t.size() < 3)
        throw FitError("exponential fit needs at least 3 matching samples");
    const int n = int(t.size());

    // Log-linear initial guess on the points above the estimated floor.
    const double floor = with_offset ? *std::min_element(y.begin(), y.end()) : 0.0;
    const double span = *std::max_element(y.begin(), y.end()) - floor;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (int i = 0; i < n; ++i) {
        const double v = y[i] - floor;
        if (v > 0.05 * span) {
            const double ly = std::log(v);
            sx += t[i];
            sy += ly;
            sxx += t[i] * t[i];
            sxy += t[i] * ly;
            ++m;
        }
    }
    double rate = 1.0 / std::max(1e-12, t.back() - t.front());
    double amp = span;
    if (m >= 2 && m * sxx - sx * sx > 0.0) {
        const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        if (slope < 0.0) {
            rate = -slope;
            amp = std::exp((sy - slope * sx) / m);
        }
    }

    Eigen::VectorXd p0(with_offset ? 3 : 2);
    p0(0) = amp;
    p0(1) = rate;
    if (with_offset)
        p0(2) = floor;
    const ResidualFn res = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        for (int i = 0; i < n; ++i)
            r(i) = p(0) * std::exp(-p(1) * t[i]) + (with_offset ? p(2) : 0.0) - y[i];
    };
    const FitResult fr = least_squares(res, n, p0, "exponential fit");
    return {fr.params(0), fr.params(1), with_offset ? fr.params(2) : 0.0, fr.residual_norm};
}

double lorentzian(double x, const Lorentzian& l)
{
    const double u = 2.0 * (x - l.center) / l.fwhm;
    return l.height / (1.0 + u * u);
}

MultiLorentzianFit fit_lorentzians(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<Lorentzian>& guess, double offset_guess, bool fit_offset)
{
    if (guess.empty())
        throw FitError("Lorentzian fit needs at least one peak");
    if (x.size() != y.size())
        throw FitError("Lorentzian fit: x and y lengths differ");
    const int n = int(x.size());
    const int k = int(guess.size());
    Eigen::VectorXd p0(3 * k + (fit_offset ? 1 : 0));
    for (int i = 0; i < k; ++i) {
        p0(3 * i) = guess[i].center;
        // Fit log-width so the width stays positive.
        p0(3 * i + 1) = std::log(std::abs(guess[i].fwhm));
        p0(3 * i + 2) = guess[i].height;
    }
    if (fit_offset)
        p0(3 * k) = offset_guess;

    const ResidualFn res = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
        const double c = fit_offset ? p(3 * k) : offset_guess;
        for (int j = 0; j < n; ++j) {
            double v = c;
            for (int i = 0; i < k; ++i)
                v += lorentzian(x[j], {p(3 * i), std::exp(p(3 * i + 1)), p(3 * i + 2)});
            r(j) = v - y[j];
        }
    };
    const FitResult fr = least_squares(res, n, p0, "Lorentzian fit (" + std::to_string(k) + " peaks)");

    MultiLorentzianFit out;
    for (int i = 0; i < k; ++i)
        out.peaks.push_back({fr.params(3 * i), std::exp(fr.params(3 * i + 1)), fr.params(3 * i + 2)});
    std::sort(out.peaks.begin(), out.peaks.end(),
              [](const Lorentzian& a, const Lorentzian& b) { return a.center < b.center; });
    out.offset = fit_offset ? fr.params(3 * k) : offset_guess;
    out.residual_norm = fr.residual_norm;
    return out;
}

double sampled_fwhm(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 3)
        throw NumericError("sampled_fwhm needs at least 3 matching samples");
    const auto peak = std::max_element(y.begin(), y.end());
    const std::size_t ip = std::size_t(peak - y.begin());
    const double base = *std::min_element(y.begin(), y.end());
    const double half = base + 0.5 * (*peak - base);
    if (!(*peak > base))
        throw NumericError("sampled_fwhm: flat line");

    std::size_t i = ip;
    while (i > 0 && y[i - 1] > half)
        --i;
    if (i == 0)
        throw NumericError("sampled_fwhm: line not resolved on the low side");
    const double left = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1]);
    std::size_t j = ip;
    while (j + 1 < y.size() && y[j + 1] > half)
        ++j;
    if (j + 1 == y.size())
        throw NumericError("sampled_fwhm: line not resolved on the high side");
    const double right = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j]);
    return right - left;
}

} // namespace phonon
