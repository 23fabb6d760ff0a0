#include "phonon/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "phonon/errors.hpp"

namespace phonon {

namespace {

// Row-major density matrix with split real/imaginary storage, so the inner
// loops of the kernel vectorize over a contiguous row.
struct SplitMatrix {
    int d = 0;
    std::vector<double> re, im;

    explicit SplitMatrix(int dim = 0) : d(dim), re(std::size_t(dim) * dim), im(std::size_t(dim) * dim) {}

    void zero()
    {
        std::fill(re.begin(), re.end(), 0.0);
        std::fill(im.begin(), im.end(), 0.0);
    }
};

SplitMatrix to_split(const Matrix& m)
{
    SplitMatrix s(int(m.rows()));
    for (int i = 0; i < s.d; ++i)
        for (int j = 0; j < s.d; ++j) {
            s.re[std::size_t(i) * s.d + j] = m(i, j).real();
            s.im[std::size_t(i) * s.d + j] = m(i, j).imag();
        }
    return s;
}

Matrix from_split(const SplitMatrix& s)
{
    Matrix m(s.d, s.d);
    for (int i = 0; i < s.d; ++i)
        for (int j = 0; j < s.d; ++j)
            m(i, j) = cplx(s.re[std::size_t(i) * s.d + j], s.im[std::size_t(i) * s.d + j]);
    return m;
}

struct Csr {
    int n = 0;
    std::vector<int> row_ptr, col;
    std::vector<cplx> val;
    bool diagonal = true;

    explicit Csr(const Matrix& m) : n(int(m.rows()))
    {
        row_ptr.push_back(0);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c)
                if (m(r, c) != cplx(0.0)) {
                    col.push_back(c);
                    val.push_back(m(r, c));
                    diagonal = diagonal && r == c;
                }
            row_ptr.push_back(int(col.size()));
        }
    }
};

// Plain complex product; std::complex multiplication carries NaN-recovery
// branches that dominate the cost in the kernel.
inline cplx cmul(cplx a, cplx b)
{
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// Y += s * A * X.
void accumulate_product(const Csr& a, cplx s, const SplitMatrix& x, SplitMatrix& y)
{
    const int d = x.d;
    for (int r = 0; r < a.n; ++r) {
        double* __restrict yr = &y.re[std::size_t(r) * d];
        double* __restrict yi = &y.im[std::size_t(r) * d];
        for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            const cplx c = cmul(s, a.val[k]);
            const double cr = c.real(), ci = c.imag();
            const double* __restrict xr = &x.re[std::size_t(a.col[k]) * d];
            const double* __restrict xi = &x.im[std::size_t(a.col[k]) * d];
            for (int j = 0; j < d; ++j) {
                yr[j] += cr * xr[j] - ci * xi[j];
                yi[j] += cr * xi[j] + ci * xr[j];
            }
        }
    }
}

void adjoint_into(const SplitMatrix& x, SplitMatrix& out)
{
    const int d = x.d;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            out.re[std::size_t(j) * d + i] = x.re[std::size_t(i) * d + j];
            out.im[std::size_t(j) * d + i] = -x.im[std::size_t(i) * d + j];
        }
}

// Real matrix with at most one entry per row and per column, such as a lifted
// lowering operator: row rows[k] holds w[k] in column src[k].
struct Shift {
    std::vector<int> rows, src;
    std::vector<double> w;
};

std::optional<Shift> weighted_shift(const Csr& a)
{
    Shift s;
    std::vector<bool> used(std::size_t(a.n), false);
    for (int r = 0; r < a.n; ++r) {
        const int nnz = a.row_ptr[r + 1] - a.row_ptr[r];
        if (nnz == 0)
            continue;
        const int k = a.row_ptr[r];
        if (nnz > 1 || a.val[k].imag() != 0.0 || used[std::size_t(a.col[k])])
            return std::nullopt;
        used[std::size_t(a.col[k])] = true;
        s.rows.push_back(r);
        s.src.push_back(a.col[k]);
        s.w.push_back(a.val[k].real());
    }
    return s;
}

// Writes drho/dt for Hermitian rho as Z + Z^dagger with
//   Z = -i H_eff rho + 1/2 sum rate J rho J^dagger,  H_eff = H - i/2 sum rate J^dagger J.
// The output is Hermitian by construction.
class CompiledLindblad {
public:
    explicit CompiledLindblad(const LindbladModel& model) : d_(model.h_static.dim()), work_(d_), scratch_(d_), z_(d_)
    {
        Matrix heff = model.h_static.matrix();
        for (const CollapseTerm& c : model.collapses) {
            if (c.rate == 0.0)
                continue;
            const Matrix& j = c.op.matrix();
            heff -= cplx(0.0, 0.5 * c.rate) * (j.adjoint() * j);
            Jump jump{Csr(j), c.rate, {}, std::nullopt};
            // Real diagonal jumps (dephasing) take an elementwise path.
            if (jump.csr.diagonal && j.diagonal().imag().isZero(0.0)) {
                jump.diag.resize(d_);
                for (int i = 0; i < d_; ++i)
                    jump.diag[i] = j(i, i).real();
            } else {
                jump.shift = weighted_shift(jump.csr);
            }
            jumps_.push_back(std::move(jump));
        }
        minus_i_heff_.emplace(Matrix(cplx(0.0, -1.0) * heff));
        for (const DrivePair& p : model.drives)
            drives_.push_back({Csr(p.op.matrix()), Csr(p.op.matrix().adjoint()), p.coeff});
    }

    int dim() const { return d_; }

    void operator()(double t, const SplitMatrix& rho, SplitMatrix& out)
    {
        z_.zero();
        accumulate_product(*minus_i_heff_, 1.0, rho, z_);
        for (const Drive& drv : drives_) {
            const cplx c = drv.coeff(t);
            if (c == cplx(0.0))
                continue;
            accumulate_product(drv.op, cplx(c.imag(), -c.real()), rho, z_);
            accumulate_product(drv.op_dag, cplx(-c.imag(), -c.real()), rho, z_);
        }
        for (const Jump& jump : jumps_) {
            const double half = 0.5 * jump.rate;
            if (!jump.diag.empty()) {
                // J rho J^dagger elementwise for real diagonal J.
                const double* __restrict w = jump.diag.data();
                for (int i = 0; i < d_; ++i) {
                    double* __restrict zr = &z_.re[std::size_t(i) * d_];
                    double* __restrict zi = &z_.im[std::size_t(i) * d_];
                    const double* __restrict rr = &rho.re[std::size_t(i) * d_];
                    const double* __restrict ri = &rho.im[std::size_t(i) * d_];
                    const double wi = half * w[i];
                    for (int j = 0; j < d_; ++j) {
                        zr[j] += wi * w[j] * rr[j];
                        zi[j] += wi * w[j] * ri[j];
                    }
                }
            } else if (jump.shift) {
                // (J rho J^dagger)_ij = w_i w_j rho(src_i, src_j).
                const Shift& sh = *jump.shift;
                const std::size_t m = sh.rows.size();
                for (std::size_t a = 0; a < m; ++a) {
                    double* __restrict zr = &z_.re[std::size_t(sh.rows[a]) * d_];
                    double* __restrict zi = &z_.im[std::size_t(sh.rows[a]) * d_];
                    const double* __restrict rr = &rho.re[std::size_t(sh.src[a]) * d_];
                    const double* __restrict ri = &rho.im[std::size_t(sh.src[a]) * d_];
                    const double wa = half * sh.w[a];
                    for (std::size_t b = 0; b < m; ++b) {
                        const double f = wa * sh.w[b];
                        zr[sh.rows[b]] += f * rr[sh.src[b]];
                        zi[sh.rows[b]] += f * ri[sh.src[b]];
                    }
                }
            } else {
                // J rho J^dagger = J (J rho)^dagger for Hermitian rho.
                work_.zero();
                accumulate_product(jump.csr, 1.0, rho, work_);
                adjoint_into(work_, scratch_);
                accumulate_product(jump.csr, half, scratch_, z_);
            }
        }
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) {
                const std::size_t ij = std::size_t(i) * d_ + j, ji = std::size_t(j) * d_ + i;
                out.re[ij] = z_.re[ij] + z_.re[ji];
                out.im[ij] = z_.im[ij] - z_.im[ji];
            }
    }

private:
    struct Jump {
        Csr csr;
        double rate;
        std::vector<double> diag;
        std::optional<Shift> shift;
    };
    struct Drive {
        Csr op, op_dag;
        std::function<cplx(double)> coeff;
    };

    int d_;
    std::optional<Csr> minus_i_heff_;
    std::vector<Jump> jumps_;
    std::vector<Drive> drives_;
    SplitMatrix work_, scratch_, z_;
};

// y = x + a * k
void axpy_into(const SplitMatrix& x, double a, const SplitMatrix& k, SplitMatrix& y)
{
    const std::size_t n = x.re.size();
    for (std::size_t i = 0; i < n; ++i) {
        y.re[i] = x.re[i] + a * k.re[i];
        y.im[i] = x.im[i] + a * k.im[i];
    }
}

double split_trace(const SplitMatrix& s)
{
    double tr = 0.0;
    for (int i = 0; i < s.d; ++i)
        tr += s.re[std::size_t(i) * s.d + i];
    return tr;
}

bool split_finite(const SplitMatrix& s)
{
    for (std::size_t i = 0; i < s.re.size(); ++i)
        if (!std::isfinite(s.re[i]) || !std::isfinite(s.im[i]))
            return false;
    return true;
}

double split_hermiticity_error(const SplitMatrix& s)
{
    double worst = 0.0;
    for (int i = 0; i < s.d; ++i)
        for (int j = i; j < s.d; ++j) {
            const std::size_t ij = std::size_t(i) * s.d + j, ji = std::size_t(j) * s.d + i;
            worst = std::max(worst, std::hypot(s.re[ij] - s.re[ji], s.im[ij] + s.im[ji]));
        }
    return worst;
}

// Re Tr(rho O) for a compiled observable.
double split_expectation(const Csr& o, const SplitMatrix& rho)
{
    double acc = 0.0;
    for (int r = 0; r < o.n; ++r)
        for (int k = o.row_ptr[r]; k < o.row_ptr[r + 1]; ++k) {
            const std::size_t idx = std::size_t(o.col[k]) * rho.d + r; // rho(c, r)
            acc += o.val[k].real() * rho.re[idx] - o.val[k].imag() * rho.im[idx];
        }
    return acc;
}

// Largest |E_i - E_j| the integrator has to resolve, including drive bounds.
double spectral_span(const LindbladModel& model, double t0, double t1)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(model.h_static.matrix(), Eigen::EigenvaluesOnly);
    double span = es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff();
    for (const DrivePair& p : model.drives) {
        double cmax = 0.0;
        constexpr int probes = 256;
        for (int k = 0; k <= probes; ++k)
            cmax = std::max(cmax, std::abs(p.coeff(t0 + (t1 - t0) * k / probes)));
        Eigen::JacobiSVD<Matrix> svd(p.op.matrix());
        span += 4.0 * cmax * svd.singularValues()(0);
    }
    return span;
}

class Recorder {
public:
    Recorder(const std::vector<Observable>& observables, const SampleSpec& sampling, Trajectory& traj,
             const SpaceLayout& layout, double trace0)
        : sampling_(sampling), traj_(traj), layout_(layout), trace0_(trace0)
    {
        for (const Observable& o : observables) {
            compiled_.emplace_back(o.op.matrix());
            names_.push_back(o.name);
            traj_.observables[o.name];
        }
    }

    void record(double t, const SplitMatrix& rho)
    {
        if (!split_finite(rho))
            throw DivergenceError("non-finite density matrix at t = " + std::to_string(t) + " us");
        const double drift = std::abs(split_trace(rho) - trace0_);
        traj_.max_trace_drift = std::max(traj_.max_trace_drift, drift);
        if (drift > trace_drift_limit)
            throw DivergenceError("trace drifted by " + std::to_string(drift) + " at t = " + std::to_string(t) +
                                  " us (limit 1e-8)");
        traj_.max_hermiticity_error = std::max(traj_.max_hermiticity_error, split_hermiticity_error(rho));
        traj_.times.push_back(t);
        for (std::size_t k = 0; k < compiled_.size(); ++k)
            traj_.observables[names_[k]].push_back(split_expectation(compiled_[k], rho));
        for (double tc : sampling_.checkpoints)
            if (tc == t)
                traj_.checkpoints.push_back(DensityState::unchecked(layout_, from_split(rho)));
    }

private:
    const SampleSpec& sampling_;
    Trajectory& traj_;
    const SpaceLayout& layout_;
    double trace0_;
    std::vector<Csr> compiled_;
    std::vector<std::string> names_;
};

std::vector<double> sample_grid(double t0, double t1, const SampleSpec& sampling)
{
    std::vector<double> grid{t0, t1};
    for (double t : sampling.times) {
        if (t < t0 || t > t1)
            throw NumericError("sample time " + std::to_string(t) + " outside the integration span");
        grid.push_back(t);
    }
    for (double t : sampling.checkpoints) {
        if (t < t0 || t > t1)
            throw NumericError("checkpoint time " + std::to_string(t) + " outside the integration span");
        grid.push_back(t);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

void integrate_rk4(CompiledLindblad& f, SplitMatrix& y, const std::vector<double>& grid, double dt,
                   Recorder& rec, Trajectory& traj)
{
    const int d = f.dim();
    SplitMatrix k1(d), k2(d), k3(d), k4(d), tmp(d);
    rec.record(grid.front(), y);
    for (std::size_t s = 1; s < grid.size(); ++s) {
        const double a = grid[s - 1], b = grid[s];
        const long n = std::max<long>(1, long(std::ceil((b - a) / dt - 1e-9)));
        const double h = (b - a) / double(n);
        for (long step = 0; step < n; ++step) {
            const double t = a + double(step) * h;
            f(t, y, k1);
            axpy_into(y, 0.5 * h, k1, tmp);
            f(t + 0.5 * h, tmp, k2);
            axpy_into(y, 0.5 * h, k2, tmp);
            f(t + 0.5 * h, tmp, k3);
            axpy_into(y, h, k3, tmp);
            f(t + h, tmp, k4);
            const std::size_t m = y.re.size();
            const double w = h / 6.0;
            for (std::size_t i = 0; i < m; ++i) {
                y.re[i] += w * (k1.re[i] + 2.0 * (k2.re[i] + k3.re[i]) + k4.re[i]);
                y.im[i] += w * (k1.im[i] + 2.0 * (k2.im[i] + k3.im[i]) + k4.im[i]);
            }
        }
        traj.steps += n;
        rec.record(b, y);
    }
}

// Dormand-Prince 5(4) with standard step-size control.
void integrate_rk45(CompiledLindblad& f, SplitMatrix& y, const std::vector<double>& grid,
                    const IntegratorConfig& cfg, Recorder& rec, Trajectory& traj)
{
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    // Differences between the fifth- and fourth-order weights.
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    const int d = f.dim();
    const std::size_t m = y.re.size();
    SplitMatrix k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), tmp(d), ynew(d);

    auto combine = [&](std::initializer_list<std::pair<double, const SplitMatrix*>> terms, double h) {
        for (std::size_t i = 0; i < m; ++i) {
            double r = y.re[i], im = y.im[i];
            for (const auto& [c, k] : terms) {
                r += h * c * k->re[i];
                im += h * c * k->im[i];
            }
            tmp.re[i] = r;
            tmp.im[i] = im;
        }
    };

    double h = cfg.dt > 0.0 ? cfg.dt : 1e-4;
    rec.record(grid.front(), y);
    f(grid.front(), y, k1);
    for (std::size_t s = 1; s < grid.size(); ++s) {
        double t = grid[s - 1];
        const double target = grid[s];
        while (t < target) {
            if (cfg.max_step > 0.0)
                h = std::min(h, cfg.max_step);
            const bool last = t + h >= target;
            const double step = last ? target - t : h;
            if (step < cfg.min_step && !last)
                throw DivergenceError("adaptive step underflow: h = " + std::to_string(step) + " us at t = " +
                                      std::to_string(t) + " us (min_step " + std::to_string(cfg.min_step) + ")");
            combine({{a21, &k1}}, step);
            f(t + c2 * step, tmp, k2);
            combine({{a31, &k1}, {a32, &k2}}, step);
            f(t + c3 * step, tmp, k3);
            combine({{a41, &k1}, {a42, &k2}, {a43, &k3}}, step);
            f(t + c4 * step, tmp, k4);
            combine({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, step);
            f(t + c5 * step, tmp, k5);
            combine({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, step);
            f(t + step, tmp, k6);
            combine({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}}, step);
            ynew = tmp;
            f(t + step, ynew, k7);

            double err = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double er = step * (e1 * k1.re[i] + e3 * k3.re[i] + e4 * k4.re[i] + e5 * k5.re[i] +
                                          e6 * k6.re[i] + e7 * k7.re[i]);
                const double ei = step * (e1 * k1.im[i] + e3 * k3.im[i] + e4 * k4.im[i] + e5 * k5.im[i] +
                                          e6 * k6.im[i] + e7 * k7.im[i]);
                const double scale =
                    cfg.abs_tolerance + cfg.tolerance * std::max(std::hypot(y.re[i], y.im[i]),
                                                                 std::hypot(ynew.re[i], ynew.im[i]));
                err = std::max(err, std::hypot(er, ei) / scale);
            }
            if (!std::isfinite(err))
                throw DivergenceError("non-finite error estimate at t = " + std::to_string(t) + " us");
            if (err <= 1.0) {
                t = last ? target : t + step;
                y = ynew;
                k1 = k7;
                ++traj.steps;
            } else if (step < cfg.min_step) {
                throw DivergenceError("adaptive step underflow: h = " + std::to_string(step) + " us at t = " +
                                      std::to_string(t) + " us, error ratio " + std::to_string(err));
            }
            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (!(last && err <= 1.0))
                h = step * factor;
        }
        rec.record(target, y);
    }
    traj.dt_used = h;
}

} // namespace

void LindbladModel::validate() const
{
    if (!h_static.is_hermitian(1e-9 * std::max(1.0, h_static.matrix().cwiseAbs().maxCoeff())))
        throw NumericError("static Hamiltonian is not Hermitian");
    for (const DrivePair& p : drives) {
        if (!(p.op.layout() == h_static.layout()))
            throw InvalidLayout("drive operator layout differs from the Hamiltonian");
        if (!p.coeff)
            throw NumericError("drive coefficient function is empty");
    }
    for (const CollapseTerm& c : collapses) {
        if (!(c.op.layout() == h_static.layout()))
            throw InvalidLayout("collapse operator layout differs from the Hamiltonian");
        if (!(c.rate >= 0.0) || !std::isfinite(c.rate))
            throw NumericError("collapse rate must be non-negative, got " + std::to_string(c.rate));
    }
}

Operator LindbladModel::hamiltonian(double t) const
{
    Operator h = h_static;
    for (const DrivePair& p : drives) {
        const cplx c = p.coeff(t);
        h += c * p.op;
        h += std::conj(c) * p.op.dagger();
    }
    return h;
}

Matrix lindblad_rhs(const LindbladModel& model, const Matrix& rho, double t)
{
    const Matrix h = model.hamiltonian(t).matrix();
    const cplx i(0.0, 1.0);
    Matrix out = i * (rho * h - h * rho);
    for (const CollapseTerm& c : model.collapses) {
        const Matrix& a = c.op.matrix();
        const Matrix ada = a.adjoint() * a;
        out += c.rate * (a * rho * a.adjoint() - 0.5 * ada * rho - 0.5 * rho * ada);
    }
    return out;
}

Matrix sparse_lindblad_rhs(const LindbladModel& model, const Matrix& rho, double t)
{
    model.validate();
    CompiledLindblad f(model);
    SplitMatrix out(f.dim());
    f(t, to_split(rho), out);
    return from_split(out);
}

void IntegratorConfig::validate() const
{
    if (method == IntegratorMethod::rk4 && !(dt > 0.0))
        throw ConfigError("integrator dt must be positive");
    if (method == IntegratorMethod::rk45 && !(tolerance > 0.0 && tolerance <= 1e-3))
        throw ConfigError("integrator tolerance must lie in (0, 1e-3]");
    if (!(stability_limit > 0.0))
        throw ConfigError("integrator stability_limit must be positive");
}

double default_time_step(double f_max_mhz, double tau_env_us)
{
    if (!(f_max_mhz > 0.0) || !(tau_env_us > 0.0))
        throw NumericError("default_time_step requires positive frequency scale and envelope length");
    return std::min(1.0 / (100.0 * f_max_mhz), tau_env_us / 200.0);
}

const std::vector<double>& Trajectory::series(const std::string& name) const
{
    const auto it = observables.find(name);
    if (it == observables.end())
        throw NumericError("trajectory has no observable named '" + name + "'");
    return it->second;
}

SampleSpec SampleSpec::uniform(double t0, double t1, int intervals)
{
    if (intervals < 1)
        throw NumericError("uniform sampling needs at least one interval");
    SampleSpec s;
    for (int k = 0; k <= intervals; ++k)
        s.times.push_back(k == intervals ? t1 : t0 + (t1 - t0) * k / intervals);
    return s;
}

Trajectory evolve(const LindbladModel& model, const DensityState& rho0, double t0, double t1,
                  const IntegratorConfig& config, const std::vector<Observable>& observables,
                  const SampleSpec& sampling)
{
    model.validate();
    config.validate();
    if (!(rho0.layout() == model.h_static.layout()))
        throw InvalidLayout("initial state layout differs from the model");
    if (!(t1 > t0))
        throw NumericError("evolve requires t1 > t0");
    for (const Observable& o : observables)
        if (!(o.op.layout() == model.h_static.layout()))
            throw InvalidLayout("observable '" + o.name + "' layout differs from the model");

    Trajectory traj;
    const std::vector<double> grid = sample_grid(t0, t1, sampling);
    SplitMatrix y = to_split(rho0.matrix());
    Recorder rec(observables, sampling, traj, rho0.layout(), split_trace(y));
    CompiledLindblad f(model);

    if (config.method == IntegratorMethod::rk4) {
        double dt = config.dt;
        const double span = spectral_span(model, t0, t1);
        if (span * dt > config.stability_limit)
            dt = config.stability_limit / span;
        traj.dt_used = dt;
        integrate_rk4(f, y, grid, dt, rec, traj);
    } else {
        integrate_rk45(f, y, grid, config, rec, traj);
    }
    traj.final_state = DensityState::unchecked(rho0.layout(), from_split(y));
    return traj;
}

double time_averaged_population(const Trajectory& traj, const std::string& name, double window_start,
                                double window_len)
{
    const std::vector<double>& v = traj.series(name);
    const std::vector<double>& t = traj.times;
    const double a = window_start, b = window_start + window_len;
    if (t.size() < 2 || !(window_len > 0.0))
        throw NumericError("time_averaged_population: empty window or trajectory");
    const double slack = 1e-12 * std::max(1.0, std::abs(b));
    if (a < t.front() - slack || b > t.back() + slack)
        throw NumericError("time_averaged_population: window [" + std::to_string(a) + ", " + std::to_string(b) +
                           "] outside trajectory span");

    auto value_at = [&](double x) {
        auto it = std::upper_bound(t.begin(), t.end(), x);
        if (it == t.begin())
            return v.front();
        if (it == t.end())
            return v.back();
        const std::size_t k = std::size_t(it - t.begin());
        const double w = (x - t[k - 1]) / (t[k] - t[k - 1]);
        return (1.0 - w) * v[k - 1] + w * v[k];
    };

    double area = 0.0;
    double prev_t = a, prev_v = value_at(a);
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] <= a || t[k] >= b)
            continue;
        area += 0.5 * (prev_v + v[k]) * (t[k] - prev_t);
        prev_t = t[k];
        prev_v = v[k];
    }
    area += 0.5 * (prev_v + value_at(b)) * (b - prev_t);
    return area / window_len;
}

} // namespace phonon
