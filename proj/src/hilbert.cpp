#include "phonon/hilbert.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "phonon/errors.hpp"

namespace phonon {

SpaceLayout::SpaceLayout(std::vector<int> dims) : dims_(std::move(dims))
{
    if (dims_.empty())
        throw InvalidLayout("layout must have at least one subsystem");
    for (int d : dims_) {
        if (d < 2)
            throw InvalidDimension("subsystem dimension must be >= 2, got " + std::to_string(d));
        total_ *= d;
    }
}

int SpaceLayout::dim(std::size_t which) const
{
    if (which >= dims_.size())
        throw InvalidLayout("subsystem index " + std::to_string(which) + " out of range");
    return dims_[which];
}

Operator::Operator(SpaceLayout layout, Matrix matrix) : layout_(std::move(layout)), matrix_(std::move(matrix))
{
    if (matrix_.rows() != layout_.total() || matrix_.cols() != layout_.total())
        throw InvalidLayout("operator matrix is " + std::to_string(matrix_.rows()) + "x" +
                            std::to_string(matrix_.cols()) + " but layout total dimension is " +
                            std::to_string(layout_.total()));
}

Operator Operator::identity(const SpaceLayout& layout)
{
    return Operator(layout, Matrix::Identity(layout.total(), layout.total()));
}

Operator Operator::zero(const SpaceLayout& layout)
{
    return Operator(layout, Matrix::Zero(layout.total(), layout.total()));
}

Operator Operator::dagger() const { return Operator(layout_, matrix_.adjoint()); }

double Operator::hermiticity_error() const { return (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff(); }

Operator& Operator::operator+=(const Operator& rhs)
{
    if (!(layout_ == rhs.layout_))
        throw InvalidLayout("operator layouts differ");
    matrix_ += rhs.matrix_;
    return *this;
}

Operator& Operator::operator-=(const Operator& rhs)
{
    if (!(layout_ == rhs.layout_))
        throw InvalidLayout("operator layouts differ");
    matrix_ -= rhs.matrix_;
    return *this;
}

Operator& Operator::operator*=(cplx s)
{
    matrix_ *= s;
    return *this;
}

Operator operator*(const Operator& lhs, const Operator& rhs)
{
    if (!(lhs.layout_ == rhs.layout_))
        throw InvalidLayout("operator layouts differ");
    return Operator(lhs.layout_, lhs.matrix_ * rhs.matrix_);
}

DensityState DensityState::unchecked(const SpaceLayout& layout, Matrix rho)
{
    if (rho.rows() != layout.total() || rho.cols() != layout.total())
        throw InvalidLayout("density matrix does not match layout");
    return DensityState(layout, std::move(rho));
}

DensityState DensityState::from_matrix(const SpaceLayout& layout, Matrix rho)
{
    DensityState s = unchecked(layout, std::move(rho));
    const double herm = s.hermiticity_error();
    if (herm > hermiticity_tol)
        throw NumericError("density matrix not Hermitian (max deviation " + std::to_string(herm) + ")");
    const double tr = std::abs(s.trace() - 1.0);
    if (tr > trace_tol)
        throw NumericError("density matrix trace deviates from 1 by " + std::to_string(tr));
    const double lmin = s.min_eigenvalue();
    if (lmin < positivity_tol)
        throw NumericError("density matrix has negative eigenvalue " + std::to_string(lmin));
    return s;
}

DensityState DensityState::pure(const SpaceLayout& layout, const Vector& psi)
{
    if (psi.size() != layout.total())
        throw InvalidLayout("state vector does not match layout");
    const double norm = psi.norm();
    if (norm == 0.0)
        throw NumericError("zero state vector");
    const Vector v = psi / norm;
    return DensityState(layout, v * v.adjoint());
}

double DensityState::hermiticity_error() const { return (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff(); }

double DensityState::min_eigenvalue() const
{
    const Matrix h = 0.5 * (matrix_ + matrix_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Eigen::VectorXd DensityState::populations() const { return matrix_.diagonal().real(); }

Operator annihilation_op(int dim)
{
    if (dim < 2)
        throw InvalidDimension("annihilation_op requires dim >= 2, got " + std::to_string(dim));
    Matrix a = Matrix::Zero(dim, dim);
    for (int n = 1; n < dim; ++n)
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return Operator(SpaceLayout({dim}), std::move(a));
}

Operator creation_op(int dim) { return annihilation_op(dim).dagger(); }

Operator number_op(int dim)
{
    if (dim < 2)
        throw InvalidDimension("number_op requires dim >= 2, got " + std::to_string(dim));
    Matrix n = Matrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k)
        n(k, k) = static_cast<double>(k);
    return Operator(SpaceLayout({dim}), std::move(n));
}

Operator projector(int dim, int level)
{
    if (dim < 2)
        throw InvalidDimension("projector requires dim >= 2");
    if (level < 0 || level >= dim)
        throw InvalidDimension("projector level " + std::to_string(level) + " outside [0, dim)");
    Matrix p = Matrix::Zero(dim, dim);
    p(level, level) = 1.0;
    return Operator(SpaceLayout({dim}), std::move(p));
}

Matrix kron(const Matrix& a, const Matrix& b)
{
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Operator tensor_lift(const Operator& op, std::size_t which, const SpaceLayout& layout)
{
    if (which >= layout.subsystems())
        throw InvalidLayout("tensor_lift: subsystem index out of range");
    if (op.dim() != layout.dim(which))
        throw InvalidLayout("tensor_lift: operator dimension " + std::to_string(op.dim()) +
                            " does not match subsystem dimension " + std::to_string(layout.dim(which)));
    Matrix out = Matrix::Identity(1, 1);
    for (std::size_t k = 0; k < layout.subsystems(); ++k) {
        const Matrix factor = (k == which) ? op.matrix() : Matrix::Identity(layout.dim(k), layout.dim(k));
        out = kron(out, factor);
    }
    return Operator(layout, std::move(out));
}

DensityState tensor_product(const DensityState& a, const DensityState& b)
{
    std::vector<int> dims = a.layout().dims();
    dims.insert(dims.end(), b.layout().dims().begin(), b.layout().dims().end());
    return DensityState::unchecked(SpaceLayout(std::move(dims)), kron(a.matrix(), b.matrix()));
}

Vector basis_vector(const SpaceLayout& layout, const std::vector<int>& levels)
{
    if (levels.size() != layout.subsystems())
        throw InvalidLayout("basis_vector: need one level per subsystem");
    int index = 0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        if (levels[k] < 0 || levels[k] >= layout.dim(k))
            throw InvalidDimension("basis_vector: level out of range for subsystem " + std::to_string(k));
        index = index * layout.dim(k) + levels[k];
    }
    Vector v = Vector::Zero(layout.total());
    v(index) = 1.0;
    return v;
}

DensityState basis_state(const SpaceLayout& layout, const std::vector<int>& levels)
{
    return DensityState::pure(layout, basis_vector(layout, levels));
}

CoherentState coherent_state(int dim, cplx beta)
{
    if (dim < 2)
        throw InvalidDimension("coherent_state requires dim >= 2");
    // c_n = beta^n / sqrt(n!) built by recurrence; the e^{-|beta|^2/2} factor
    // is applied afterwards so that the truncated weight can be reported.
    Vector c(dim);
    c(0) = 1.0;
    for (int n = 1; n < dim; ++n)
        c(n) = c(n - 1) * beta / std::sqrt(static_cast<double>(n));
    const double nbar = std::norm(beta);
    const double kept = c.squaredNorm() * std::exp(-nbar);

    CoherentState out{DensityState::pure(SpaceLayout({dim}), c), c / c.norm(), false, 1.0 - kept};
    out.truncation_warning = nbar > dim / 4.0;
    return out;
}

cplx expectation(const DensityState& rho, const Operator& op)
{
    if (!(rho.layout() == op.layout()))
        throw InvalidLayout("expectation: layouts differ");
    // Tr(rho * op) without forming the product.
    return (rho.matrix().transpose().cwiseProduct(op.matrix())).sum();
}

DensityState partial_trace(const DensityState& rho, std::size_t keep)
{
    const SpaceLayout& layout = rho.layout();
    if (keep >= layout.subsystems())
        throw InvalidLayout("partial_trace: subsystem index out of range");

    int before = 1;
    for (std::size_t k = 0; k < keep; ++k)
        before *= layout.dim(k);
    const int d = layout.dim(keep);
    const int after = layout.total() / (before * d);

    Matrix out = Matrix::Zero(d, d);
    const Matrix& m = rho.matrix();
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            cplx acc = 0.0;
            for (int b = 0; b < before; ++b)
                for (int a = 0; a < after; ++a)
                    acc += m((b * d + i) * after + a, (b * d + j) * after + a);
            out(i, j) = acc;
        }
    return DensityState::unchecked(SpaceLayout({d}), std::move(out));
}

} // namespace phonon
