#pragma once

// Dense operator algebra on tensor products of truncated Fock spaces.

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace phonon {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Ordered subsystem dimensions, e.g. {N_q, N_m} for transmon then mechanics.
class SpaceLayout {
public:
    explicit SpaceLayout(std::vector<int> dims);

    const std::vector<int>& dims() const noexcept { return dims_; }
    std::size_t subsystems() const noexcept { return dims_.size(); }
    int dim(std::size_t which) const;
    int total() const noexcept { return total_; }

    bool operator==(const SpaceLayout&) const = default;

private:
    std::vector<int> dims_;
    int total_ = 1;
};

class Operator {
public:
    Operator(SpaceLayout layout, Matrix matrix);

    static Operator identity(const SpaceLayout& layout);
    static Operator zero(const SpaceLayout& layout);

    const SpaceLayout& layout() const noexcept { return layout_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    int dim() const noexcept { return layout_.total(); }

    Operator dagger() const;
    /// Max abs entry of (A - A^dagger).
    double hermiticity_error() const;
    bool is_hermitian(double tol = 1e-12) const { return hermiticity_error() <= tol; }

    Operator& operator+=(const Operator& rhs);
    Operator& operator-=(const Operator& rhs);
    Operator& operator*=(cplx s);

    friend Operator operator+(Operator lhs, const Operator& rhs) { return lhs += rhs; }
    friend Operator operator-(Operator lhs, const Operator& rhs) { return lhs -= rhs; }
    friend Operator operator*(Operator lhs, cplx s) { return lhs *= s; }
    friend Operator operator*(cplx s, Operator rhs) { return rhs *= s; }
    friend Operator operator*(const Operator& lhs, const Operator& rhs);

private:
    SpaceLayout layout_;
    Matrix matrix_;
};

/// Density matrix. Construction through `from_matrix` enforces Hermiticity
/// (1e-10), unit trace (1e-8) and numerical positivity (-1e-8).
class DensityState {
public:
    static constexpr double hermiticity_tol = 1e-10;
    static constexpr double trace_tol = 1e-8;
    static constexpr double positivity_tol = -1e-8;

    static DensityState from_matrix(const SpaceLayout& layout, Matrix rho);
    /// Skips the eigenvalue check; used for intermediate integrator states.
    static DensityState unchecked(const SpaceLayout& layout, Matrix rho);
    static DensityState pure(const SpaceLayout& layout, const Vector& psi);

    const SpaceLayout& layout() const noexcept { return layout_; }
    const Matrix& matrix() const noexcept { return matrix_; }

    cplx trace() const { return matrix_.trace(); }
    double hermiticity_error() const;
    double min_eigenvalue() const;
    /// Diagonal of the density matrix (real part).
    Eigen::VectorXd populations() const;

private:
    DensityState(SpaceLayout layout, Matrix rho) : layout_(std::move(layout)), matrix_(std::move(rho)) {}

    SpaceLayout layout_;
    Matrix matrix_;
};

/// Lowering operator on a single truncated mode: A(n-1, n) = sqrt(n).
Operator annihilation_op(int dim);
Operator creation_op(int dim);
Operator number_op(int dim);
/// |level><level| on a single mode.
Operator projector(int dim, int level);

/// Embed a single-subsystem operator at position `which` of `layout`.
Operator tensor_lift(const Operator& op, std::size_t which, const SpaceLayout& layout);

/// Kronecker product of two matrices (first factor is the slow index).
Matrix kron(const Matrix& a, const Matrix& b);

DensityState tensor_product(const DensityState& a, const DensityState& b);

/// Product Fock state |levels[0], levels[1], ...>.
Vector basis_vector(const SpaceLayout& layout, const std::vector<int>& levels);
DensityState basis_state(const SpaceLayout& layout, const std::vector<int>& levels);

struct CoherentState {
    DensityState state;
    Vector amplitudes;
    /// Set when |beta|^2 > dim/4: the truncated series is likely inaccurate.
    bool truncation_warning = false;
    /// Norm of the infinite series lost to truncation, before renormalization.
    double truncated_weight = 0.0;
};

CoherentState coherent_state(int dim, cplx beta);

cplx expectation(const DensityState& rho, const Operator& op);

/// Reduced state on subsystem `keep`.
DensityState partial_trace(const DensityState& rho, std::size_t keep);

} // namespace phonon
