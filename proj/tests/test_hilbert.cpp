#include <cmath>
#include <random>

#include <doctest.h>

#include "phonon/errors.hpp"
#include "phonon/hilbert.hpp"

using namespace phonon;

namespace {

Matrix random_density(int dim, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            g(i, j) = cplx(nd(rng), nd(rng));
    Matrix rho = g * g.adjoint();
    return rho / rho.trace();
}

} // namespace

TEST_SUITE("hilbert")
{
    TEST_CASE("lowering operator moves one quantum down")
    {
        const Operator a = annihilation_op(2);
        const SpaceLayout l({2});
        const Vector out = a.matrix() * basis_vector(l, {1});
        CHECK(std::abs(out(0) - cplx(1.0)) < 1e-15);
        CHECK(std::abs(out(1)) < 1e-15);
    }

    TEST_CASE("truncated commutator is identity except the top level")
    {
        const Operator a = annihilation_op(4);
        const Matrix c = (a * a.dagger() - a.dagger() * a).matrix();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                const double expected = i != j ? 0.0 : (i == 3 ? -3.0 : 1.0);
                CHECK(std::abs(c(i, j) - expected) < 1e-14);
            }
    }

    TEST_CASE("number operator spectrum")
    {
        const Operator n = number_op(10);
        const SpaceLayout l({10});
        for (int k = 0; k < 10; ++k)
            CHECK(expectation(basis_state(l, {k}), n).real() == doctest::Approx(k).epsilon(1e-14));
    }

    TEST_CASE("invalid dimensions are rejected")
    {
        CHECK_THROWS_AS(annihilation_op(0), InvalidDimension);
        CHECK_THROWS_AS(SpaceLayout({3, 0}), InvalidDimension);
    }

    TEST_CASE("tensor lift")
    {
        const SpaceLayout l({3, 5});
        const Operator id = tensor_lift(Operator::identity(SpaceLayout({3})), 0, l);
        CHECK((id.matrix() - Matrix::Identity(15, 15)).cwiseAbs().maxCoeff() < 1e-15);

        const Operator a = tensor_lift(annihilation_op(3), 0, l);
        const Operator b = tensor_lift(annihilation_op(5), 1, l);
        CHECK((a * b - b * a).matrix().cwiseAbs().maxCoeff() == 0.0);

        const Vector g0 = basis_vector(l, {0, 0});
        const Vector g1 = basis_vector(l, {0, 1});
        CHECK(std::abs(g1.dot(b.matrix() * g0)) == 0.0);
        CHECK(std::abs(g0.dot(b.matrix() * g1) - cplx(1.0)) < 1e-15);

        CHECK_THROWS_AS(tensor_lift(annihilation_op(4), 0, l), InvalidLayout);
        CHECK_THROWS_AS(tensor_lift(annihilation_op(3), 2, l), InvalidLayout);
    }

    TEST_CASE("coherent state populations are Poisson")
    {
        const CoherentState vac = coherent_state(20, 0.0);
        CHECK(expectation(vac.state, number_op(20)).real() == doctest::Approx(0.0));

        const CoherentState cs = coherent_state(20, 1.0);
        CHECK(std::abs(expectation(cs.state, number_op(20)).real() - 1.0) < 1e-6);
        const Eigen::VectorXd p = cs.state.populations();
        double fact = 1.0;
        for (int n = 0; n < 20; ++n) {
            if (n > 0)
                fact *= n;
            CHECK(std::abs(p(n) - std::exp(-1.0) / fact) < 1e-6);
        }
        CHECK(p(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
        CHECK_FALSE(cs.truncation_warning);
        CHECK(coherent_state(8, 2.0).truncation_warning);
    }

    TEST_CASE("expectation values on basis states")
    {
        const SpaceLayout l({3, 6});
        const Operator nq = tensor_lift(number_op(3), 0, l);
        const Operator pe = tensor_lift(projector(3, 1), 0, l);
        CHECK(expectation(basis_state(l, {0, 0}), nq).real() == 0.0);
        CHECK(expectation(basis_state(l, {1, 0}), pe).real() == doctest::Approx(1.0));

        const DensityState joint = tensor_product(basis_state(SpaceLayout({3}), {0}), coherent_state(20, 1.0).state);
        const Operator nm = tensor_lift(number_op(20), 1, joint.layout());
        CHECK(std::abs(expectation(joint, nm).real() - 1.0) < 1e-6);
    }

    TEST_CASE("partial trace")
    {
        const SpaceLayout q({2}), m({3});
        const DensityState a = DensityState::from_matrix(q, random_density(2, 1));
        const DensityState b = DensityState::from_matrix(m, random_density(3, 2));
        const DensityState ab = tensor_product(a, b);
        CHECK((partial_trace(ab, 0).matrix() - a.matrix()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK((partial_trace(ab, 1).matrix() - b.matrix()).cwiseAbs().maxCoeff() < 1e-14);

        const SpaceLayout l({2, 2});
        const Vector bell = (basis_vector(l, {0, 0}) + basis_vector(l, {1, 1})) / std::sqrt(2.0);
        const DensityState rq = partial_trace(DensityState::pure(l, bell), 0);
        CHECK((rq.matrix() - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const SpaceLayout big({3, 4});
            const DensityState rho = DensityState::from_matrix(big, random_density(12, seed));
            CHECK(std::abs(partial_trace(rho, 0).trace() - cplx(1.0)) < 1e-12);
            CHECK(std::abs(partial_trace(rho, 1).trace() - cplx(1.0)) < 1e-12);
        }
    }

    TEST_CASE("density state validation")
    {
        const SpaceLayout l({2});
        Matrix bad = Matrix::Zero(2, 2);
        bad(0, 0) = 0.5;
        CHECK_THROWS_AS(DensityState::from_matrix(l, bad), NumericError);
        Matrix neg = Matrix::Zero(2, 2);
        neg(0, 0) = 1.5;
        neg(1, 1) = -0.5;
        CHECK_THROWS_AS(DensityState::from_matrix(l, neg), NumericError);
        Matrix nonh = 0.5 * Matrix::Identity(2, 2);
        nonh(0, 1) = 0.1;
        CHECK_THROWS_AS(DensityState::from_matrix(l, nonh), NumericError);
    }
}
