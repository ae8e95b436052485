#include <doctest.h>

#include <complex>

#include "qfg/linalg.hpp"
#include "qfg/rng.hpp"

using namespace qfg;

namespace {

CVector vec2(Complex a, Complex b) {
    CVector v(2);
    v << a, b;
    return v;
}

}  // namespace

TEST_CASE("expectation of Pauli operators") {
    CHECK(expectation(pauli_z(), vec2(1, 0)).real() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(expectation(pauli_z(), vec2(1, 1) / std::sqrt(2.0))) < 1e-14);

    // independent hand expansion of (v, Av)/(v, v) for v = (1, 0.3+0.4i), A = sigma_x:
    // Av = (0.3+0.4i, 1), (v,Av) = (0.3+0.4i) + conj(0.3+0.4i) = 0.6, (v,v) = 1.25
    const Complex got = expectation(pauli_x(), vec2(1.0, Complex(0.3, 0.4)));
    CHECK(got.real() == doctest::Approx(0.6 / 1.25).epsilon(1e-14));
    CHECK(std::abs(got.imag()) < 1e-15);
}

TEST_CASE("expectation rejects bad input") {
    CHECK_THROWS_AS(expectation(pauli_z(), vec2(0, 0)), DimensionError);
    CVector v3 = CVector::Zero(3);
    v3(0) = 1.0;
    CHECK_THROWS_AS(expectation(pauli_z(), v3), DimensionError);
}

TEST_CASE("expectation is scale invariant") {
    RandomStream rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        CVector v(3);
        for (int k = 0; k < 3; ++k) v(k) = Complex(rng.normal(), rng.normal());
        Matrix a = Matrix::Zero(3, 3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a(r, c) = Complex(rng.normal(), rng.normal());
        a = (a + Matrix(a.adjoint())).eval();  // Hermitian test operator
        const Complex c(rng.normal(), rng.normal());
        const Complex base = expectation(a, v);
        const Complex scaled = expectation(a, (c * v).eval());
        CHECK(std::abs(base - scaled) < 1e-12);
    }
}

TEST_CASE("projective chart round trip") {
    CHECK(to_projective(vec2(1, 0)).w(0) == Complex(0, 0));
    CHECK(to_projective(vec2(2, Complex(0, 2))).w(0) == Complex(0, 1));
    CHECK_THROWS_AS(to_projective(vec2(0, 1)), ChartError);

    RandomStream rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        CVector chi(4);
        for (int k = 0; k < 4; ++k) chi(k) = Complex(rng.normal(), rng.normal());
        if (std::abs(chi(0)) < 1e-3) chi(0) += 1.0;
        const ProjectiveState w = to_projective(chi);
        const ProjectiveState again = to_projective(from_projective(w));
        CHECK((again.w - w.w).cwiseAbs().maxCoeff() < 1e-12);
        // scale invariance of the chart map
        const Complex c(rng.normal(), rng.normal());
        const ProjectiveState ws = to_projective((c * chi).eval());
        CHECK((ws.w - w.w).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("gell_mann(2) gives the Pauli matrices") {
    const auto ls = gell_mann(2);
    REQUIRE(ls.size() == 3);
    CHECK((ls[0] - pauli_x()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((ls[1] - pauli_y()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((ls[2] - pauli_z()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gell_mann(3) matches the qutrit family") {
    const auto ls = gell_mann(3);
    REQUIRE(ls.size() == 8);

    // symmetric/antisymmetric generators act on basis vectors as expected
    CVector chi(3);
    chi << Complex(0.3, 0.1), Complex(-1.0, 0.4), Complex(0.2, -0.7);
    CVector s01 = ls[0] * chi;
    CHECK(s01(0) == chi(1));
    CHECK(s01(1) == chi(0));
    CHECK(s01(2) == Complex(0, 0));
    CVector a12 = ls[5] * chi;  // antisymmetric (1,2) generator
    const Complex i(0, 1);
    CHECK(std::abs(a12(0)) == 0.0);
    CHECK(std::abs(a12(1) - (-i) * chi(2)) < 1e-15);
    CHECK(std::abs(a12(2) - i * chi(1)) < 1e-15);

    // last diagonal generator is diag(1,1,-2)/sqrt(3)
    const Matrix& d2 = ls[7];
    const double s = 1.0 / std::sqrt(3.0);
    CHECK(d2(0, 0).real() == doctest::Approx(s).epsilon(1e-14));
    CHECK(d2(1, 1).real() == doctest::Approx(s).epsilon(1e-14));
    CHECK(d2(2, 2).real() == doctest::Approx(-2 * s).epsilon(1e-14));
    CHECK(trace_inner(d2, d2) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("gell_mann families are Hermitian, traceless and orthogonal") {
    for (int d = 2; d <= 6; ++d) {
        const auto ls = gell_mann(d);
        REQUIRE(static_cast<int>(ls.size()) == d * d - 1);
        for (std::size_t j = 0; j < ls.size(); ++j) {
            CHECK(is_hermitian(ls[j]));
            CHECK(is_traceless(ls[j]));
            for (std::size_t k = 0; k < ls.size(); ++k) {
                const double expected = (j == k) ? 2.0 : 0.0;
                CHECK(std::abs(trace_inner(ls[j], ls[k]) - expected) < 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(gell_mann(1), DimensionError);
    CHECK_THROWS_AS(gell_mann(17), DimensionError);
}

TEST_CASE("trace_inner on Pauli pairs") {
    CHECK(trace_inner(pauli_x(), pauli_x()) == doctest::Approx(2.0));
    CHECK(std::abs(trace_inner(pauli_x(), pauli_y())) < 1e-15);
    Matrix m3 = Matrix::Zero(3, 3);
    CHECK_THROWS_AS(trace_inner(pauli_x(), m3), DimensionError);
}

TEST_CASE("hermiticity predicates") {
    CHECK(is_hermitian(pauli_y()));
    CHECK_FALSE(is_anti_hermitian(pauli_y()));
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = Complex(0, 1);
    a(1, 0) = Complex(0, 1);
    CHECK(is_anti_hermitian(a));
    CHECK_FALSE(is_hermitian(a));
    CHECK(is_traceless(pauli_z()));
}
