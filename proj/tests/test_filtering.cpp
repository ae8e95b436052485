#include <doctest.h>

#include <cmath>

#include "qfg/filtering.hpp"
#include "qfg/rng.hpp"

using namespace qfg;

namespace {

CVector chart1(Complex w) {
    CVector v(1);
    v << w;
    return v;
}

RVector incs3(double a, double b, double c) {
    RVector v(3);
    v << a, b, c;
    return v;
}

Matrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

}  // namespace

TEST_CASE("linear chi step: damping and unitary parts") {
    auto single_z = custom_scheme({pauli_z()});
    CVector chi(2);
    chi << 1.0, 0.0;
    const double dt = 1e-3;
    RVector dy(1);
    dy << 0.0;
    // sigma_z^2 = 1 so the drift is -chi/2
    CVector next = step_linear_chi(chi, Matrix::Zero(2, 2), single_z, dy, dt);
    CHECK(std::abs(next(0) - Complex(1.0 - dt / 2)) < 1e-15);
    CHECK(std::abs(next(1)) == 0.0);

    // no couplings: plain Schroedinger Euler step
    auto empty = custom_scheme(std::vector<Matrix>{}, {});
    CVector psi(2);
    psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    CVector evolved = step_linear_chi(psi, pauli_z(), empty, RVector(0), dt);
    const Complex i(0, 1);
    CHECK(std::abs(evolved(0) - psi(0) * (1.0 - i * dt)) < 1e-15);
    CHECK(std::abs(evolved(1) - psi(1) * (1.0 + i * dt)) < 1e-15);
}

TEST_CASE("projective step reads the Pauli noise rows at the origin") {
    auto scheme = pauli_scheme();
    const Matrix h0 = Matrix::Zero(2, 2);
    const double dt = 1e-4, eps = 1e-2;
    auto at_origin = [&](RVector dy) {
        return step_projective(ProjectiveState{chart1(0.0)}, h0, scheme, dy, dt).w(0);
    };
    CHECK(std::abs(at_origin(incs3(eps, 0, 0)) - Complex(eps, 0)) < 1e-14);
    CHECK(std::abs(at_origin(incs3(0, eps, 0)) - Complex(0, eps)) < 1e-14);
    CHECK(std::abs(at_origin(incs3(0, 0, eps)) - Complex(0, 0)) < 1e-14);
}

TEST_CASE("pauli fast path matches the generic stepper") {
    auto scheme = pauli_scheme();
    RandomStream rng(21);
    for (int rep = 0; rep < 25; ++rep) {
        const Complex w(rng.normal(), rng.normal());
        Matrix h = rng.normal() * pauli_x() + rng.normal() * pauli_y() +
                   rng.normal() * pauli_z() + rng.normal() * Matrix::Identity(2, 2);
        const std::array<double, 3> dy = {0.03 * rng.normal(), 0.03 * rng.normal(),
                                          0.03 * rng.normal()};
        const double dt = 1e-3;
        const Complex fast = step_pauli_qubit(w, h, dy, dt);
        const Complex generic =
            step_projective(ProjectiveState{chart1(w)}, h, scheme, incs3(dy[0], dy[1], dy[2]), dt)
                .w(0);
        CHECK(std::abs(fast - generic) < 1e-14);
    }
}

TEST_CASE("pauli fast path examples") {
    const Matrix h0 = Matrix::Zero(2, 2);
    const double dt = 1e-3, eps = 0.05;
    CHECK(std::abs(step_pauli_qubit(0.0, h0, {0, eps, 0}, dt) - Complex(0, eps)) < 1e-15);
    // coefficient 1 - w^2 vanishes at w = 1
    CHECK(std::abs(step_pauli_qubit(1.0, h0, {eps, 0, 0}, dt) - Complex(1, 0)) < 1e-15);
    // drift i[(h00 + h01 w) w - (h10 + h11 w)] = 2 i w dt for H = diag(1,-1)
    const Complex w(0.5, 0.0);
    const Complex stepped = step_pauli_qubit(w, diag2(1, -1), {0, 0, 0}, dt);
    CHECK(std::abs(stepped - w * (1.0 + Complex(0, 2) * dt)) < 1e-15);
}

TEST_CASE("innovation increments subtract the measured quadrature") {
    auto scheme = pauli_scheme();
    const double dt = 1e-3;
    RVector dy = incs3(0.1, 0.2, 0.3);

    RVector db = innovation_increment(scheme, ProjectiveState{chart1(0.0)}, dy, dt);
    CHECK(db(0) == doctest::Approx(0.1).epsilon(1e-12));           // <sigma_x> = 0
    CHECK(db(1) == doctest::Approx(0.2).epsilon(1e-12));           // <sigma_y> = 0
    CHECK(db(2) == doctest::Approx(0.3 - 2 * dt).epsilon(1e-12));  // <sigma_z> = 1

    db = innovation_increment(scheme, ProjectiveState{chart1(1.0)}, dy, dt);
    CHECK(db(0) == doctest::Approx(0.1 - 2 * dt).epsilon(1e-12));  // <sigma_x> = 1

    // anti-Hermitian couplings: innovation coincides with the output
    auto torus = torus_diagonal_scheme(RVector::Ones(1));
    RVector dy1(1);
    dy1 << 0.7;
    RVector same = innovation_increment(torus, ProjectiveState{chart1(Complex(0.3, 0.4))}, dy1, dt);
    CHECK(same(0) == 0.7);
}

TEST_CASE("torus angle step") {
    RVector phi(1), rates(1), dy(1);
    phi << 1.0;
    rates << 1.0;
    dy << 0.0;
    const double dt = 0.01;
    RVector next = step_torus_angles(phi, diag2(1.5, -0.5), rates, dy, dt);
    CHECK(next(0) == doctest::Approx(1.0 + 2.0 * dt).epsilon(1e-14));

    Matrix off = diag2(1, -1);
    off(0, 1) = 0.1;
    off(1, 0) = 0.1;
    CHECK_THROWS_AS(step_torus_angles(phi, off, rates, dy, dt), SchemeError);
}

TEST_CASE("torus scheme dt-terms decouple per mode") {
    // generic projective step on the torus scheme reproduces the scalar
    // mode equation dw = i w (h00 - hkk) dt - r^2/2 w dt + i r w dY
    RVector rates(2);
    rates << 1.0, 0.7;
    auto scheme = torus_diagonal_scheme(rates);
    Matrix h = Matrix::Zero(3, 3);
    h(0, 0) = 0.6;
    h(1, 1) = -0.4;
    h(2, 2) = 0.2;
    CVector w(2);
    w << Complex(0.4, 0.2), Complex(-0.3, 0.5);
    RVector dy(2);
    dy << 0.02, -0.05;
    const double dt = 1e-3;
    const CVector generic = step_projective(ProjectiveState{w}, h, scheme, dy, dt).w;
    for (int k = 0; k < 2; ++k) {
        const Complex scalar =
            step_torus_mode(w(k), h(0, 0).real() - h(k + 1, k + 1).real(), rates(k), dy(k), dt);
        CHECK(std::abs(generic(k) - scalar) < 1e-15);
    }
}

TEST_CASE("euclidean step matches its displayed form") {
    auto scheme = euclidean_scheme(2);
    Matrix h = Matrix::Zero(3, 3);
    CVector w(2);
    w << Complex(0.3, -0.2), Complex(0.1, 0.4);
    RVector dy = RVector::Zero(4);
    const double dt = 1e-3;

    // H = 0, dY = 0: pure linear drift w (1 + n dt)
    CVector next = step_euclidean(ProjectiveState{w}, h, dy, dt).w;
    CHECK((next - w * (1.0 + 2 * dt)).cwiseAbs().maxCoeff() < 1e-16);

    // fixed point at the origin
    CVector zero2 = CVector::Zero(2);
    CHECK(step_euclidean(ProjectiveState{zero2}, h, dy, dt).w.cwiseAbs().maxCoeff() == 0.0);

    // agrees with the generic projective stepper on random data
    RandomStream rng(5);
    Matrix hr = Matrix::Zero(3, 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) hr(a, b) = Complex(rng.normal(), rng.normal());
    hr = ((hr + Matrix(hr.adjoint())) / 2.0).eval();
    for (int j = 0; j < 4; ++j) dy(j) = 0.02 * rng.normal();
    const CVector fast = step_euclidean(ProjectiveState{w}, hr, dy, dt).w;
    const CVector generic = step_projective(ProjectiveState{w}, hr, scheme, dy, dt).w;
    CHECK((fast - generic).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("simulated trajectories are bitwise deterministic") {
    auto scheme = pauli_scheme();
    auto ham = ControlledHamiltonian(0.4 * pauli_z(), 0.3 * pauli_x(), Matrix::Zero(2, 2));
    TrajectoryConfig config;
    config.dt = 1e-3;
    config.horizon = 0.2;
    config.seed = 77;
    auto policy = [](double t, const SchemeState&) { return std::make_pair(std::sin(t), 0.0); };

    const Trajectory a = simulate_trajectory(scheme, ham, policy, chart1(Complex(0.2, 0.1)), config);
    const Trajectory b = simulate_trajectory(scheme, ham, policy, chart1(Complex(0.2, 0.1)), config);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        CHECK(a.states[k](0).real() == b.states[k](0).real());
        CHECK(a.states[k](0).imag() == b.states[k](0).imag());
    }
    REQUIRE(a.increments.size() == b.increments.size());
    for (std::size_t k = 0; k < a.increments.size(); ++k)
        CHECK((a.increments[k] - b.increments[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-noise simulation reduces to the drift ODE") {
    auto scheme = pauli_scheme();
    auto ham = ControlledHamiltonian::constant(pauli_z());
    TrajectoryConfig config;
    config.dt = 1e-4;
    config.horizon = 0.5;
    config.noise_scale = 0.0;
    const Complex w0(0.3, 0.1);
    const Trajectory traj = simulate_trajectory(scheme, ham, zero_policy, chart1(w0), config);
    REQUIRE_FALSE(traj.truncated);
    // dw = 2 i w dt rotates w at angular rate 2 without changing |w|
    const Complex w_end = traj.states.back()(0);
    CHECK(std::abs(std::abs(w_end) - std::abs(w0)) < 1e-4);
    CHECK(std::abs(std::arg(w_end) - std::arg(w0) - 2.0 * config.horizon) < 1e-3);
}

TEST_CASE("torus trajectories conserve the moduli bitwise") {
    RVector rates(2);
    rates << 1.0, 0.5;
    auto scheme = torus_diagonal_scheme(rates);
    Matrix h0 = Matrix::Zero(3, 3);
    h0(0, 0) = 1.0;
    h0(1, 1) = -1.0;
    auto ham = ControlledHamiltonian::constant(h0);
    TrajectoryConfig config;
    config.dt = 1e-3;
    config.horizon = 1.0;
    config.seed = 3;
    CVector w0(2);
    w0 << Complex(0.6, 0.8), Complex(0.0, 1.3);
    const Trajectory traj = simulate_trajectory(scheme, ham, zero_policy, w0, config);

    REQUIRE(traj.moduli.size() == 2);
    CHECK(traj.moduli(0) == std::abs(w0(0)));
    CHECK(traj.moduli(1) == std::abs(w0(1)));
    REQUIRE(traj.steps() == 1000);
    // angle recursion matches the recorded increments exactly
    for (int k = 0; k < traj.steps(); ++k) {
        double expected =
            std::fmod(traj.angles[k](0) + 2.0 * config.dt + traj.increments[k](0), 2 * M_PI);
        if (expected < 0) expected += 2 * M_PI;
        CHECK(traj.angles[k + 1](0) == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("complex Euler torus mode drifts in modulus at first order in dt") {
    // ensemble-mean modulus drift halves with dt (the angle form is exact)
    const double r = 1.0, drift_rate = 6.0, T = 1.0;
    const int n_paths = 4000;
    std::vector<double> drifts;
    for (const double dt : {1e-3, 5e-4}) {
        const int n_steps = static_cast<int>(std::llround(T / dt));
        double acc = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            RandomStream rng(99, p);
            Complex w(1.0, 0.0);
            for (int k = 0; k < n_steps; ++k)
                w = step_torus_mode(w, drift_rate, r, rng.gauss(dt), dt);
            acc += std::abs(w) - 1.0;
        }
        drifts.push_back(acc / n_paths);
    }
    CHECK(drifts[0] > 0.0);
    CHECK(drifts[0] / drifts[1] == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("chi-space and projective integration agree pathwise at first order") {
    auto scheme = pauli_scheme();
    const Matrix h = 25.0 * pauli_z();
    const Complex w0(0.15, 0.1);
    const double T = 1.0, guard = 2.5;
    const double dt_fine = 5e-4;
    const int n_fine = static_cast<int>(std::llround(T / dt_fine));
    const int n_paths = 48;

    auto sup_difference = [&](double dt, const std::vector<RVector>& fine, int per_step) {
        const int n_steps = n_fine / per_step;
        CVector chi(2);
        chi << 1.0, w0;
        ProjectiveState w{chart1(w0)};
        double sup = 0.0;
        for (int k = 0; k < n_steps; ++k) {
            RVector dy = RVector::Zero(3);
            for (int s = 0; s < per_step; ++s) dy += fine[k * per_step + s];
            chi = step_linear_chi(chi, h, scheme, dy, dt);
            try {
                w = step_projective(w, h, scheme, dy, dt);
            } catch (const ChartError&) {
                return -1.0;
            }
            const Complex via_chi = chi(1) / chi(0);
            if (std::abs(w.w(0)) > guard || std::abs(via_chi) > guard) return -1.0;
            sup = std::max(sup, std::abs(via_chi - w.w(0)));
        }
        return sup;
    };

    double coarse = 0.0, fine_err = 0.0;
    int kept = 0;
    for (int p = 0; p < n_paths; ++p) {
        RandomStream rng(4242, p);
        std::vector<RVector> incs(n_fine);
        for (auto& v : incs) {
            v.resize(3);
            for (int j = 0; j < 3; ++j) v(j) = rng.gauss(dt_fine);
        }
        const double e1 = sup_difference(1e-3, incs, 2);
        const double e2 = sup_difference(5e-4, incs, 1);
        if (e1 < 0 || e2 < 0) continue;  // keep only paths in-chart at both resolutions
        ++kept;
        coarse += e1;
        fine_err += e2;
    }
    REQUIRE(kept >= 8);
    coarse /= kept;
    fine_err /= kept;
    CHECK(coarse <= 1000.0 * 1e-3);  // empirical C for the sup_t |difference| <= C dt bound
    const double ratio = coarse / fine_err;
    CHECK(ratio >= 1.4);
    CHECK(ratio <= 3.2);
}
