#include <doctest.h>

#include <cmath>

#include "qfg/circle_exact.hpp"
#include "qfg/games.hpp"
#include "qfg/rng.hpp"

using namespace qfg;

namespace {

CVector chart1(Complex w) {
    CVector v(1);
    v << w;
    return v;
}

Matrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

// circle game: one torus channel with rate 1, players pushing the drift
// through diag(1/2, -1/2) fields, cost <sigma_x> = cos(phi) on |w| = 1
GameSpec circle_game(double big_u, double big_v, double horizon, Complex start) {
    auto scheme = torus_diagonal_scheme(RVector::Ones(1));
    ControlledHamiltonian ham(Matrix::Zero(2, 2), diag2(0.5, -0.5), diag2(0.5, -0.5));
    return GameSpec(std::move(scheme), std::move(ham), big_u, big_v, pauli_x(),
                    Matrix::Zero(2, 2), horizon, chart1(start));
}

}  // namespace

TEST_CASE("drift field landmark values") {
    const ProjectiveState w{chart1(Complex(0.4, -0.3))};
    CHECK(drift_field(Matrix::Identity(2, 2), w).cwiseAbs().maxCoeff() < 1e-15);

    const Complex expected_z = Complex(0, 2) * w.w(0);
    CHECK(std::abs(drift_field(pauli_z(), w)(0) - expected_z) < 1e-15);

    const Complex expected_x = Complex(0, 1) * (w.w(0) * w.w(0) - 1.0);
    CHECK(std::abs(drift_field(pauli_x(), w)(0) - expected_x) < 1e-15);
}

TEST_CASE("cost rates and the cosine reduction") {
    const ProjectiveState origin{chart1(0.0)};
    CHECK(cost_rate(Matrix::Identity(2, 2), origin) == doctest::Approx(1.0));
    CHECK(cost_rate(pauli_z(), origin) == doctest::Approx(1.0));
    CHECK(cost_rate(pauli_z(), ProjectiveState{chart1(Complex(80.0, 0))}) ==
          doctest::Approx(-1.0).epsilon(1e-3));

    // on |w| = C the cost is an affine image of a shifted cosine
    RandomStream rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        Matrix j(2, 2);
        j(0, 0) = rng.normal();
        j(1, 1) = rng.normal();
        j(0, 1) = Complex(rng.normal(), rng.normal());
        j(1, 0) = std::conj(j(0, 1));
        const double c = 0.5 + rng.uniform();
        const auto red = reduce_cost_to_cosine(j, c);
        for (double phi : {0.0, 0.9, 2.5, 4.4}) {
            const double direct = cost_rate(j, ProjectiveState{chart1(std::polar(c, phi))});
            const double reduced = red.offset + red.amplitude * std::cos(phi - red.shift);
            CHECK(direct == doctest::Approx(reduced).epsilon(1e-12));
        }
    }
    // J = sigma_x on |w| = 1 is exactly cos(phi)
    const auto red = reduce_cost_to_cosine(pauli_x(), 1.0);
    CHECK(red.amplitude == doctest::Approx(1.0));
    CHECK(std::abs(red.shift) < 1e-14);
    CHECK(std::abs(red.offset) < 1e-14);
}

TEST_CASE("isaacs hamiltonian structure") {
    auto scheme = pauli_scheme();
    ControlledHamiltonian same(Matrix::Zero(2, 2), pauli_z(), pauli_z());
    GameSpec spec(scheme, same, 0.7, 0.7, pauli_x(), Matrix::Zero(2, 2), 1.0,
                  chart1(Complex(0.2, 0.1)));

    RandomStream rng(5);
    for (int rep = 0; rep < 10; ++rep) {
        const ProjectiveState w{chart1(Complex(rng.normal(), rng.normal()))};
        RVector grad(2);
        grad << rng.normal(), rng.normal();
        // equal bounds and identical fields cancel the modulus terms
        CHECK(isaacs_hamiltonian(spec, w, grad) ==
              doctest::Approx(cost_rate(pauli_x(), w)).epsilon(1e-12));
    }

    // pure control (V = 0) is convex in the gradient
    GameSpec pure(scheme, ControlledHamiltonian(Matrix::Zero(2, 2), pauli_x(), Matrix::Zero(2, 2)),
                  1.3, 0.0, pauli_x(), Matrix::Zero(2, 2), 1.0, chart1(Complex(0.2, 0.1)));
    const ProjectiveState w{chart1(Complex(0.3, -0.2))};
    RVector g1(2), g2(2);
    g1 << 0.7, -0.4;
    g2 << -0.3, 1.1;
    const RVector mid = 0.5 * (g1 + g2);
    CHECK(isaacs_hamiltonian(pure, w, g1) + isaacs_hamiltonian(pure, w, g2) >=
          2.0 * isaacs_hamiltonian(pure, w, mid) - 1e-12);
}

TEST_CASE("circle reduction of the isaacs field matches the scalar form") {
    // TorusDiagonal qubit with diagonal H1, H2: the chart pairing collapses
    // to (h00 - h11) S_phi evaluated tangentially
    GameSpec spec = circle_game(1.5, 0.5, 1.0, std::polar(1.0, 0.8));
    const double phi = 1.1;
    const ProjectiveState w{chart1(std::polar(1.0, phi))};
    // chart gradient of S(phi) seen as a function on |w| = 1:
    // grad = S'(phi) * d phi/d(x,y) = S'(phi) * (-sin, cos)/C
    const double sphi = -0.6;
    RVector grad(2);
    grad << -sphi * std::sin(phi), sphi * std::cos(phi);
    const double expected = std::cos(phi) + (1.5 - 0.5) * std::abs(sphi);
    CHECK(isaacs_hamiltonian(spec, w, grad) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero cost games have zero value") {
    GameSpec spec(torus_diagonal_scheme(RVector::Ones(1)),
                  ControlledHamiltonian(Matrix::Zero(2, 2), diag2(0.5, -0.5), Matrix::Zero(2, 2)),
                  1.0, 0.0, Matrix::Zero(2, 2), Matrix::Zero(2, 2), 1.0, chart1(Complex(1, 0)));
    GameSolverConfig config;
    config.resolution = 64;
    config.pde.dt = 2e-3;
    const auto sol = solve_zero_sum(spec, config);
    CHECK(std::abs(sol.value_at_start) < 1e-9);
    for (const auto& slice : sol.value.slices) CHECK(slice.max_abs() < 1e-9);
}

TEST_CASE("uncontrolled circle game matches the closed form and plain MC") {
    // dphi = c dt + dB with c = h00 - h11 = 2, cost cos(phi):
    // value(0, phi0) = int_0^T e^{-s/2} cos(phi0 + c s) ds
    auto scheme = torus_diagonal_scheme(RVector::Ones(1));
    ControlledHamiltonian ham(diag2(1.0, -1.0), diag2(0.5, -0.5), diag2(0.5, -0.5));
    const double horizon = 1.0, phi0 = 0.9;
    GameSpec spec(scheme, ham, 0.0, 0.0, pauli_x(), Matrix::Zero(2, 2), horizon,
                  chart1(std::polar(1.0, phi0)));
    GameSolverConfig config;
    config.resolution = 128;
    config.pde.dt = 1e-3;
    const auto sol = solve_zero_sum(spec, config);

    const Complex rate(-0.5, 2.0);
    const Complex integral = (std::exp(rate * horizon) - 1.0) / rate;
    const double closed_form = (std::polar(1.0, phi0) * integral).real();
    CHECK(sol.value_at_start == doctest::Approx(closed_form).epsilon(5e-3));

    McConfig mc;
    mc.n_paths = 4000;
    mc.dt = 1e-3;
    mc.seed = 9;
    const auto eval = evaluate_policy_mc(spec, Policy::constant(0.0, 0.0), mc);
    CHECK(eval.chart_exit_fraction == 0.0);
    CHECK(std::abs(eval.mean - sol.value_at_start) <= 2.0 * eval.std_error + 5e-3);
}

TEST_CASE("verification: MC under the extracted policy meets the PDE value") {
    GameSpec spec = circle_game(1.5, 0.5, 1.0, std::polar(1.0, M_PI / 2));
    GameSolverConfig config;
    config.resolution = 256;
    config.pde.dt = 1e-3;
    const auto sol = solve_zero_sum(spec, config);

    McConfig mc;
    mc.n_paths = 4000;
    mc.dt = 1e-3;
    mc.seed = 31;
    mc.threads = 4;
    const auto eval = evaluate_policy_mc(spec, sol.policy, mc);
    CHECK_FALSE(eval.flagged);
    CHECK(std::abs(eval.mean - sol.value_at_start) <=
          std::max(2.0 * eval.std_error, 2e-2));
}

TEST_CASE("extracted policy beats fixed suboptimal policies (pure control)") {
    GameSpec spec = circle_game(1.0, 0.0, 1.0, std::polar(1.0, 2.0));
    GameSolverConfig config;
    config.resolution = 128;
    config.pde.dt = 2e-3;
    const auto sol = solve_zero_sum(spec, config);

    McConfig mc;
    mc.n_paths = 3000;
    mc.dt = 2e-3;
    mc.seed = 17;
    const auto best = evaluate_policy_mc(spec, sol.policy, mc);

    const std::vector<Policy> rivals = {
        Policy::constant(0.0, 0.0),
        Policy::constant(1.0, 0.0),
        Policy::constant(-1.0, 0.0),
        Policy::custom(
            [](double, const SchemeState& s) {
                return std::make_pair(std::sin(s.angles(0)), 0.0);
            },
            1.0, 0.0),
        Policy::custom(
            [](double t, const SchemeState&) { return std::make_pair(t > 0.5 ? 1.0 : -1.0, 0.0); },
            1.0, 0.0),
    };
    for (const auto& rival : rivals) {
        const auto other = evaluate_policy_mc(spec, rival, mc);
        CHECK(best.mean >= other.mean - 2.0 * (best.std_error + other.std_error));
    }
}

TEST_CASE("policy extraction is scale invariant") {
    GameSpec spec = circle_game(1.5, 0.5, 1.0, std::polar(1.0, 1.0));
    GameSolverConfig config;
    config.resolution = 64;
    config.pde.dt = 2e-3;
    auto sol = solve_zero_sum(spec, config);

    ValueFunction scaled = sol.value;
    for (auto& slice : scaled.slices) slice.values *= 7.5;
    const Policy p2 = bang_bang_policy(spec, scaled);

    SchemeState state;
    state.w = chart1(std::polar(1.0, 0.0));
    state.angles = RVector::Zero(1);
    state.moduli = RVector::Ones(1);
    RandomStream rng(23);
    for (int rep = 0; rep < 40; ++rep) {
        state.angles(0) = 2 * M_PI * rng.uniform();
        const double t = spec.horizon * rng.uniform();
        const auto a = sol.policy(t, state);
        const auto b = p2(t, state);
        CHECK(a.first == b.first);
        CHECK(a.second == b.second);
    }
}

TEST_CASE("value is monotone in the control authority") {
    GameSolverConfig config;
    config.resolution = 96;
    config.pde.dt = 2e-3;
    const Complex start = std::polar(1.0, 2.0);

    double prev = -1e30;
    for (double big_u : {0.0, 0.5, 1.0}) {
        const auto sol = solve_zero_sum(circle_game(big_u, 0.3, 1.0, start), config);
        CHECK(sol.value_at_start >= prev - 1e-9);
        prev = sol.value_at_start;
    }
    prev = 1e30;
    for (double big_v : {0.0, 0.5, 1.0}) {
        const auto sol = solve_zero_sum(circle_game(1.0, big_v, 1.0, start), config);
        CHECK(sol.value_at_start <= prev + 1e-9);
        prev = sol.value_at_start;
    }
}

TEST_CASE("long-horizon value per unit time approaches the ergodic rate") {
    // the finite-horizon equation carries kappa = 1/2, so its ergodic
    // constant equals the stationary reduction evaluated at 2 alpha
    const double alpha = 1.0, horizon = 20.0;
    GameSpec spec = circle_game(1.5, 0.5, horizon, std::polar(1.0, M_PI / 2));
    GameSolverConfig config;
    config.resolution = 128;
    config.pde.dt = 4e-3;
    config.pde.max_iterations = 400;
    const auto sol = solve_zero_sum(spec, config);
    const double rate = sol.value_at_start / horizon;
    const double lambda = circle_game_lambda(2.0 * alpha);
    CHECK(std::abs(rate - lambda) / std::abs(lambda) < 0.05);
}

TEST_CASE("two-atom drift reductions") {
    const int d = 2;
    Matrix h1(2, 2), h2(2, 2);
    h1 << 1.0, Complex(0.3, 0.2), Complex(0.3, -0.2), -0.5;
    h2 << 0.4, Complex(-0.1, 0.7), Complex(-0.1, -0.7), 0.9;
    const Matrix zero4 = Matrix::Zero(4, 4);
    TwoAtomSpec spec(d, h1, h2, zero4, 1.0, 1.0, zero4, zero4, zero4, zero4, 1.0);

    SUBCASE("decoupled first factor reduces to the single-atom drift") {
        CVector w = CVector::Zero(3);
        w(two_atom_index(1, 0, d)) = Complex(0.6, -0.4);  // w_{10} only
        const CVector drift = two_atom_drift(spec, 0.8, 0.0, w);
        const CVector single =
            drift_field(0.8 * h1, ProjectiveState{chart1(w(two_atom_index(1, 0, d)))});
        CHECK(std::abs(drift(two_atom_index(1, 0, d)) - single(0)) < 1e-14);
        CHECK(std::abs(drift(two_atom_index(0, 1, d))) < 1e-14);  // no second-atom action
    }

    SUBCASE("origin values read off the Hamiltonian entries") {
        const CVector w = CVector::Zero(3);
        const CVector drift = two_atom_drift(spec, 1.0, 1.0, w);
        const Complex i(0, 1);
        CHECK(std::abs(drift(two_atom_index(1, 0, d)) - (-i * h1(1, 0))) < 1e-14);
        CHECK(std::abs(drift(two_atom_index(0, 1, d)) - (-i * h2(0, 1))) < 1e-14);
    }
}

TEST_CASE("two-atom drift agrees with the tensor-operator route") {
    const int d = 2;
    RandomStream rng(41);
    Matrix h1(2, 2), h2(2, 2);
    h1 << rng.normal(), Complex(rng.normal(), rng.normal()), 0.0, rng.normal();
    h1(1, 0) = std::conj(h1(0, 1));
    h2 << rng.normal(), Complex(rng.normal(), rng.normal()), 0.0, rng.normal();
    h2(1, 0) = std::conj(h2(0, 1));
    // exchange interaction between the two atoms
    Matrix a = Matrix::Zero(4, 4);
    a(1, 2) = 1.0;
    a(2, 1) = 1.0;
    const Matrix zero4 = Matrix::Zero(4, 4);
    TwoAtomSpec spec(d, h1, h2, a, 1.0, 1.0, zero4, zero4, zero4, zero4, 1.0);

    for (int rep = 0; rep < 10; ++rep) {
        CVector w(3);
        for (int k = 0; k < 3; ++k) w(k) = Complex(rng.normal(), rng.normal());
        const double u = rng.normal(), v = rng.normal();
        const CVector direct = two_atom_drift(spec, u, v, w);
        const CVector via_tensor =
            drift_field(two_atom_hamiltonian(spec, u, v), ProjectiveState{w});
        CHECK((direct - via_tensor).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("two-atom interaction drift cross-validated against the chi flow") {
    // u = v = 0, pure interaction: the chi evolution is unitary, so the
    // norm is conserved and the projected path must track the chart drift
    const int d = 2;
    Matrix a = Matrix::Zero(4, 4);
    a(1, 2) = 1.0;
    a(2, 1) = 1.0;
    a(0, 0) = 0.3;
    a(3, 3) = -0.2;
    const Matrix zero4 = Matrix::Zero(4, 4);
    TwoAtomSpec spec(d, Matrix::Zero(2, 2), Matrix::Zero(2, 2), a, 0.0, 0.0, zero4, zero4, zero4,
                     zero4, 1.0);

    CVector chi(4);
    chi << 1.0, Complex(0.2, -0.1), Complex(-0.4, 0.3), Complex(0.1, 0.5);
    CVector w(3);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            if (j || k) w(two_atom_index(j, k, d)) = chi(j * d + k) / chi(0);

    const double dt = 1e-4, horizon = 0.5;
    const double norm0 = chi.norm();
    const Complex i(0, 1);
    for (int step = 0; step < static_cast<int>(horizon / dt); ++step) {
        // RK2 on chi keeps the unitary flow accurate; Euler on the chart
        const CVector k1 = -i * (a * chi);
        const CVector k2 = -i * (a * (chi + 0.5 * dt * k1));
        chi += dt * k2;
        w += dt * two_atom_drift(spec, 0.0, 0.0, w);
    }
    CHECK(std::abs(chi.norm() - norm0) < 1e-6);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            if (j || k) {
                const Complex via_chi = chi(j * d + k) / chi(0);
                CHECK(std::abs(via_chi - w(two_atom_index(j, k, d))) < 2e-3);
            }
}

TEST_CASE("nonzero-sum fields embed the zero-sum game on the circle") {
    auto scheme = torus_diagonal_scheme(RVector::Ones(1));
    ControlledHamiltonian ham(Matrix::Zero(2, 2), diag2(0.5, -0.5), diag2(0.5, -0.5));
    const Complex start = std::polar(1.0, 1.3);
    NonzeroSumGameSpec nz{scheme,           ham,
                          1.0,              0.4,
                          pauli_x(),        Matrix::Zero(2, 2),
                          Matrix(-pauli_x()), Matrix::Zero(2, 2),
                          0.8,              chart1(start)};
    GameSolverConfig config;
    config.resolution = 128;
    config.pde.dt = 1e-3;
    const auto pair = solve_nonzero_sum(nz, config);

    GameSpec zs(scheme, ham, 1.0, 0.4, pauli_x(), Matrix::Zero(2, 2), 0.8, chart1(start));
    const auto scalar = solve_zero_sum(zs, config);
    CHECK((pair.value1.slices.front().values - scalar.value.slices.front().values)
              .cwiseAbs()
              .maxCoeff() < 1e-3);
    CHECK((pair.value1.slices.front().values + pair.value2.slices.front().values)
              .cwiseAbs()
              .maxCoeff() < 1e-8);
}

TEST_CASE("nonzero-sum solver handles zero control authority") {
    auto scheme = torus_diagonal_scheme(RVector::Ones(1));
    ControlledHamiltonian ham(diag2(0.5, -0.5), diag2(0.5, -0.5), diag2(0.5, -0.5));
    NonzeroSumGameSpec nz{scheme,    ham,
                          0.0,       0.0,
                          pauli_x(), Matrix::Zero(2, 2),
                          pauli_z(), Matrix::Zero(2, 2),
                          0.5,       chart1(std::polar(1.0, 0.4))};
    GameSolverConfig config;
    config.resolution = 64;
    config.pde.dt = 2e-3;
    const auto pair = solve_nonzero_sum(nz, config);
    // player II's cost <sigma_z> is constant on |w| = 1, so S^II is the
    // plain time integral of that constant
    const double c = cost_rate(pauli_z(), ProjectiveState{chart1(std::polar(1.0, 0.4))});
    CHECK(pair.value2.slices.front().values(0) == doctest::Approx(c * 0.5).epsilon(1e-6));
}

TEST_CASE("capability errors for unsupported reductions") {
    auto gm = gell_mann_scheme(3);
    ControlledHamiltonian ham3(Matrix::Zero(3, 3), Matrix::Zero(3, 3), Matrix::Zero(3, 3));
    GameSpec spec(gm, ham3, 1.0, 0.0, Matrix::Identity(3, 3), Matrix::Zero(3, 3), 1.0,
                  CVector::Zero(2));
    CHECK_THROWS_AS(solve_zero_sum(spec), CapabilityError);

    // non-diagonal Hamiltonian on a torus scheme
    auto torus = torus_diagonal_scheme(RVector::Ones(1));
    ControlledHamiltonian bad(pauli_x(), Matrix::Zero(2, 2), Matrix::Zero(2, 2));
    GameSpec spec2(torus, bad, 1.0, 0.0, pauli_x(), Matrix::Zero(2, 2), 1.0, chart1(Complex(1, 0)));
    CHECK_THROWS_AS(solve_zero_sum(spec2), CapabilityError);
}
