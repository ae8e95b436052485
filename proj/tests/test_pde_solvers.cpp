#include <doctest.h>

#include <cmath>

#include "qfg/circle_exact.hpp"
#include "qfg/pde.hpp"
#include "qfg/rng.hpp"

using namespace qfg;

namespace {

HamiltonianField zero_field() {
    return {[](const ManifoldPoint&, double, const Covector&) { return 0.0; }, 0.0, 0.0};
}

HamiltonianField constant_field(double c) {
    return {[c](const ManifoldPoint&, double, const Covector&) { return c; }, 0.0, 0.0};
}

// alpha |grad S|_M + cost(x), the workhorse drift-control field
HamiltonianField modulus_field(double alpha, std::function<double(const ManifoldPoint&)> cost) {
    return {[alpha, cost](const ManifoldPoint& p, double, const Covector& g) {
                return alpha * g.metric_norm + cost(p);
            },
            std::abs(alpha), 0.0};
}

double sup_diff(const ValueFunction& a, const ValueFunction& b) {
    return (a.slices.front().values - b.slices.front().values).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("mild solve with zero Hamiltonian is the heat flow") {
    const auto grid = ManifoldGrid::circle(128, 0.5);
    GridFunction terminal =
        make_grid_function(grid, [](const ManifoldPoint& p) { return std::cos(p.c1); });
    SolverConfig config;
    config.dt = 1e-3;
    const ValueFunction vf = mild_solve(grid, terminal, zero_field(), 0.7, config);
    const GridFunction expected = heat_apply(grid, 0.7, terminal);
    CHECK((vf.slices.front().values - expected.values).cwiseAbs().maxCoeff() < 1e-11);
    CHECK(vf.slices.back().values == terminal.values);
}

TEST_CASE("constant Hamiltonian adds c times remaining time") {
    const auto grid = ManifoldGrid::circle(64, 1.0);
    GridFunction terminal =
        make_grid_function(grid, [](const ManifoldPoint& p) { return std::sin(p.c1); });
    SolverConfig config;
    config.dt = 1e-3;
    const double c = 0.8, horizon = 0.5;
    const ValueFunction vf = mild_solve(grid, terminal, constant_field(c), horizon, config);
    const GridFunction expected = heat_apply(grid, horizon, terminal);
    CHECK((vf.slices.front().values - expected.values - RVector::Constant(64, c * horizon))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
}

TEST_CASE("mild solve reproduces the linear-drift closed form on the circle") {
    // dS/dt + kappa S'' + c S' + cos(phi) = 0, S(T) = 0 has
    // S(t, phi) = Re[e^{i phi} (1 - e^{(-kappa + ic)(T-t)}) / (kappa - ic)]
    const double kappa = 0.5, c = 1.3, horizon = 1.0;
    const auto grid = ManifoldGrid::circle(128, kappa);
    GridFunction terminal(grid, RVector::Zero(128));
    HamiltonianField field{
        [c](const ManifoldPoint& p, double, const Covector& g) {
            return c * g.d(0) + std::cos(p.c1);
        },
        std::abs(c), 0.0};
    SolverConfig config;
    config.dt = 5e-4;
    const ValueFunction vf = mild_solve(grid, terminal, field, horizon, config);
    const Complex decay = (1.0 - std::exp(Complex(-kappa, c) * horizon)) / Complex(kappa, -c);
    for (int i = 0; i < 128; i += 7) {
        const double phi = 2.0 * M_PI * i / 128;
        const double expected = (std::polar(1.0, phi) * decay).real();
        CHECK(vf.slices.front().values(i) == doctest::Approx(expected).epsilon(5e-3));
    }
}

TEST_CASE("mild solve residuals decay geometrically and diverge politely") {
    const auto grid = ManifoldGrid::circle(128, 0.5);
    GridFunction terminal =
        make_grid_function(grid, [](const ManifoldPoint& p) { return std::cos(p.c1); });
    SolverConfig config;
    config.dt = 1e-3;
    const ValueFunction vf = mild_solve(
        grid, terminal, modulus_field(1.0, [](const ManifoldPoint& p) { return std::cos(p.c1); }),
        0.25, config);
    REQUIRE(vf.residuals.size() >= 3);
    for (std::size_t k = vf.residuals.size() - 2; k + 1 < vf.residuals.size(); ++k)
        CHECK(vf.residuals[k + 1] <= 0.8 * vf.residuals[k]);

    SolverConfig tight = config;
    tight.max_iterations = 2;
    tight.tolerance = 1e-15;
    try {
        mild_solve(grid, terminal,
                   modulus_field(1.0, [](const ManifoldPoint& p) { return std::cos(p.c1); }), 0.25,
                   tight);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.residuals.size() == 2);
    }
}

TEST_CASE("solutions depend continuously on the terminal data") {
    const auto grid = ManifoldGrid::circle(128, 0.5);
    RandomStream rng(7);
    auto field = modulus_field(0.8, [](const ManifoldPoint& p) { return std::sin(p.c1); });
    SolverConfig config;
    config.dt = 2e-3;
    for (int rep = 0; rep < 3; ++rep) {
        const double c1 = rng.normal(), c2 = rng.normal(), d1 = 0.1 * rng.normal();
        GridFunction y1 = make_grid_function(grid, [&](const ManifoldPoint& p) {
            return c1 * std::cos(p.c1) + c2 * std::sin(2 * p.c1);
        });
        GridFunction y2 = make_grid_function(grid, [&](const ManifoldPoint& p) {
            return c1 * std::cos(p.c1) + c2 * std::sin(2 * p.c1) + d1 * std::cos(3 * p.c1);
        });
        const auto f1 = mild_solve(grid, y1, field, 0.5, config);
        const auto f2 = mild_solve(grid, y2, field, 0.5, config);
        // C1 distance of the data dominates the sup distance of solutions
        const double c1_dist = (y1.values - y2.values).cwiseAbs().maxCoeff() +
                               (gradient_field(y1).metric_norm.values -
                                gradient_field(y2).metric_norm.values)
                                   .cwiseAbs()
                                   .maxCoeff();
        CHECK(sup_diff(f1, f2) <= 10.0 * c1_dist);
    }
}

TEST_CASE("fd solve handles the pure heat problem and CFL guard") {
    const auto grid = ManifoldGrid::circle(512, 0.5);
    GridFunction terminal =
        make_grid_function(grid, [](const ManifoldPoint& p) { return std::cos(p.c1); });
    const ValueFunction vf = fd_solve(grid, terminal, zero_field(), 1.0);
    for (int i = 0; i < 512; i += 37)
        CHECK(vf.slices.front().values(i) ==
              doctest::Approx(std::exp(-0.5) * terminal.values(i)).epsilon(1e-4));

    FdConfig bad;
    bad.dt = 1.0;
    CHECK_THROWS_AS(fd_solve(grid, terminal, zero_field(), 1.0, bad), CflError);

    // constants are fixed points of fields with H(x, 0) = 0
    GridFunction ones(grid, RVector::Constant(512, 1.0));
    const ValueFunction flat = fd_solve(
        grid, ones, modulus_field(0.7, [](const ManifoldPoint&) { return 0.0; }), 0.4);
    CHECK((flat.slices.front().values.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("mild and fd solvers agree on all three manifolds") {
    SolverConfig mild_config;
    mild_config.dt = 1e-3;

    SUBCASE("circle") {
        const auto grid = ManifoldGrid::circle(256, 0.5);
        GridFunction terminal =
            make_grid_function(grid, [](const ManifoldPoint& p) { return std::cos(p.c1); });
        auto field = modulus_field(0.6, [](const ManifoldPoint& p) { return std::sin(p.c1); });
        const auto mild = mild_solve(grid, terminal, field, 0.5, mild_config);
        const auto fd = fd_solve(grid, terminal, field, 0.5);
        CHECK(sup_diff(mild, fd) < 1e-2);
    }
    SUBCASE("torus") {
        const auto grid = ManifoldGrid::torus(48, 48, 0.5);
        GridFunction terminal = make_grid_function(grid, [](const ManifoldPoint& p) {
            return std::cos(p.c1) + 0.5 * std::sin(p.c2);
        });
        auto field = modulus_field(0.5, [](const ManifoldPoint& p) {
            return std::cos(p.c1) * std::cos(p.c2);
        });
        const auto mild = mild_solve(grid, terminal, field, 0.3, mild_config);
        const auto fd = fd_solve(grid, terminal, field, 0.3);
        CHECK(sup_diff(mild, fd) < 1e-2);
    }
    SUBCASE("sphere") {
        const auto grid = ManifoldGrid::sphere(24, 1.0);
        GridFunction terminal =
            make_grid_function(grid, [](const ManifoldPoint& p) { return std::cos(p.c1); });
        auto field = modulus_field(0.5, [](const ManifoldPoint& p) {
            return std::sin(p.c1) * std::cos(p.c2);
        });
        SolverConfig cfg;
        cfg.dt = 2e-3;
        const auto mild = mild_solve(grid, terminal, field, 0.3, cfg);
        const auto fd = fd_solve(grid, terminal, field, 0.3);
        CHECK(sup_diff(mild, fd) < 1e-2);
    }
}

TEST_CASE("coupled solver embeds the zero-sum game") {
    const auto grid = ManifoldGrid::circle(128, 0.5);
    GridFunction terminal =
        make_grid_function(grid, [](const ManifoldPoint& p) { return 0.3 * std::cos(p.c1); });
    GridFunction neg_terminal(grid, RVector(-terminal.values));
    const double big_u = 1.0, big_v = 0.4;
    auto cost = [](const ManifoldPoint& p) { return std::cos(p.c1); };

    // player I maximizes with u, player II with v; antisymmetric costs
    CoupledField coupled{
        [&](const ManifoldPoint& p, const Covector& g1, const Covector& g2) {
            const double u = big_u * ((g1.d(0) >= 0.0) ? 1.0 : -1.0);
            const double v = big_v * ((g2.d(0) >= 0.0) ? 1.0 : -1.0);
            const double drift = u + v;
            return std::make_pair(drift * g1.d(0) + cost(p), drift * g2.d(0) - cost(p));
        },
        big_u + big_v};

    HamiltonianField isaacs{
        [&](const ManifoldPoint& p, double, const Covector& g) {
            return big_u * std::abs(g.d(0)) - big_v * std::abs(g.d(0)) + cost(p);
        },
        big_u + big_v, 0.0};

    SolverConfig config;
    config.dt = 1e-3;
    const auto [s1, s2] = vector_mild_solve(grid, terminal, neg_terminal, coupled, 0.5, config);
    const auto scalar = mild_solve(grid, terminal, isaacs, 0.5, config);
    CHECK((s1.slices.front().values - scalar.slices.front().values).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((s1.slices.front().values + s2.slices.front().values).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("coupled solver respects player symmetry on the torus") {
    const auto grid = ManifoldGrid::torus(32, 32, 0.5);
    GridFunction t1 =
        make_grid_function(grid, [](const ManifoldPoint& p) { return 0.2 * std::cos(p.c1); });
    GridFunction t2 =
        make_grid_function(grid, [](const ManifoldPoint& p) { return 0.2 * std::cos(p.c2); });
    const double bound = 0.6;
    CoupledField coupled{
        [&](const ManifoldPoint& p, const Covector& g1, const Covector& g2) {
            const double u = bound * ((g1.d(0) >= 0.0) ? 1.0 : -1.0);
            const double v = bound * ((g2.d(1) >= 0.0) ? 1.0 : -1.0);
            return std::make_pair(u * g1.d(0) + v * g1.d(1) + std::cos(p.c1),
                                  u * g2.d(0) + v * g2.d(1) + std::cos(p.c2));
        },
        2 * bound};
    SolverConfig config;
    config.dt = 2e-3;
    const auto [s1, s2] = vector_mild_solve(grid, t1, t2, coupled, 0.4, config);
    // swapping the two angles swaps the players
    const int n = 32;
    double gap = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            gap = std::max(gap, std::abs(s1.slices.front().values(i * n + j) -
                                         s2.slices.front().values(j * n + i)));
    CHECK(gap < 1e-10);
}

TEST_CASE("stationary circle solver matches the closed form") {
    CHECK(circle_game_lambda(1.0) == doctest::Approx(0.5451657).epsilon(1e-6));
    CHECK(circle_game_lambda(2.0) == doctest::Approx(0.8029934).epsilon(1e-6));
    for (double alpha : {0.25, 0.5, 1.0, 2.0}) {
        const auto sol = stationary_solve_circle(alpha);
        CHECK(std::abs(sol.lambda - circle_game_lambda(alpha)) < 1e-8);
        CHECK(sol.boundary_residual < 1e-10);
        // odd symmetry of the closed form
        CHECK(circle_game_lambda(-alpha) == doctest::Approx(-circle_game_lambda(alpha)).epsilon(1e-12));
    }
    // profile is even and anchored at S(0) = 0
    const auto sol = stationary_solve_circle(1.0, 512);
    CHECK(sol.profile.values(0) == doctest::Approx(0.0));
    CHECK(sol.profile.values(128) == doctest::Approx(sol.profile.values(512 - 128)).epsilon(1e-10));
}

TEST_CASE("discounted circle closed form") {
    const auto sol = discounted_solve_circle(1.0, 1.0);
    CHECK(sol.a1 == doctest::Approx(1.0 + std::sqrt(3.0)).epsilon(1e-14));
    CHECK(sol.a2 == doctest::Approx(1.0 - std::sqrt(3.0)).epsilon(1e-14));
    CHECK(sol.b == doctest::Approx(4.0 / 13.0).epsilon(1e-14));
    CHECK(sol.a == doctest::Approx(6.0 / 13.0).epsilon(1e-14));

    // plug-back residual of 1/2 S'' - alpha S' + cos(phi) - delta S on (0, pi)
    double residual = 0.0;
    for (int k = 1; k < 1024; ++k) {
        const double phi = M_PI * k / 1024.0;
        residual = std::max(residual,
                            std::abs(0.5 * sol.second_derivative_at(phi) - sol.derivative_at(phi) +
                                     std::cos(phi) - sol.value_at(phi)));
    }
    CHECK(residual < 1e-8);
    CHECK(std::abs(sol.derivative_at(0.0)) < 1e-8);
    CHECK(std::abs(sol.derivative_at(M_PI)) < 1e-8);

    CHECK_THROWS_AS(discounted_solve_circle(0.0, 1.0), Error);
    CHECK_THROWS_AS(discounted_solve_circle(1.0, -0.5), Error);
}

TEST_CASE("discounted closed form matches a finite-horizon emulation") {
    const double alpha = 1.0, delta = 1.0, horizon = 9.0;
    const auto grid = ManifoldGrid::circle(256, 0.5);
    const auto exact = discounted_solve_circle(alpha, delta, 256);
    HamiltonianField field{
        [&](const ManifoldPoint& p, double value, const Covector& g) {
            return alpha * std::abs(g.d(0)) + std::cos(p.c1) - delta * value;
        },
        alpha, delta};
    GridFunction terminal(grid, RVector::Zero(256));
    const ValueFunction vf = fd_solve(grid, terminal, field, horizon);
    CHECK((vf.slices.front().values - exact.profile.values).cwiseAbs().maxCoeff() < 1e-2);
}
