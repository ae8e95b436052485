#include "qfg/circle_exact.hpp"

#include <cmath>
#include <vector>

namespace qfg {

double circle_game_lambda(double alpha) {
    if (std::abs(alpha) < 1e-6) return 2.0 * alpha / M_PI;  // removable singularity
    const double e = std::exp(alpha * M_PI);
    return alpha * alpha / (alpha * alpha + 1.0) * (e + 1.0) / (e - 1.0);
}

namespace {

// RK4 on [0, pi] for f' = alpha f - cos(phi) + lambda with f(0) = 0,
// accumulating S(phi) = int_0^phi f.  Returns dense samples of (f, S).
struct OdePath {
    std::vector<double> f, s;
    double step = 0.0;
};

OdePath integrate_reduced(double alpha, double lambda, int m) {
    OdePath path;
    path.step = M_PI / m;
    path.f.resize(m + 1);
    path.s.resize(m + 1);
    path.f[0] = 0.0;
    path.s[0] = 0.0;
    const auto rhs = [&](double phi, double f) { return alpha * f - std::cos(phi) + lambda; };
    for (int k = 0; k < m; ++k) {
        const double phi = k * path.step, h = path.step;
        const double f = path.f[k];
        const double k1 = rhs(phi, f);
        const double k2 = rhs(phi + h / 2, f + h / 2 * k1);
        const double k3 = rhs(phi + h / 2, f + h / 2 * k2);
        const double k4 = rhs(phi + h, f + h * k3);
        path.f[k + 1] = f + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        // S' = f integrated with the same Runge-Kutta stages
        const double s1 = f;
        const double s2 = f + h / 2 * k1;
        const double s3 = f + h / 2 * k2;
        const double s4 = f + h * k3;
        path.s[k + 1] = path.s[k] + h / 6 * (s1 + 2 * s2 + 2 * s3 + s4);
    }
    return path;
}

double sample(const std::vector<double>& dense, double step, double phi) {
    const double pos = phi / step;
    const int k = std::min(static_cast<int>(pos), static_cast<int>(dense.size()) - 2);
    const double frac = pos - k;
    return dense[k] * (1.0 - frac) + dense[k + 1] * frac;
}

}  // namespace

StationaryCircleSolution stationary_solve_circle(double alpha, int nodes) {
    const int m = 8192;
    // f(pi; lambda) is affine in lambda, so the secant closes in one update;
    // keep iterating until the boundary defect is at rounding level
    double l0 = 0.0, l1 = 1.0;
    double g0 = integrate_reduced(alpha, l0, m).f.back();
    double g1 = integrate_reduced(alpha, l1, m).f.back();
    double lambda = l1;
    for (int it = 0; it < 16 && std::abs(g1) > 1e-13; ++it) {
        lambda = l1 - g1 * (l1 - l0) / (g1 - g0);
        l0 = l1;
        g0 = g1;
        l1 = lambda;
        g1 = integrate_reduced(alpha, lambda, m).f.back();
    }

    const OdePath path = integrate_reduced(alpha, lambda, m);
    const ManifoldGrid grid = ManifoldGrid::circle(nodes, 1.0);
    RVector values(nodes);
    for (int k = 0; k < nodes; ++k) {
        double phi = 2.0 * M_PI * k / nodes;
        if (phi > M_PI) phi = 2.0 * M_PI - phi;  // even extension
        values(k) = sample(path.s, path.step, phi);
    }

    StationaryCircleSolution out;
    out.lambda = lambda;
    out.boundary_residual = std::abs(path.f.back());
    out.profile = GridFunction(grid, std::move(values));
    return out;
}

DiscountedCircleSolution discounted_solve_circle(double alpha, double delta, int nodes) {
    if (delta <= 0.0) throw Error("discounted_solve_circle: requires delta > 0");
    if (alpha == 0.0) throw Error("discounted_solve_circle: requires alpha != 0");

    DiscountedCircleSolution sol;
    sol.alpha = alpha;
    sol.delta = delta;
    const double root = std::sqrt(alpha * alpha + 2.0 * delta);
    sol.a1 = alpha + root;
    sol.a2 = alpha - root;
    sol.b = 4.0 * alpha / (4.0 * alpha * alpha + (1.0 + 2.0 * delta) * (1.0 + 2.0 * delta));
    sol.a = sol.b * (1.0 + 2.0 * delta) / (2.0 * alpha);

    // A a1 + B a2 + b = 0,  A a1 e^{a1 pi} + B a2 e^{a2 pi} - b = 0
    const double m11 = sol.a1, m12 = sol.a2;
    const double m21 = sol.a1 * std::exp(sol.a1 * M_PI), m22 = sol.a2 * std::exp(sol.a2 * M_PI);
    const double det = m11 * m22 - m12 * m21;
    if (std::abs(det) < 1e-14 * std::max({std::abs(m11 * m22), std::abs(m12 * m21), 1.0}))
        throw Error("discounted_solve_circle: degenerate boundary system");
    sol.coef_a = (-sol.b * m22 - sol.b * m12) / det;
    sol.coef_b = (m11 * sol.b + m21 * sol.b) / det;

    const ManifoldGrid grid = ManifoldGrid::circle(nodes, 1.0);
    RVector values(nodes);
    for (int k = 0; k < nodes; ++k) values(k) = sol.value_at(2.0 * M_PI * k / nodes);
    sol.profile = GridFunction(grid, std::move(values));
    return sol;
}

namespace {

double fold(double phi) {
    phi = std::fmod(phi, 2.0 * M_PI);
    if (phi < 0) phi += 2.0 * M_PI;
    return phi > M_PI ? 2.0 * M_PI - phi : phi;  // even reflection
}

}  // namespace

double DiscountedCircleSolution::value_at(double phi) const {
    const double x = fold(phi);
    return coef_a * std::exp(a1 * x) + coef_b * std::exp(a2 * x) + a * std::cos(x) +
           b * std::sin(x);
}

double DiscountedCircleSolution::derivative_at(double phi) const {
    const double x = fold(phi);
    return coef_a * a1 * std::exp(a1 * x) + coef_b * a2 * std::exp(a2 * x) - a * std::sin(x) +
           b * std::cos(x);
}

double DiscountedCircleSolution::second_derivative_at(double phi) const {
    const double x = fold(phi);
    return coef_a * a1 * a1 * std::exp(a1 * x) + coef_b * a2 * a2 * std::exp(a2 * x) -
           a * std::cos(x) - b * std::sin(x);
}

}  // namespace qfg
