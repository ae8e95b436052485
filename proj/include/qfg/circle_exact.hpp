#pragma once

#include "qfg/grid.hpp"

namespace qfg {

/// Long-run average payoff per unit time of the circle drift game with
/// advantage alpha and running cost cos(phi), via the boundary-value
/// reduction f' - alpha f + cos(phi) - lambda = 0, f(0) = f(pi) = 0:
///   lambda = alpha^2/(alpha^2+1) * (e^{alpha pi}+1)/(e^{alpha pi}-1).
/// Odd in alpha; the small-alpha limit is 2 alpha / pi.
double circle_game_lambda(double alpha);

struct StationaryCircleSolution {
    double lambda = 0.0;
    GridFunction profile;     // even periodic S, S(0) = 0
    double boundary_residual = 0.0;  // |f(pi)| at the solved lambda
};

/// Numerical route to the same lambda: integrate the reduced ODE on
/// [0, pi] and root-find lambda from the far boundary condition, then
/// reconstruct the even periodic profile by quadrature.
StationaryCircleSolution stationary_solve_circle(double alpha, int nodes = 1024);

/// Closed-form solution of the discounted stationary problem
///   1/2 S'' - alpha S' + cos(phi) - delta S = 0 on (0, pi),
///   S'(0) = S'(pi) = 0,
/// as S = A e^{a1 phi} + B e^{a2 phi} + a cos(phi) + b sin(phi), extended
/// evenly to the circle.
struct DiscountedCircleSolution {
    double alpha = 0.0, delta = 0.0;
    double a1 = 0.0, a2 = 0.0;  // alpha +- sqrt(alpha^2 + 2 delta)
    double a = 0.0, b = 0.0;    // trigonometric particular solution
    double coef_a = 0.0, coef_b = 0.0;  // A, B from the boundary system

    GridFunction profile;

    double value_at(double phi) const;
    double derivative_at(double phi) const;
    double second_derivative_at(double phi) const;
};

/// Throws Error for alpha = 0, delta <= 0, or a singular boundary system.
DiscountedCircleSolution discounted_solve_circle(double alpha, double delta, int nodes = 1024);

}  // namespace qfg
