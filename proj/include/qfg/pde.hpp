#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "qfg/grid.hpp"

namespace qfg {

/// Gradient data handed to Hamiltonian fields: derivative components in
/// native coordinates plus the precomputed metric norm ||grad S||_M.
struct Covector {
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    double metric_norm = 0.0;
};

/// Hamiltonian field H(x, S(x), grad S(x)) of the backward equation
///   dS/dt + kappa Lap_LB S + H = 0.
/// The value argument supports discount terms (-delta S); pure drift-control
/// fields ignore it.  The Lipschitz constants document the contraction
/// budget of the mild iteration.
struct HamiltonianField {
    std::function<double(const ManifoldPoint&, double, const Covector&)> eval;
    double lipschitz_grad = 0.0;
    double lipschitz_value = 0.0;
};

struct SolverConfig {
    double dt = 1e-3;
    double tolerance = 1e-9;
    int max_iterations = 200;
};

/// Backward-in-time value function on [0, T]: slices[i] holds S(t_i) with
/// t_i = i dt, the last slice being the terminal condition.
struct ValueFunction {
    ManifoldGrid grid;
    double horizon = 0.0;
    double dt = 0.0;
    std::vector<GridFunction> slices;
    int iterations = 0;
    std::vector<double> residuals;  // sup-norm update per fixed-point sweep

    int time_count() const { return static_cast<int>(slices.size()); }
    /// Clamped index of the slice governing time t.
    int time_index(double t) const;
};

double value_at(const ValueFunction& vf, double t, const ManifoldPoint& p);

/// Mild-form solver: reverses time and iterates
///   f^{(m+1)}_tau = S_tau Y + int_0^tau S_{tau-s} H(., f^{(m)}_s, grad f^{(m)}_s) ds
/// with left-endpoint quadrature at the solver dt, until the sup-norm update
/// drops below tolerance.  Throws ConvergenceError (with the residual
/// history) if max_iterations is exhausted.
ValueFunction mild_solve(const ManifoldGrid& grid, const GridFunction& terminal,
                         const HamiltonianField& field, double horizon,
                         const SolverConfig& config = {});

struct FdConfig {
    double dt = 0.0;      // 0 = choose from the stability bound
    double safety = 0.9;  // fraction of the stability limit
};

/// Explicit finite-difference marching of the same backward equation, kept
/// deliberately independent of the spectral path as a cross-check.  On the
/// sphere the azimuthal diffusion is applied exactly per latitude ring
/// (Fourier multiplication), which removes the pole stiffness from the
/// stability bound; the polar stencil uses ghost values across the poles.
ValueFunction fd_solve(const ManifoldGrid& grid, const GridFunction& terminal,
                       const HamiltonianField& field, double horizon, const FdConfig& config = {});

/// Both players' Hamiltonian values from both gradients, for the coupled
/// (non-zero-sum) system.
struct CoupledField {
    std::function<std::pair<double, double>(const ManifoldPoint&, const Covector&,
                                            const Covector&)>
        eval;
    double lipschitz_grad = 0.0;
};

/// Simultaneous mild fixed-point iteration for the pair (S^I, S^II).
std::pair<ValueFunction, ValueFunction> vector_mild_solve(const ManifoldGrid& grid,
                                                          const GridFunction& terminal1,
                                                          const GridFunction& terminal2,
                                                          const CoupledField& field,
                                                          double horizon,
                                                          const SolverConfig& config = {});

/// One row of the smoothing sweep: ratio = ||grad S_t f||_inf sqrt(t) / ||f||_inf.
struct SmoothingRow {
    double t = 0.0;
    double ratio = 0.0;
};

/// Reported (not asserted) smoothing-estimate table over a time sweep.
std::vector<SmoothingRow> smoothing_estimate_check(const ManifoldGrid& grid,
                                                   const GridFunction& f,
                                                   const std::vector<double>& times);

}  // namespace qfg
