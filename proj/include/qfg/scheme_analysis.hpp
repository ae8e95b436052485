#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "qfg/linalg.hpp"
#include "qfg/scheme.hpp"

namespace qfg {

/// Drift vector and quadratic variation of the filtering diffusion at a
/// chart point, in real coordinates ordered (x_1, y_1, ..., x_n, y_n).
/// The generator is drift . grad + 1/2 sum_ij qv_ij d2_ij.
struct LocalCoefficients {
    RVector drift;
    RMatrix quadratic_variation;
    NoiseKind noise_kind = NoiseKind::Output;
};

LocalCoefficients local_coefficients(const DetectionScheme& scheme, const Matrix& h,
                                     const ProjectiveState& w, NoiseKind kind);

struct IsothermalReport {
    bool is_isothermal = false;
    double scale = 0.0;  // a in tr(L_j L_k) = a delta_jk
    std::vector<std::pair<int, int>> failing_pairs;  // 0-based channel indices
    bool first_order_cancellation = false;           // all couplings traceless
};

/// Tests whether three Hermitian qubit couplings produce an isothermal
/// diffusion: the couplings must be traceless and trace-orthogonal with a
/// common scale a.  Tracelessness alone is reported separately as the
/// first-order cancellation condition.
IsothermalReport check_isothermal(const std::vector<Matrix>& couplings, double tol = 1e-9);

/// Pauli scheme, H = 0: max of |drift|_inf and |QV - (1+|w|^2)^2 I|_inf at
/// the chart point w.  Evaluated in extended precision so the residual
/// reflects the algebra, not double rounding of ~(1+|w|^2)^2 magnitudes.
double sphere_generator_residual(Complex w, NoiseKind kind = NoiseKind::Output);

/// Gell-Mann qutrit scheme, H = 0, complex-form diffusion coefficients
/// a^{k lbar} = sum_j sigma^k_j conj(sigma^l_j) against the reference
/// projective-Laplacian coefficients
///   2 (1 + |w|^2) [(1 + |w_k|^2) delta_kl + w_k conj(w_l) (1 - delta_kl)].
/// The SDE-derived values are the ground truth; `discrepancy` is diagnostic.
struct ProjectiveGeneratorReport {
    Eigen::Matrix2cd sde;
    Eigen::Matrix2cd reference;
    double discrepancy = 0.0;           // |sde - reference|_inf
    double drift_residual = 0.0;        // output-form |drift|_inf
    double holomorphic_residual = 0.0;  // |sum_j sigma^k_j sigma^l_j|_inf
    double innovation_gap = 0.0;        // |drift_output - drift_innovation|_inf
};
ProjectiveGeneratorReport projective_generator_report(const Eigen::Vector2cd& w);
/// max(drift_residual, innovation_gap, discrepancy).
double projective_generator_residual(const Eigen::Vector2cd& w);

/// True iff drift and quadratic variation agree between the output and
/// innovation conventions at w to the given tolerance.
bool innovation_invariance_check(const DetectionScheme& scheme, const Matrix& h,
                                 const ProjectiveState& w, double tol = 1e-12);

/// Test function with analytic derivatives, over the scheme's natural real
/// coordinates: (x_1, y_1, ...) on a chart, angles on the torus.
struct TestFunction {
    std::function<double(const RVector&)> value;
    std::function<RVector(const RVector&)> gradient;
    std::function<RMatrix(const RVector&)> hessian;
};

struct McGeneratorResult {
    double estimate = 0.0;   // (E[f(X_h)] - f(x)) / h
    double analytic = 0.0;   // drift . grad f + 1/2 tr(QV hess f)
    double std_error = 0.0;  // Monte Carlo standard error of `estimate`
};

/// Weak single-step check of the generator: simulates n_samples
/// Euler-Maruyama steps of size h from w.  Contract:
/// |estimate - analytic| <= 3 std_error + O(h).
McGeneratorResult mc_generator_check(const DetectionScheme& scheme, const Matrix& h,
                                     const TestFunction& f, const ProjectiveState& w,
                                     double h_step, int n_samples, std::uint64_t seed,
                                     NoiseKind kind = NoiseKind::Output, int threads = 1);

}  // namespace qfg
