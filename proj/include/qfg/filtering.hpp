#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "qfg/linalg.hpp"
#include "qfg/scheme.hpp"

namespace qfg {

/// Affine control law H(u, v) = h0 + u h1 + v h2 with Hermitian parts.
struct ControlledHamiltonian {
    Matrix h0, h1, h2;

    ControlledHamiltonian(Matrix h0_, Matrix h1_, Matrix h2_);
    static ControlledHamiltonian constant(const Matrix& h);

    int dim() const { return static_cast<int>(h0.rows()); }
    Matrix at(double u, double v) const { return h0 + u * h1 + v * h2; }
    bool all_diagonal(double tol = kHermitianTol) const;
};

struct TrajectoryConfig {
    double dt = 1e-3;
    double horizon = 1.0;
    std::uint64_t seed = 0;
    NoiseKind noise_kind = NoiseKind::Innovation;
    double noise_scale = 1.0;   // 0 switches the integrator into ODE mode
    double chart_guard = 1e8;
};

/// Current state handed to a feedback policy: chart coordinates for the
/// projective schemes, angles (plus conserved moduli) on the torus.
struct SchemeState {
    CVector w;
    RVector angles;
    RVector moduli;
};

/// Feedback map (t, state) -> (u, v).
using FeedbackPolicy = std::function<std::pair<double, double>(double, const SchemeState&)>;

inline std::pair<double, double> zero_policy(double, const SchemeState&) { return {0.0, 0.0}; }

struct Trajectory {
    std::vector<double> times;
    std::vector<CVector> states;       // projective coordinates per time node
    std::vector<RVector> angles;       // torus schemes only
    RVector moduli;                    // torus schemes only: conserved |w_k|
    std::vector<RVector> increments;   // driving-noise increments, one per step
    std::vector<double> u, v;          // controls applied on each step
    NoiseKind noise_kind = NoiseKind::Innovation;
    bool truncated = false;            // chart guard was hit
    double exit_time = -1.0;

    int steps() const { return static_cast<int>(increments.size()); }
};

/// One Euler-Maruyama step of the linear filtering equation
///   d chi = -[i H chi + 1/2 sum_j L_j^* L_j chi] dt + sum_j L_j chi dY^j.
CVector step_linear_chi(const CVector& chi, const Matrix& h, const DetectionScheme& scheme,
                        const RVector& dy, double dt);

/// One Euler-Maruyama step of the filtering equation in chart coordinates,
/// driven by increments of the chosen noise kind.  Throws ChartError when
/// the step leaves |w|_inf <= chart_guard.
ProjectiveState step_projective(const ProjectiveState& w, const Matrix& h,
                                const DetectionScheme& scheme, const RVector& dy, double dt,
                                NoiseKind kind = NoiseKind::Output, double chart_guard = 1e8);

/// Fast path for the qubit Pauli scheme:
///   dw = i[(h00 + h01 w) w - (h10 + h11 w)] dt
///        + (1 - w^2) dY^1 + i (1 + w^2) dY^2 - 2 w dY^3.
/// The dt terms are identical for output and innovation increments.
Complex step_pauli_qubit(Complex w, const Matrix& h, const std::array<double, 3>& dy,
                         double dt, double chart_guard = 1e8);

/// dB^j = dY^j - <L_j + L_j^*>_W dt per channel.
RVector innovation_increment(const DetectionScheme& scheme, const ProjectiveState& w,
                             const RVector& dy, double dt);

/// Torus angle step phi_k += (h00 - hkk) dt + r_k dY^k, reduced mod 2 pi.
/// Moduli |w_k| are conserved exactly because they are never touched.
RVector step_torus_angles(const RVector& phi, const Matrix& h_diag, const RVector& rates,
                          const RVector& dy, double dt);

/// Complex-coordinate Euler step of one decoupled torus mode,
///   dw = i (h00 - hkk) w dt - 1/2 r^2 w dt + i r w dY.
/// Unlike the angle form this only conserves |w| up to an O(dt) drift;
/// kept as a fast scalar path for integrator diagnostics.
Complex step_torus_mode(Complex w, double drift_rate, double r, double dy, double dt);

/// Euclidean-column scheme step
///   dw_k = i[w_k (H W)_0 - (H W)_k] dt + n w_k dt + dY^{k,1} + i dY^{k,2}.
ProjectiveState step_euclidean(const ProjectiveState& w, const Matrix& h, const RVector& dy,
                               double dt);

/// Integrate a full controlled path.  Deterministic given (seed, config).
/// Increments are drawn N(0, dt) in the chosen driving-noise convention;
/// chart exit truncates the path and is recorded, not thrown.
Trajectory simulate_trajectory(const DetectionScheme& scheme, const ControlledHamiltonian& ham,
                               const FeedbackPolicy& policy, const CVector& start_w,
                               const TrajectoryConfig& config);

}  // namespace qfg
