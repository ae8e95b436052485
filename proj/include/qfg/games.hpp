#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>

#include "qfg/filtering.hpp"
#include "qfg/pde.hpp"
#include "qfg/scheme.hpp"

namespace qfg {

/// Everything defining one zero-sum game instance: detection scheme,
/// controlled Hamiltonian H(u,v) = H0 + u H1 + v H2 with u in [-U, U] and
/// v in [-V, V], Hermitian running/terminal cost operators, horizon, and
/// the initial chart point.  V = 0 encodes a pure control problem.
struct GameSpec {
    DetectionScheme scheme;
    ControlledHamiltonian hamiltonian;
    double u_bound = 0.0;
    double v_bound = 0.0;
    Matrix running_cost;
    Matrix terminal_cost;
    double horizon = 1.0;
    CVector start;

    GameSpec(DetectionScheme scheme_, ControlledHamiltonian hamiltonian_, double u_bound_,
             double v_bound_, Matrix running_cost_, Matrix terminal_cost_, double horizon_,
             CVector start_);
};

/// Hamiltonian drift of the chart coordinates, i [w_k (H W)_0 - (H W)_k].
CVector drift_field(const Matrix& h, const ProjectiveState& w);

/// Running cost <J>_W at the chart point w.
double cost_rate(const Matrix& j, const ProjectiveState& w);

/// Chart pairing sum_k Re(b_k) p_{x_k} + Im(b_k) p_{y_k} with the gradient
/// in real chart coordinates ordered (x_1, y_1, ...).
double pair_drift_gradient(const CVector& b, const RVector& gradient);

/// sgn with the tie sgn(0) := +1.
inline double sign_plus(double x) { return x >= 0.0 ? 1.0 : -1.0; }

/// <J>_W + U |<b_1(w), p>| - V |<b_2(w), p>| (H0 enters the PDE separately).
double isaacs_hamiltonian(const GameSpec& spec, const ProjectiveState& w,
                          const RVector& gradient);

/// Normalization of a cos(phi) + b sin(phi) to R cos(phi - shift).
struct CosineReduction {
    double amplitude = 0.0;
    double shift = 0.0;
    double offset = 0.0;  // phi-independent part of the cost
};
/// Circle-game cost <J>_{(1, C e^{i phi})} written as offset + R cos(phi - shift).
CosineReduction reduce_cost_to_cosine(const Matrix& j, double modulus);

/// Feedback policy with declared control bounds; evaluation clamps.
class Policy {
public:
    enum class Kind { BangBangFromValue, Constant, Custom };
    using Fn = std::function<std::pair<double, double>(double, const SchemeState&)>;

    static Policy constant(double u, double v);
    static Policy custom(Fn fn, double u_bound, double v_bound);
    static Policy bang_bang(Kind kind, Fn fn, double u_bound, double v_bound);

    std::pair<double, double> operator()(double t, const SchemeState& state) const;
    Kind kind() const { return kind_; }
    double u_bound() const { return u_bound_; }
    double v_bound() const { return v_bound_; }

private:
    Policy(Kind kind, Fn fn, double u_bound, double v_bound)
        : kind_(kind), fn_(std::move(fn)), u_bound_(u_bound), v_bound_(v_bound) {}
    Kind kind_;
    Fn fn_;
    double u_bound_ = 0.0, v_bound_ = 0.0;
};

/// Bang-bang feedback extracted from a solved value function:
/// u = U sgn<b_1(w), grad S>, v = -V sgn<b_2(w), grad S>, with per-slice
/// gradient tables interpolated in space and held piecewise constant in time.
Policy bang_bang_policy(const GameSpec& spec, const ValueFunction& value);

struct GameSolverConfig {
    SolverConfig pde;
    int resolution = 256;  // circle nodes / torus nodes per axis
    int sphere_lmax = 32;
};

struct ZeroSumSolution {
    ValueFunction value;
    Policy policy;
    double value_at_start = 0.0;
};

/// Composes the manifold reduction of the game (torus-diagonal schemes with
/// diagonal Hamiltonians reduce to the circle or the 2-torus, the qubit
/// Pauli scheme to the sphere with kappa = 2) with the mild solver, and
/// extracts the bang-bang feedback u = U sgn<b_1, grad S>, v = -V sgn<b_2, grad S>.
/// Throws CapabilityError for unsupported reductions.
ZeroSumSolution solve_zero_sum(const GameSpec& spec, const GameSolverConfig& config = {});

struct McConfig {
    double dt = 1e-3;
    int n_paths = 10000;
    std::uint64_t seed = 0;
    int threads = 1;
    NoiseKind noise_kind = NoiseKind::Innovation;
    double chart_guard = 1e8;
};

struct McEvaluation {
    double mean = 0.0;
    double std_error = 0.0;
    double chart_exit_fraction = 0.0;
    bool flagged = false;  // chart exits reached 1% of paths
};

/// Monte Carlo payoff int <J> dt + <F>(T) of the filtering dynamics under
/// the feedback policy.  Deterministic given the seed; truncated paths
/// integrate up to the exit and pay the terminal cost there.
McEvaluation evaluate_policy_mc(const GameSpec& spec, const Policy& policy,
                                const McConfig& config);

// ---------------------------------------------------------------------------
// two coupled atoms
// ---------------------------------------------------------------------------

/// Two atoms of local dimension d with controlled local Hamiltonians
/// u h1 (x) 1 and v 1 (x) h2, interaction A on C^{d^2}, and per-player costs.
struct TwoAtomSpec {
    int local_dim = 2;
    Matrix h1, h2;              // d x d, Hermitian
    Matrix interaction;         // d^2 x d^2, Hermitian
    double u_bound = 0.0, v_bound = 0.0;
    Matrix running_cost_1, terminal_cost_1;  // player I, on C^{d^2}
    Matrix running_cost_2, terminal_cost_2;  // player II
    double horizon = 1.0;

    TwoAtomSpec(int local_dim_, Matrix h1_, Matrix h2_, Matrix interaction_, double u_bound_,
                double v_bound_, Matrix j1, Matrix f1, Matrix j2, Matrix f2, double horizon_);
};

/// Chart index map for the tensor chart w_{jk} = chi_{jk}/chi_{00}:
/// components stored row-major with (0,0) omitted.
int two_atom_index(int j, int k, int d);

/// Combined operator u h1 (x) 1 + v 1 (x) h2^T + A acting on row-major
/// vectorized states.
Matrix two_atom_hamiltonian(const TwoAtomSpec& spec, double u, double v);

/// Drift of the tensor chart coordinates under controls (u, v):
///   i sum_p [w_jk (u h1_{0p} w_{p0} + v h2_{p0} w_{0p})
///            - (u h1_{jp} w_{pk} + v h2_{pk} w_{jp})]
///   + i sum_pq (w_jk A_{00,pq} - A_{jk,pq}) w_pq.
CVector two_atom_drift(const TwoAtomSpec& spec, double u, double v, const CVector& w);

// ---------------------------------------------------------------------------
// non-zero-sum games on reduced manifolds
// ---------------------------------------------------------------------------

struct NonzeroSumGameSpec {
    DetectionScheme scheme;
    ControlledHamiltonian hamiltonian;
    double u_bound = 0.0, v_bound = 0.0;
    Matrix running_cost_1, terminal_cost_1;
    Matrix running_cost_2, terminal_cost_2;
    double horizon = 1.0;
    CVector start;
};

/// The coupled pair of Hamiltonian evaluators for the vector solver, with
/// u = U sgn of the player-I gradient functional and v = V sgn of the
/// player-II one.  Requires the same manifold reductions as solve_zero_sum.
CoupledField build_nonzero_sum_fields(const NonzeroSumGameSpec& spec, const ManifoldGrid& grid);

struct NonzeroSumSolution {
    ValueFunction value1, value2;
};
NonzeroSumSolution solve_nonzero_sum(const NonzeroSumGameSpec& spec,
                                     const GameSolverConfig& config = {});

/// The manifold grid a game reduces to (shared by the zero-sum and
/// non-zero-sum solvers).
ManifoldGrid game_reduction_grid(const DetectionScheme& scheme,
                                 const ControlledHamiltonian& hamiltonian, int resolution,
                                 int sphere_lmax);

}  // namespace qfg
