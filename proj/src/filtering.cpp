#include "qfg/filtering.hpp"

#include <cmath>

#include "qfg/detail/coeffs.hpp"
#include "qfg/rng.hpp"

namespace qfg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

void check_channel_count(const DetectionScheme& scheme, const RVector& dy, const char* what) {
    if (dy.size() != scheme.channels())
        throw DimensionError(std::string(what) + ": expected " +
                             std::to_string(scheme.channels()) + " channel increments");
}

double wrap_angle(double phi) {
    phi = std::fmod(phi, kTwoPi);
    return phi < 0.0 ? phi + kTwoPi : phi;
}

}  // namespace

ControlledHamiltonian::ControlledHamiltonian(Matrix h0_, Matrix h1_, Matrix h2_)
    : h0(std::move(h0_)), h1(std::move(h1_)), h2(std::move(h2_)) {
    require_hermitian(h0, "ControlledHamiltonian h0");
    require_hermitian(h1, "ControlledHamiltonian h1");
    require_hermitian(h2, "ControlledHamiltonian h2");
    if (h1.rows() != h0.rows() || h2.rows() != h0.rows())
        throw DimensionError("ControlledHamiltonian: mixed dimensions");
}

ControlledHamiltonian ControlledHamiltonian::constant(const Matrix& h) {
    const Matrix zero = Matrix::Zero(h.rows(), h.cols());
    return ControlledHamiltonian(h, zero, zero);
}

bool ControlledHamiltonian::all_diagonal(double tol) const {
    for (const Matrix* m : {&h0, &h1, &h2}) {
        Matrix off = *m;
        off.diagonal().setZero();
        if (off.cwiseAbs().maxCoeff() > tol) return false;
    }
    return true;
}

CVector step_linear_chi(const CVector& chi, const Matrix& h, const DetectionScheme& scheme,
                        const RVector& dy, double dt) {
    check_channel_count(scheme, dy, "step_linear_chi");
    if (h.rows() != chi.size() || (scheme.channels() > 0 && scheme.dim() != chi.size()))
        throw DimensionError("step_linear_chi: dimension mismatch");
    const Complex i(0.0, 1.0);
    CVector next = chi - i * (h * chi) * dt;
    if (scheme.channels() > 0) {
        next -= 0.5 * (scheme.damping() * chi) * dt;
        for (int j = 0; j < scheme.channels(); ++j)
            next += (scheme.coupling(j) * chi) * dy(j);
    }
    return next;
}

ProjectiveState step_projective(const ProjectiveState& w, const Matrix& h,
                                const DetectionScheme& scheme, const RVector& dy, double dt,
                                NoiseKind kind, double chart_guard) {
    check_channel_count(scheme, dy, "step_projective");
    if (scheme.dim() != w.chart_dim() + 1 || h.rows() != scheme.dim())
        throw DimensionError("step_projective: dimension mismatch");
    const auto ops = detail::SchemeOps<double>::from(scheme, h);
    const auto coeffs = detail::projective_coeffs<double>(ops, w.w, kind);
    CVector next = w.w + coeffs.drift * dt;
    for (int j = 0; j < scheme.channels(); ++j) next += coeffs.noise.col(j) * dy(j);
    if (next.cwiseAbs().maxCoeff() > chart_guard)
        throw ChartError("step_projective: chart guard exceeded");
    return ProjectiveState{std::move(next)};
}

Complex step_pauli_qubit(Complex w, const Matrix& h, const std::array<double, 3>& dy,
                         double dt, double chart_guard) {
    if (h.rows() != 2 || h.cols() != 2)
        throw DimensionError("step_pauli_qubit: Hamiltonian must be 2x2");
    const Complex i(0.0, 1.0);
    const Complex drift = i * ((h(0, 0) + h(0, 1) * w) * w - (h(1, 0) + h(1, 1) * w));
    const Complex w2 = w * w;
    Complex next = w + drift * dt + (1.0 - w2) * dy[0] + i * (1.0 + w2) * dy[1] - 2.0 * w * dy[2];
    if (std::abs(next.real()) > chart_guard || std::abs(next.imag()) > chart_guard)
        throw ChartError("step_pauli_qubit: chart guard exceeded");
    return next;
}

RVector innovation_increment(const DetectionScheme& scheme, const ProjectiveState& w,
                             const RVector& dy, double dt) {
    check_channel_count(scheme, dy, "innovation_increment");
    const CVector lifted = w.lift();
    if (lifted.size() != scheme.dim())
        throw DimensionError("innovation_increment: dimension mismatch");
    const double nrm2 = lifted.squaredNorm();
    RVector db(dy.size());
    for (int j = 0; j < scheme.channels(); ++j) {
        const double qexp = lifted.dot(scheme.quadrature(j) * lifted).real() / nrm2;
        db(j) = dy(j) - qexp * dt;
    }
    return db;
}

RVector step_torus_angles(const RVector& phi, const Matrix& h_diag, const RVector& rates,
                          const RVector& dy, double dt) {
    const int n = static_cast<int>(phi.size());
    if (h_diag.rows() != n + 1) throw DimensionError("step_torus_angles: H dimension mismatch");
    if (rates.size() != n || dy.size() != n)
        throw DimensionError("step_torus_angles: channel count mismatch");
    Matrix off = h_diag;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > kHermitianTol)
        throw SchemeError("step_torus_angles: Hamiltonian is not diagonal in the working basis");
    RVector next(n);
    const double h00 = h_diag(0, 0).real();
    for (int k = 0; k < n; ++k)
        next(k) = wrap_angle(phi(k) + (h00 - h_diag(k + 1, k + 1).real()) * dt + rates(k) * dy(k));
    return next;
}

Complex step_torus_mode(Complex w, double drift_rate, double r, double dy, double dt) {
    const Complex i(0.0, 1.0);
    return w + (i * drift_rate - 0.5 * r * r) * w * dt + i * r * w * dy;
}

ProjectiveState step_euclidean(const ProjectiveState& w, const Matrix& h, const RVector& dy,
                               double dt) {
    const int n = w.chart_dim();
    if (h.rows() != n + 1) throw DimensionError("step_euclidean: H dimension mismatch");
    if (dy.size() != 2 * n) throw DimensionError("step_euclidean: expected 2n increments");
    const Complex i(0.0, 1.0);
    const CVector lifted = w.lift();
    const CVector hw = h * lifted;
    CVector next(n);
    for (int k = 0; k < n; ++k) {
        const Complex drift = i * (w.w(k) * hw(0) - hw(k + 1)) + static_cast<double>(n) * w.w(k);
        next(k) = w.w(k) + drift * dt + Complex(dy(2 * k), dy(2 * k + 1));
    }
    return ProjectiveState{std::move(next)};
}

Trajectory simulate_trajectory(const DetectionScheme& scheme, const ControlledHamiltonian& ham,
                               const FeedbackPolicy& policy, const CVector& start_w,
                               const TrajectoryConfig& config) {
    if (config.dt <= 0.0 || config.horizon <= 0.0)
        throw Error("simulate_trajectory: dt and horizon must be positive");
    if (ham.dim() != scheme.dim())
        throw DimensionError("simulate_trajectory: Hamiltonian/scheme dimension mismatch");
    const int n = scheme.dim() - 1;
    if (start_w.size() != n)
        throw DimensionError("simulate_trajectory: start state has wrong chart dimension");

    const int n_steps = std::max(1, static_cast<int>(std::llround(config.horizon / config.dt)));
    const int nch = scheme.channels();
    const bool torus = scheme.kind() == SchemeKind::TorusDiagonal;

    Trajectory traj;
    traj.noise_kind = config.noise_kind;
    traj.times.reserve(n_steps + 1);
    traj.increments.reserve(n_steps);
    traj.u.reserve(n_steps);
    traj.v.reserve(n_steps);

    SchemeState state;
    state.w = start_w;
    if (torus) {
        state.angles.resize(n);
        state.moduli.resize(n);
        for (int k = 0; k < n; ++k) {
            state.angles(k) = wrap_angle(std::arg(start_w(k)));
            state.moduli(k) = std::abs(start_w(k));
        }
        traj.moduli = state.moduli;
        traj.angles.push_back(state.angles);
    }
    traj.states.push_back(state.w);
    traj.times.push_back(0.0);

    RandomStream rng(config.seed);
    RVector dy(nch);
    const FeedbackPolicy& pol = policy ? policy : FeedbackPolicy(zero_policy);

    for (int step = 0; step < n_steps; ++step) {
        const double t = step * config.dt;
        const auto [u, v] = pol(t, state);
        const Matrix h = ham.at(u, v);
        for (int j = 0; j < nch; ++j)
            dy(j) = config.noise_scale * rng.gauss(config.dt);

        try {
            if (torus) {
                state.angles = step_torus_angles(state.angles, h, scheme.torus_rates(), dy,
                                                 config.dt);
                for (int k = 0; k < n; ++k)
                    state.w(k) = state.moduli(k) * std::polar(1.0, state.angles(k));
            } else {
                state.w = step_projective(ProjectiveState{state.w}, h, scheme, dy, config.dt,
                                          config.noise_kind, config.chart_guard)
                              .w;
            }
        } catch (const ChartError&) {
            traj.truncated = true;
            traj.exit_time = t;
            break;
        }

        traj.u.push_back(u);
        traj.v.push_back(v);
        traj.increments.push_back(dy);
        traj.times.push_back((step + 1) * config.dt);
        traj.states.push_back(state.w);
        if (torus) traj.angles.push_back(state.angles);
    }
    return traj;
}

}  // namespace qfg
