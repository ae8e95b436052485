#include "qfg/games.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <array>
#include <cmath>
#include <thread>

#include "qfg/detail/coeffs.hpp"
#include "qfg/rng.hpp"

namespace qfg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

double wrap_angle(double phi) {
    phi = std::fmod(phi, kTwoPi);
    return phi < 0.0 ? phi + kTwoPi : phi;
}

// <J>_W for W = (1, w_1, ..., w_n) without heap traffic
double cost_rate_raw(const Matrix& j, const Complex* w, int n) {
    std::array<Complex, kMaxDim> lifted;
    lifted[0] = Complex(1.0, 0.0);
    for (int k = 0; k < n; ++k) lifted[k + 1] = w[k];
    Complex num(0.0, 0.0);
    double den = 0.0;
    for (int a = 0; a <= n; ++a) {
        den += std::norm(lifted[a]);
        for (int b = 0; b <= n; ++b) num += std::conj(lifted[a]) * j(a, b) * lifted[b];
    }
    return num.real() / den;
}

// ---------------------------------------------------------------------------
// manifold reductions
// ---------------------------------------------------------------------------

struct TorusReduction {
    int n = 0;                       // angle dimensions (1 = circle, 2 = torus)
    RVector delta0, delta1, delta2;  // h(0,0) - h(k+1,k+1) per controlled part
    RVector rates;
    RVector moduli;
    double kappa = 0.0;
};

RVector diagonal_deltas(const Matrix& h) {
    RVector d(h.rows() - 1);
    for (int k = 0; k + 1 < h.rows(); ++k) d(k) = h(0, 0).real() - h(k + 1, k + 1).real();
    return d;
}

TorusReduction make_torus_reduction(const DetectionScheme& scheme,
                                    const ControlledHamiltonian& ham, const CVector& start) {
    if (!ham.all_diagonal())
        throw CapabilityError("torus reduction needs Hamiltonians diagonal in the working basis");
    TorusReduction red;
    red.n = scheme.dim() - 1;
    if (red.n > 2)
        throw CapabilityError("PDE reductions are limited to one- and two-dimensional tori");
    red.rates = scheme.torus_rates();
    for (int k = 1; k < red.n; ++k)
        if (std::abs(red.rates(k) - red.rates(0)) > 1e-12)
            throw CapabilityError("torus reduction needs equal coupling rates for a scalar kappa");
    red.kappa = 0.5 * red.rates(0) * red.rates(0);
    red.delta0 = diagonal_deltas(ham.h0);
    red.delta1 = diagonal_deltas(ham.h1);
    red.delta2 = diagonal_deltas(ham.h2);
    red.moduli.resize(red.n);
    for (int k = 0; k < red.n; ++k) red.moduli(k) = std::abs(start(k));
    return red;
}

double torus_cost(const Matrix& j, const RVector& moduli, const double* angles, int n) {
    std::array<Complex, kMaxDim> w;
    for (int k = 0; k < n; ++k) w[k] = std::polar(moduli(k), angles[k]);
    return cost_rate_raw(j, w.data(), n);
}

// qubit chart drift i[(h00 + h01 w) w - (h10 + h11 w)]
Complex qubit_drift(const Matrix& h, Complex w) {
    const Complex i(0.0, 1.0);
    return i * ((h(0, 0) + h(0, 1) * w) * w - (h(1, 0) + h(1, 1) * w));
}

// Pairing <b_h(w), grad S> on the sphere from the native-coordinate gradient
// (s_theta, s_phi).  Moderate latitudes use the chart centered at theta = 0;
// past tan(theta/2) > 2 the antipodal chart keeps the arithmetic well scaled
// (the pairing itself is chart independent).
double sphere_drift_pairing(const Matrix& h, double theta, double phi, double s_theta,
                            double s_phi) {
    const bool antipodal = std::tan(0.5 * theta) > 2.0;
    Matrix hh = h;
    if (antipodal) {
        hh(0, 0) = h(1, 1);
        hh(1, 1) = h(0, 0);
        hh(0, 1) = h(1, 0);
        hh(1, 0) = h(0, 1);
        theta = M_PI - theta;
        phi = -phi;
        s_theta = -s_theta;
        s_phi = -s_phi;
    }
    const double r = std::tan(0.5 * theta);
    const Complex w = std::polar(r, phi);
    const double fr = s_theta * 2.0 / (1.0 + r * r);
    const double fphi_over_r = r > 1e-14 ? s_phi / r : 0.0;
    const double c = std::cos(phi), s = std::sin(phi);
    const double sx = fr * c - fphi_over_r * s;
    const double sy = fr * s + fphi_over_r * c;
    const Complex b = qubit_drift(hh, w);
    return b.real() * sx + b.imag() * sy;
}

// ---------------------------------------------------------------------------
// interpolation of nodal fields (policy lookups)
// ---------------------------------------------------------------------------

double interp_circle(const RVector& vals, double phi) {
    const int n = static_cast<int>(vals.size());
    const double pos = wrap_angle(phi) * n / kTwoPi;
    const int i = static_cast<int>(pos) % n;
    const double f = pos - static_cast<int>(pos);
    return vals(i) * (1.0 - f) + vals((i + 1) % n) * f;
}

double interp_torus(const RVector& vals, int n1, int n2, double p1, double p2) {
    const double pos1 = wrap_angle(p1) * n1 / kTwoPi;
    const double pos2 = wrap_angle(p2) * n2 / kTwoPi;
    const int i = static_cast<int>(pos1) % n1;
    const int j = static_cast<int>(pos2) % n2;
    const double f1 = pos1 - static_cast<int>(pos1);
    const double f2 = pos2 - static_cast<int>(pos2);
    const int ip = (i + 1) % n1, jp = (j + 1) % n2;
    return vals(i * n2 + j) * (1 - f1) * (1 - f2) + vals(ip * n2 + j) * f1 * (1 - f2) +
           vals(i * n2 + jp) * (1 - f1) * f2 + vals(ip * n2 + jp) * f1 * f2;
}

double interp_sphere(const RVector& vals, const RVector& thetas, int nlon, double theta,
                     double phi) {
    const int nlat = static_cast<int>(thetas.size());
    int i = 0;
    double f1 = 0.0;
    if (theta <= thetas(0)) {
        i = 0;
    } else if (theta >= thetas(nlat - 1)) {
        i = nlat - 2;
        f1 = 1.0;
    } else {
        while (i + 1 < nlat && thetas(i + 1) < theta) ++i;
        f1 = (theta - thetas(i)) / (thetas(i + 1) - thetas(i));
    }
    const double pos2 = wrap_angle(phi) * nlon / kTwoPi;
    const int j = static_cast<int>(pos2) % nlon;
    const double f2 = pos2 - static_cast<int>(pos2);
    const int jp = (j + 1) % nlon;
    return vals(i * nlon + j) * (1 - f1) * (1 - f2) + vals((i + 1) * nlon + j) * f1 * (1 - f2) +
           vals(i * nlon + jp) * (1 - f1) * f2 + vals((i + 1) * nlon + jp) * f1 * f2;
}

// per-slice gradient tables snapshotted from a solved value function
struct GradientTables {
    ManifoldGrid grid;
    double dt = 0.0;
    std::vector<RVector> d1, d2;
    RVector thetas;  // sphere latitudes
    int nlon = 0;

    explicit GradientTables(const ValueFunction& vf) : grid(vf.grid), dt(vf.dt) {
        d1.reserve(vf.slices.size());
        d2.reserve(vf.slices.size());
        for (const GridFunction& slice : vf.slices) {
            GradientField g = gradient_field(slice);
            d1.push_back(std::move(g.d1.values));
            d2.push_back(std::move(g.d2.values));
        }
        if (grid.manifold == Manifold::Sphere2) {
            nlon = grid.sphere_nlon();
            thetas.resize(grid.sphere_nlat());
            for (int i = 0; i < grid.sphere_nlat(); ++i)
                thetas(i) = grid_point(grid, i * nlon).c1;
        }
    }

    int slice_index(double t) const {
        const int idx = static_cast<int>(std::floor(t / dt));
        return std::clamp(idx, 0, static_cast<int>(d1.size()) - 1);
    }
};

Policy make_bang_bang(const GameSpec& spec, const ValueFunction& vf) {
    auto tables = std::make_shared<GradientTables>(vf);
    const double big_u = spec.u_bound, big_v = spec.v_bound;

    if (spec.scheme.kind() == SchemeKind::TorusDiagonal) {
        const TorusReduction red = make_torus_reduction(spec.scheme, spec.hamiltonian, spec.start);
        auto fn = [tables, red, big_u, big_v](double t, const SchemeState& state) {
            const int s = tables->slice_index(t);
            double pair1 = 0.0, pair2 = 0.0;
            if (red.n == 1) {
                const double g = interp_circle(tables->d1[s], state.angles(0));
                pair1 = red.delta1(0) * g;
                pair2 = red.delta2(0) * g;
            } else {
                const auto& grid = tables->grid;
                const double g1 = interp_torus(tables->d1[s], grid.n1, grid.n2, state.angles(0),
                                               state.angles(1));
                const double g2 = interp_torus(tables->d2[s], grid.n1, grid.n2, state.angles(0),
                                               state.angles(1));
                pair1 = red.delta1(0) * g1 + red.delta1(1) * g2;
                pair2 = red.delta2(0) * g1 + red.delta2(1) * g2;
            }
            return std::make_pair(big_u * sign_plus(pair1), -big_v * sign_plus(pair2));
        };
        return Policy::bang_bang(Policy::Kind::BangBangFromValue, std::move(fn), big_u, big_v);
    }

    // qubit Pauli sphere
    const Matrix h1 = spec.hamiltonian.h1, h2 = spec.hamiltonian.h2;
    auto fn = [tables, h1, h2, big_u, big_v](double t, const SchemeState& state) {
        const int s = tables->slice_index(t);
        const ManifoldPoint p = chart_to_sphere(state.w(0));
        const double s_theta =
            interp_sphere(tables->d1[s], tables->thetas, tables->nlon, p.c1, p.c2);
        const double s_phi =
            interp_sphere(tables->d2[s], tables->thetas, tables->nlon, p.c1, p.c2);
        const double pair1 = sphere_drift_pairing(h1, p.c1, p.c2, s_theta, s_phi);
        const double pair2 = sphere_drift_pairing(h2, p.c1, p.c2, s_theta, s_phi);
        return std::make_pair(big_u * sign_plus(pair1), -big_v * sign_plus(pair2));
    };
    return Policy::bang_bang(Policy::Kind::BangBangFromValue, std::move(fn), big_u, big_v);
}

ManifoldPoint start_point(const GameSpec& spec) {
    if (spec.scheme.kind() == SchemeKind::TorusDiagonal) {
        ManifoldPoint p;
        p.c1 = wrap_angle(std::arg(spec.start(0)));
        if (spec.start.size() > 1) p.c2 = wrap_angle(std::arg(spec.start(1)));
        return p;
    }
    return chart_to_sphere(spec.start(0));
}

}  // namespace

// ---------------------------------------------------------------------------
// basic game operations
// ---------------------------------------------------------------------------

GameSpec::GameSpec(DetectionScheme scheme_, ControlledHamiltonian hamiltonian_, double u_bound_,
                   double v_bound_, Matrix running_cost_, Matrix terminal_cost_, double horizon_,
                   CVector start_)
    : scheme(std::move(scheme_)),
      hamiltonian(std::move(hamiltonian_)),
      u_bound(u_bound_),
      v_bound(v_bound_),
      running_cost(std::move(running_cost_)),
      terminal_cost(std::move(terminal_cost_)),
      horizon(horizon_),
      start(std::move(start_)) {
    if (u_bound < 0.0 || v_bound < 0.0) throw Error("GameSpec: control bounds must be >= 0");
    if (horizon <= 0.0) throw Error("GameSpec: horizon must be positive");
    require_hermitian(running_cost, "GameSpec running cost");
    require_hermitian(terminal_cost, "GameSpec terminal cost");
    if (hamiltonian.dim() != scheme.dim() || running_cost.rows() != scheme.dim() ||
        terminal_cost.rows() != scheme.dim() || start.size() != scheme.dim() - 1)
        throw DimensionError("GameSpec: dimension mismatch");
}

CVector drift_field(const Matrix& h, const ProjectiveState& w) {
    if (h.rows() != w.chart_dim() + 1) throw DimensionError("drift_field: dimension mismatch");
    const Complex i(0.0, 1.0);
    const CVector lifted = w.lift();
    const CVector hw = h * lifted;
    CVector out(w.chart_dim());
    for (int k = 0; k < w.chart_dim(); ++k) out(k) = i * (w.w(k) * hw(0) - hw(k + 1));
    return out;
}

double cost_rate(const Matrix& j, const ProjectiveState& w) {
    require_hermitian(j, "cost_rate");
    if (j.rows() != w.chart_dim() + 1) throw DimensionError("cost_rate: dimension mismatch");
    return cost_rate_raw(j, w.w.data(), w.chart_dim());
}

double pair_drift_gradient(const CVector& b, const RVector& gradient) {
    if (gradient.size() != 2 * b.size())
        throw DimensionError("pair_drift_gradient: gradient must have 2n components");
    double acc = 0.0;
    for (int k = 0; k < b.size(); ++k)
        acc += b(k).real() * gradient(2 * k) + b(k).imag() * gradient(2 * k + 1);
    return acc;
}

double isaacs_hamiltonian(const GameSpec& spec, const ProjectiveState& w,
                          const RVector& gradient) {
    const double p1 = pair_drift_gradient(drift_field(spec.hamiltonian.h1, w), gradient);
    const double p2 = pair_drift_gradient(drift_field(spec.hamiltonian.h2, w), gradient);
    return cost_rate(spec.running_cost, w) + spec.u_bound * std::abs(p1) -
           spec.v_bound * std::abs(p2);
}

CosineReduction reduce_cost_to_cosine(const Matrix& j, double modulus) {
    require_hermitian(j, "reduce_cost_to_cosine");
    if (j.rows() != 2) throw DimensionError("reduce_cost_to_cosine: expects a qubit cost");
    const double c2 = modulus * modulus;
    CosineReduction out;
    out.offset = (j(0, 0).real() + c2 * j(1, 1).real()) / (1.0 + c2);
    // 2 Re(J01 C e^{i phi}) / (1 + C^2) = R cos(phi - shift)
    const Complex amp = 2.0 * modulus * j(0, 1) / (1.0 + c2);
    out.amplitude = std::abs(amp);
    out.shift = -std::arg(amp);
    return out;
}

// ---------------------------------------------------------------------------
// policies
// ---------------------------------------------------------------------------

Policy Policy::constant(double u, double v) {
    return Policy(Kind::Constant,
                  [u, v](double, const SchemeState&) { return std::make_pair(u, v); },
                  std::abs(u), std::abs(v));
}

Policy Policy::custom(Fn fn, double u_bound, double v_bound) {
    return Policy(Kind::Custom, std::move(fn), u_bound, v_bound);
}

Policy Policy::bang_bang(Kind kind, Fn fn, double u_bound, double v_bound) {
    return Policy(kind, std::move(fn), u_bound, v_bound);
}

std::pair<double, double> Policy::operator()(double t, const SchemeState& state) const {
    auto [u, v] = fn_(t, state);
    return {std::clamp(u, -u_bound_, u_bound_), std::clamp(v, -v_bound_, v_bound_)};
}

Policy bang_bang_policy(const GameSpec& spec, const ValueFunction& value) {
    return make_bang_bang(spec, value);
}

// ---------------------------------------------------------------------------
// zero-sum solver
// ---------------------------------------------------------------------------

ManifoldGrid game_reduction_grid(const DetectionScheme& scheme,
                                 const ControlledHamiltonian& hamiltonian, int resolution,
                                 int sphere_lmax) {
    switch (scheme.kind()) {
        case SchemeKind::TorusDiagonal: {
            if (!hamiltonian.all_diagonal())
                throw CapabilityError("torus games need diagonal controlled Hamiltonians");
            const RVector& rates = scheme.torus_rates();
            const double kappa = 0.5 * rates(0) * rates(0);
            if (scheme.dim() == 2) return ManifoldGrid::circle(resolution, kappa);
            if (scheme.dim() == 3) return ManifoldGrid::torus(resolution, resolution, kappa);
            throw CapabilityError("torus games support at most two angle dimensions");
        }
        case SchemeKind::PauliSphere:
            return ManifoldGrid::sphere(sphere_lmax, 2.0);
        default:
            throw CapabilityError("no manifold reduction for this detection scheme");
    }
}

ZeroSumSolution solve_zero_sum(const GameSpec& spec, const GameSolverConfig& config) {
    const ManifoldGrid grid = game_reduction_grid(spec.scheme, spec.hamiltonian,
                                                  config.resolution, config.sphere_lmax);
    HamiltonianField field;
    GridFunction terminal;

    if (spec.scheme.kind() == SchemeKind::TorusDiagonal) {
        const TorusReduction red = make_torus_reduction(spec.scheme, spec.hamiltonian, spec.start);
        const Matrix j = spec.running_cost;
        terminal = make_grid_function(grid, [&](const ManifoldPoint& p) {
            const double angles[2] = {p.c1, p.c2};
            return torus_cost(spec.terminal_cost, red.moduli, angles, red.n);
        });
        const double big_u = spec.u_bound, big_v = spec.v_bound;
        field.eval = [red, j, big_u, big_v](const ManifoldPoint& p, double, const Covector& g) {
            const double angles[2] = {p.c1, p.c2};
            double drift0 = 0.0, pair1 = 0.0, pair2 = 0.0;
            for (int k = 0; k < red.n; ++k) {
                drift0 += red.delta0(k) * g.d(k);
                pair1 += red.delta1(k) * g.d(k);
                pair2 += red.delta2(k) * g.d(k);
            }
            return torus_cost(j, red.moduli, angles, red.n) + drift0 + big_u * std::abs(pair1) -
                   big_v * std::abs(pair2);
        };
        field.lipschitz_grad = red.delta0.cwiseAbs().sum() +
                               spec.u_bound * red.delta1.cwiseAbs().sum() +
                               spec.v_bound * red.delta2.cwiseAbs().sum();
    } else if (spec.scheme.kind() == SchemeKind::PauliSphere) {
        terminal = make_grid_function(grid, [&](const ManifoldPoint& p) {
            const Complex w = sphere_to_chart(p);
            return cost_rate_raw(spec.terminal_cost, &w, 1);
        });
        const Matrix h0 = spec.hamiltonian.h0, h1 = spec.hamiltonian.h1,
                     h2 = spec.hamiltonian.h2;
        const Matrix j = spec.running_cost;
        const double big_u = spec.u_bound, big_v = spec.v_bound;
        field.eval = [h0, h1, h2, j, big_u, big_v](const ManifoldPoint& p, double,
                                                   const Covector& g) {
            const Complex w = sphere_to_chart(p);
            const double base = sphere_drift_pairing(h0, p.c1, p.c2, g.d(0), g.d(1));
            const double pair1 = sphere_drift_pairing(h1, p.c1, p.c2, g.d(0), g.d(1));
            const double pair2 = sphere_drift_pairing(h2, p.c1, p.c2, g.d(0), g.d(1));
            return cost_rate_raw(j, &w, 1) + base + big_u * std::abs(pair1) -
                   big_v * std::abs(pair2);
        };
        field.lipschitz_grad =
            2.0 * (h0.norm() + spec.u_bound * h1.norm() + spec.v_bound * h2.norm());
    } else {
        throw CapabilityError("solve_zero_sum: unsupported scheme kind");
    }

    ValueFunction vf = mild_solve(grid, terminal, field, spec.horizon, config.pde);
    Policy policy = make_bang_bang(spec, vf);
    const double v0 = value_at(vf, 0.0, start_point(spec));
    return ZeroSumSolution{std::move(vf), std::move(policy), v0};
}

// ---------------------------------------------------------------------------
// Monte Carlo policy evaluation
// ---------------------------------------------------------------------------

McEvaluation evaluate_policy_mc(const GameSpec& spec, const Policy& policy,
                                const McConfig& config) {
    if (config.n_paths < 2 || config.dt <= 0.0)
        throw Error("evaluate_policy_mc: need n_paths >= 2 and dt > 0");
    const int n_steps = std::max(1, static_cast<int>(std::llround(spec.horizon / config.dt)));
    const double dt = spec.horizon / n_steps;
    const int n = spec.scheme.dim() - 1;
    const bool torus = spec.scheme.kind() == SchemeKind::TorusDiagonal;
    const bool pauli = spec.scheme.kind() == SchemeKind::PauliSphere;

    std::vector<double> payoffs(static_cast<std::size_t>(config.n_paths));
    std::vector<unsigned char> exited(static_cast<std::size_t>(config.n_paths), 0);

    auto run_path = [&](int path) {
        RandomStream rng(config.seed, static_cast<std::uint64_t>(path));
        SchemeState state;
        state.w = spec.start;
        double payoff = 0.0;

        if (torus) {
            const TorusReduction red =
                make_torus_reduction(spec.scheme, spec.hamiltonian, spec.start);
            state.angles.resize(n);
            state.moduli.resize(n);
            for (int k = 0; k < n; ++k) {
                state.angles(k) = wrap_angle(std::arg(spec.start(k)));
                state.moduli(k) = std::abs(spec.start(k));
            }
            for (int step = 0; step < n_steps; ++step) {
                const double t = step * dt;
                payoff +=
                    dt * torus_cost(spec.running_cost, red.moduli, state.angles.data(), red.n);
                const auto [u, v] = policy(t, state);
                for (int k = 0; k < red.n; ++k) {
                    const double drift = red.delta0(k) + u * red.delta1(k) + v * red.delta2(k);
                    state.angles(k) =
                        wrap_angle(state.angles(k) + drift * dt + red.rates(k) * rng.gauss(dt));
                }
            }
            payoff += torus_cost(spec.terminal_cost, red.moduli, state.angles.data(), red.n);
        } else if (pauli) {
            Complex w = spec.start(0);
            const Matrix &h0 = spec.hamiltonian.h0, &h1 = spec.hamiltonian.h1,
                         &h2 = spec.hamiltonian.h2;
            const Complex i(0.0, 1.0);
            for (int step = 0; step < n_steps; ++step) {
                const double t = step * dt;
                payoff += dt * cost_rate_raw(spec.running_cost, &w, 1);
                state.w(0) = w;
                const auto [u, v] = policy(t, state);
                const Complex h00 = h0(0, 0) + u * h1(0, 0) + v * h2(0, 0);
                const Complex h01 = h0(0, 1) + u * h1(0, 1) + v * h2(0, 1);
                const Complex h10 = h0(1, 0) + u * h1(1, 0) + v * h2(1, 0);
                const Complex h11 = h0(1, 1) + u * h1(1, 1) + v * h2(1, 1);
                const Complex drift = i * ((h00 + h01 * w) * w - (h10 + h11 * w));
                const double d1 = rng.gauss(dt), d2 = rng.gauss(dt), d3 = rng.gauss(dt);
                const Complex w2 = w * w;
                w += drift * dt + (1.0 - w2) * d1 + i * (1.0 + w2) * d2 - 2.0 * w * d3;
                if (std::abs(w.real()) > config.chart_guard ||
                    std::abs(w.imag()) > config.chart_guard) {
                    exited[path] = 1;
                    break;
                }
            }
            payoff += cost_rate_raw(spec.terminal_cost, &w, 1);
        } else {
            // generic projective dynamics
            ProjectiveState w{spec.start};
            RVector dy(spec.scheme.channels());
            for (int step = 0; step < n_steps; ++step) {
                const double t = step * dt;
                payoff += dt * cost_rate_raw(spec.running_cost, w.w.data(), n);
                state.w = w.w;
                const auto [u, v] = policy(t, state);
                const Matrix h = spec.hamiltonian.at(u, v);
                for (int j = 0; j < dy.size(); ++j) dy(j) = rng.gauss(dt);
                try {
                    w = step_projective(w, h, spec.scheme, dy, dt, config.noise_kind,
                                        config.chart_guard);
                } catch (const ChartError&) {
                    exited[path] = 1;
                    break;
                }
            }
            payoff += cost_rate_raw(spec.terminal_cost, w.w.data(), n);
        }
        payoffs[path] = payoff;
    };

    const int nthreads = std::max(1, std::min(config.threads, config.n_paths));
    if (nthreads == 1) {
        for (int p = 0; p < config.n_paths; ++p) run_path(p);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (config.n_paths + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const int begin = t * chunk, end = std::min(config.n_paths, begin + chunk);
            if (begin < end)
                pool.emplace_back([&run_path, begin, end] {
                    for (int p = begin; p < end; ++p) run_path(p);
                });
        }
        for (auto& th : pool) th.join();
    }

    McEvaluation out;
    double mean = 0.0;
    int exits = 0;
    for (int p = 0; p < config.n_paths; ++p) {
        mean += payoffs[p];
        exits += exited[p];
    }
    mean /= config.n_paths;
    double var = 0.0;
    for (int p = 0; p < config.n_paths; ++p) var += (payoffs[p] - mean) * (payoffs[p] - mean);
    var /= (config.n_paths - 1.0);
    out.mean = mean;
    out.std_error = std::sqrt(var / config.n_paths);
    out.chart_exit_fraction = static_cast<double>(exits) / config.n_paths;
    out.flagged = out.chart_exit_fraction >= 0.01;
    return out;
}

// ---------------------------------------------------------------------------
// two coupled atoms
// ---------------------------------------------------------------------------

TwoAtomSpec::TwoAtomSpec(int local_dim_, Matrix h1_, Matrix h2_, Matrix interaction_,
                         double u_bound_, double v_bound_, Matrix j1, Matrix f1, Matrix j2,
                         Matrix f2, double horizon_)
    : local_dim(local_dim_),
      h1(std::move(h1_)),
      h2(std::move(h2_)),
      interaction(std::move(interaction_)),
      u_bound(u_bound_),
      v_bound(v_bound_),
      running_cost_1(std::move(j1)),
      terminal_cost_1(std::move(f1)),
      running_cost_2(std::move(j2)),
      terminal_cost_2(std::move(f2)),
      horizon(horizon_) {
    const int d = local_dim;
    if (d < 2 || d * d > kMaxDim) throw DimensionError("TwoAtomSpec: local dimension out of range");
    require_hermitian(h1, "TwoAtomSpec h1");
    require_hermitian(h2, "TwoAtomSpec h2");
    require_hermitian(interaction, "TwoAtomSpec interaction");
    require_hermitian(running_cost_1, "TwoAtomSpec J^I");
    require_hermitian(terminal_cost_1, "TwoAtomSpec F^I");
    require_hermitian(running_cost_2, "TwoAtomSpec J^II");
    require_hermitian(terminal_cost_2, "TwoAtomSpec F^II");
    if (h1.rows() != d || h2.rows() != d || interaction.rows() != d * d ||
        running_cost_1.rows() != d * d || running_cost_2.rows() != d * d ||
        terminal_cost_1.rows() != d * d || terminal_cost_2.rows() != d * d)
        throw DimensionError("TwoAtomSpec: dimension mismatch");
    if (u_bound < 0.0 || v_bound < 0.0) throw Error("TwoAtomSpec: control bounds must be >= 0");
}

int two_atom_index(int j, int k, int d) {
    if (j == 0 && k == 0) throw DimensionError("two_atom_index: (0,0) is the chart divisor");
    return j * d + k - 1;
}

Matrix two_atom_hamiltonian(const TwoAtomSpec& spec, double u, double v) {
    const int d = spec.local_dim;
    const Matrix eye = Matrix::Identity(d, d);
    // row-major vectorization: (h1 x 1) vec W = vec(h1 W),
    // (1 x h2^T) vec W = vec(W h2)
    return u * Eigen::kroneckerProduct(spec.h1, eye).eval() +
           v * Eigen::kroneckerProduct(eye, spec.h2.transpose()).eval() + spec.interaction;
}

CVector two_atom_drift(const TwoAtomSpec& spec, double u, double v, const CVector& w) {
    const int d = spec.local_dim;
    if (w.size() != d * d - 1) throw DimensionError("two_atom_drift: wrong chart dimension");

    Matrix lifted(d, d);  // W with W(0,0) = 1
    lifted(0, 0) = 1.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            if (j || k) lifted(j, k) = w(two_atom_index(j, k, d));

    const Matrix p1 = spec.h1 * lifted;  // sum_p h1_{jp} W_{pk}
    const Matrix p2 = lifted * spec.h2;  // sum_p h2_{pk} W_{jp}
    Matrix aw(d, d);                     // sum_pq A_{jk,pq} W_{pq}
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            Complex acc(0, 0);
            for (int p = 0; p < d; ++p)
                for (int q = 0; q < d; ++q)
                    acc += spec.interaction(j * d + k, p * d + q) * lifted(p, q);
            aw(j, k) = acc;
        }

    const Complex i(0.0, 1.0);
    const Complex at00 = u * p1(0, 0) + v * p2(0, 0) + aw(0, 0);
    CVector out(d * d - 1);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            if (j == 0 && k == 0) continue;
            const Complex at = u * p1(j, k) + v * p2(j, k) + aw(j, k);
            out(two_atom_index(j, k, d)) = i * (lifted(j, k) * at00 - at);
        }
    return out;
}

// ---------------------------------------------------------------------------
// non-zero-sum fields and solver
// ---------------------------------------------------------------------------

CoupledField build_nonzero_sum_fields(const NonzeroSumGameSpec& spec, const ManifoldGrid& grid) {
    const double big_u = spec.u_bound, big_v = spec.v_bound;
    CoupledField out;
    (void)grid;

    if (spec.scheme.kind() == SchemeKind::TorusDiagonal) {
        const TorusReduction red = make_torus_reduction(spec.scheme, spec.hamiltonian, spec.start);
        const Matrix j1 = spec.running_cost_1, j2 = spec.running_cost_2;
        out.eval = [red, j1, j2, big_u, big_v](const ManifoldPoint& p, const Covector& g1,
                                               const Covector& g2) {
            const double angles[2] = {p.c1, p.c2};
            double pair1 = 0.0, pair2 = 0.0;
            for (int k = 0; k < red.n; ++k) {
                pair1 += red.delta1(k) * g1.d(k);
                pair2 += red.delta2(k) * g2.d(k);
            }
            const double u = big_u * sign_plus(pair1);
            const double v = big_v * sign_plus(pair2);
            double drift1 = 0.0, drift2 = 0.0;
            for (int k = 0; k < red.n; ++k) {
                const double dk = red.delta0(k) + u * red.delta1(k) + v * red.delta2(k);
                drift1 += dk * g1.d(k);
                drift2 += dk * g2.d(k);
            }
            return std::make_pair(torus_cost(j1, red.moduli, angles, red.n) + drift1,
                                  torus_cost(j2, red.moduli, angles, red.n) + drift2);
        };
        out.lipschitz_grad = red.delta0.cwiseAbs().sum() + big_u * red.delta1.cwiseAbs().sum() +
                             big_v * red.delta2.cwiseAbs().sum();
        return out;
    }
    if (spec.scheme.kind() == SchemeKind::PauliSphere) {
        const Matrix h0 = spec.hamiltonian.h0, h1 = spec.hamiltonian.h1, h2 = spec.hamiltonian.h2;
        const Matrix j1 = spec.running_cost_1, j2 = spec.running_cost_2;
        out.eval = [h0, h1, h2, j1, j2, big_u, big_v](const ManifoldPoint& p, const Covector& g1,
                                                      const Covector& g2) {
            const Complex w = sphere_to_chart(p);
            const double u =
                big_u * sign_plus(sphere_drift_pairing(h1, p.c1, p.c2, g1.d(0), g1.d(1)));
            const double v =
                big_v * sign_plus(sphere_drift_pairing(h2, p.c1, p.c2, g2.d(0), g2.d(1)));
            auto value = [&](const Matrix& j, const Covector& g) {
                double acc = cost_rate_raw(j, &w, 1);
                acc += sphere_drift_pairing(h0, p.c1, p.c2, g.d(0), g.d(1));
                acc += u * sphere_drift_pairing(h1, p.c1, p.c2, g.d(0), g.d(1));
                acc += v * sphere_drift_pairing(h2, p.c1, p.c2, g.d(0), g.d(1));
                return acc;
            };
            return std::make_pair(value(j1, g1), value(j2, g2));
        };
        out.lipschitz_grad = 2.0 * (h0.norm() + big_u * h1.norm() + big_v * h2.norm());
        return out;
    }
    throw CapabilityError("build_nonzero_sum_fields: unsupported scheme kind");
}

NonzeroSumSolution solve_nonzero_sum(const NonzeroSumGameSpec& spec,
                                     const GameSolverConfig& config) {
    const ManifoldGrid grid = game_reduction_grid(spec.scheme, spec.hamiltonian,
                                                  config.resolution, config.sphere_lmax);
    const CoupledField field = build_nonzero_sum_fields(spec, grid);

    auto terminal_for = [&](const Matrix& f) {
        if (spec.scheme.kind() == SchemeKind::TorusDiagonal) {
            const TorusReduction red =
                make_torus_reduction(spec.scheme, spec.hamiltonian, spec.start);
            return make_grid_function(grid, [&](const ManifoldPoint& p) {
                const double angles[2] = {p.c1, p.c2};
                return torus_cost(f, red.moduli, angles, red.n);
            });
        }
        return make_grid_function(grid, [&](const ManifoldPoint& p) {
            const Complex w = sphere_to_chart(p);
            return cost_rate_raw(f, &w, 1);
        });
    };

    auto [s1, s2] =
        vector_mild_solve(grid, terminal_for(spec.terminal_cost_1),
                          terminal_for(spec.terminal_cost_2), field, spec.horizon, config.pde);
    return {std::move(s1), std::move(s2)};
}

}  // namespace qfg
