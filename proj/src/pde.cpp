#include "qfg/pde.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>

namespace qfg {

namespace {

int steps_for(double horizon, double dt) {
    if (dt <= 0.0 || horizon <= 0.0) throw Error("solver: dt and horizon must be positive");
    return std::max(1, static_cast<int>(std::llround(horizon / dt)));
}

// nodal Hamiltonian field of one iterate slice
RVector evaluate_field(const HamiltonianField& field, const GridFunction& slice) {
    const GradientField grad = gradient_field(slice);
    const ManifoldGrid& grid = slice.grid;
    RVector out(grid.node_count());
    Covector cov;
    for (int idx = 0; idx < grid.node_count(); ++idx) {
        cov.d << grad.d1.values(idx), grad.d2.values(idx);
        cov.metric_norm = grad.metric_norm.values(idx);
        out(idx) = field.eval(grid_point(grid, idx), slice.values(idx), cov);
    }
    return out;
}

}  // namespace

int ValueFunction::time_index(double t) const {
    if (slices.empty()) return 0;
    const int idx = static_cast<int>(std::floor(t / dt));
    return std::clamp(idx, 0, time_count() - 1);
}

double value_at(const ValueFunction& vf, double t, const ManifoldPoint& p) {
    return eval_at(to_spectral(vf.slices[vf.time_index(t)]), p);
}

// ---------------------------------------------------------------------------
// mild solver
// ---------------------------------------------------------------------------

ValueFunction mild_solve(const ManifoldGrid& grid, const GridFunction& terminal,
                         const HamiltonianField& field, double horizon,
                         const SolverConfig& config) {
    if (!(terminal.grid == grid)) throw DimensionError("mild_solve: terminal grid mismatch");
    const int nt = steps_for(horizon, config.dt);
    const double dt = horizon / nt;

    // tau-indexed iterate, tau = T - t, u[0] = terminal data
    std::vector<GridFunction> prev(nt + 1, GridFunction(grid, RVector::Zero(grid.node_count())));
    prev[0] = terminal;
    {
        // starting iterate: pure heat flow
        SpectralFunction spec = to_spectral(terminal);
        for (int k = 1; k <= nt; ++k) {
            heat_apply_in_place(dt, spec);
            prev[k] = to_nodal(spec);
        }
    }

    std::vector<GridFunction> curr = prev;
    std::vector<double> residuals;
    int sweeps = 0;
    bool converged = false;
    while (sweeps < config.max_iterations) {
        ++sweeps;
        double residual = 0.0;
        curr[0] = terminal;
        for (int k = 1; k <= nt; ++k) {
            const RVector h_prev = evaluate_field(field, prev[k - 1]);
            GridFunction stage(grid, curr[k - 1].values + dt * h_prev);
            SpectralFunction spec = to_spectral(stage);
            heat_apply_in_place(dt, spec);
            curr[k] = to_nodal(spec);
            residual = std::max(residual, (curr[k].values - prev[k].values).cwiseAbs().maxCoeff());
        }
        residuals.push_back(residual);
        std::swap(prev, curr);
        if (residual < config.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("mild_solve: fixed-point iteration did not reach tolerance",
                               residuals);

    ValueFunction out;
    out.grid = grid;
    out.horizon = horizon;
    out.dt = dt;
    out.iterations = sweeps;
    out.residuals = std::move(residuals);
    out.slices.reserve(nt + 1);
    for (int i = 0; i <= nt; ++i) out.slices.push_back(std::move(prev[nt - i]));
    return out;
}

// ---------------------------------------------------------------------------
// vector (coupled) mild solver
// ---------------------------------------------------------------------------

std::pair<ValueFunction, ValueFunction> vector_mild_solve(const ManifoldGrid& grid,
                                                          const GridFunction& terminal1,
                                                          const GridFunction& terminal2,
                                                          const CoupledField& field,
                                                          double horizon,
                                                          const SolverConfig& config) {
    if (!(terminal1.grid == grid) || !(terminal2.grid == grid))
        throw DimensionError("vector_mild_solve: terminal grid mismatch");
    const int nt = steps_for(horizon, config.dt);
    const double dt = horizon / nt;
    const int nn = grid.node_count();

    auto heat_step = [&](const GridFunction& f) {
        SpectralFunction spec = to_spectral(f);
        heat_apply_in_place(dt, spec);
        return to_nodal(spec);
    };

    std::vector<GridFunction> prev1(nt + 1, GridFunction(grid, RVector::Zero(nn))), prev2 = prev1;
    prev1[0] = terminal1;
    prev2[0] = terminal2;
    for (int k = 1; k <= nt; ++k) {
        prev1[k] = heat_step(prev1[k - 1]);
        prev2[k] = heat_step(prev2[k - 1]);
    }

    auto curr1 = prev1;
    auto curr2 = prev2;
    std::vector<double> residuals;
    int sweeps = 0;
    bool converged = false;
    while (sweeps < config.max_iterations) {
        ++sweeps;
        double residual = 0.0;
        curr1[0] = terminal1;
        curr2[0] = terminal2;
        for (int k = 1; k <= nt; ++k) {
            const GradientField g1 = gradient_field(prev1[k - 1]);
            const GradientField g2 = gradient_field(prev2[k - 1]);
            RVector h1(nn), h2(nn);
            Covector c1, c2;
            for (int idx = 0; idx < nn; ++idx) {
                c1.d << g1.d1.values(idx), g1.d2.values(idx);
                c1.metric_norm = g1.metric_norm.values(idx);
                c2.d << g2.d1.values(idx), g2.d2.values(idx);
                c2.metric_norm = g2.metric_norm.values(idx);
                const auto [v1, v2] = field.eval(grid_point(grid, idx), c1, c2);
                h1(idx) = v1;
                h2(idx) = v2;
            }
            curr1[k] = heat_step(GridFunction(grid, curr1[k - 1].values + dt * h1));
            curr2[k] = heat_step(GridFunction(grid, curr2[k - 1].values + dt * h2));
            residual = std::max(residual,
                                (curr1[k].values - prev1[k].values).cwiseAbs().maxCoeff());
            residual = std::max(residual,
                                (curr2[k].values - prev2[k].values).cwiseAbs().maxCoeff());
        }
        residuals.push_back(residual);
        std::swap(prev1, curr1);
        std::swap(prev2, curr2);
        if (residual < config.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("vector_mild_solve: iteration did not reach tolerance", residuals);

    auto pack = [&](std::vector<GridFunction>& slices_tau) {
        ValueFunction vf;
        vf.grid = grid;
        vf.horizon = horizon;
        vf.dt = dt;
        vf.iterations = sweeps;
        vf.residuals = residuals;
        vf.slices.reserve(nt + 1);
        for (int i = 0; i <= nt; ++i) vf.slices.push_back(std::move(slices_tau[nt - i]));
        return vf;
    };
    return {pack(prev1), pack(prev2)};
}

// ---------------------------------------------------------------------------
// finite-difference solver
// ---------------------------------------------------------------------------

namespace {

struct SphereFdGeometry {
    RVector theta;      // nlat ascending
    RVector sin_theta;  // per latitude
    RVector cot_theta;
    int nlat = 0, nlon = 0;
};

SphereFdGeometry sphere_geometry(const ManifoldGrid& grid) {
    SphereFdGeometry geo;
    geo.nlat = grid.sphere_nlat();
    geo.nlon = grid.sphere_nlon();
    geo.theta.resize(geo.nlat);
    geo.sin_theta.resize(geo.nlat);
    geo.cot_theta.resize(geo.nlat);
    for (int i = 0; i < geo.nlat; ++i) {
        geo.theta(i) = grid_point(grid, i * geo.nlon).c1;
        geo.sin_theta(i) = std::sin(geo.theta(i));
        geo.cot_theta(i) = std::cos(geo.theta(i)) / geo.sin_theta(i);
    }
    return geo;
}

double fd_stability_limit(const ManifoldGrid& grid, const SphereFdGeometry* geo) {
    const double kappa = grid.kappa;
    switch (grid.manifold) {
        case Manifold::Circle: {
            const double h = 2.0 * M_PI / grid.n1;
            return h * h / (2.0 * kappa);
        }
        case Manifold::Torus2: {
            const double h1 = 2.0 * M_PI / grid.n1, h2 = 2.0 * M_PI / grid.n2;
            return 1.0 / (2.0 * kappa * (1.0 / (h1 * h1) + 1.0 / (h2 * h2)));
        }
        default: {
            // azimuthal diffusion handled exactly, only the polar stencil counts
            double limit = 1e30;
            for (int i = 0; i < geo->nlat; ++i) {
                const double t = geo->theta(i);
                const double hm = (i == 0) ? 2.0 * t : t - geo->theta(i - 1);
                const double hp =
                    (i == geo->nlat - 1) ? 2.0 * (M_PI - t) : geo->theta(i + 1) - t;
                const double diag =
                    kappa * (2.0 / (hm * hp) + std::abs(geo->cot_theta(i)) / std::min(hm, hp));
                limit = std::min(limit, 1.0 / diag);
            }
            return limit;
        }
    }
}

}  // namespace

ValueFunction fd_solve(const ManifoldGrid& grid, const GridFunction& terminal,
                       const HamiltonianField& field, double horizon, const FdConfig& config) {
    if (!(terminal.grid == grid)) throw DimensionError("fd_solve: terminal grid mismatch");
    SphereFdGeometry geo;
    if (grid.manifold == Manifold::Sphere2) geo = sphere_geometry(grid);
    const double dt_max = fd_stability_limit(grid, &geo);

    double dt = config.dt;
    if (dt <= 0.0) {
        dt = config.safety * dt_max;
    } else if (dt > dt_max) {
        throw CflError("fd_solve: requested dt " + std::to_string(dt) +
                       " exceeds the stability bound " + std::to_string(dt_max));
    }
    const int nt = std::max(1, static_cast<int>(std::ceil(horizon / dt)));
    dt = horizon / nt;

    const double kappa = grid.kappa;
    const int nn = grid.node_count();

    ValueFunction out;
    out.grid = grid;
    out.horizon = horizon;
    out.dt = dt;
    out.iterations = nt;
    out.slices.assign(nt + 1, GridFunction(grid, RVector::Zero(nn)));
    out.slices[nt] = terminal;

    RVector next(nn);
    Covector cov;
    Eigen::FFT<double> fft;

    for (int step = nt; step > 0; --step) {
        const RVector& s = out.slices[step].values;
        switch (grid.manifold) {
            case Manifold::Circle: {
                const int n = grid.n1;
                const double h = 2.0 * M_PI / n;
                for (int i = 0; i < n; ++i) {
                    const double sm = s((i + n - 1) % n), sp = s((i + 1) % n);
                    const double lap = (sp - 2.0 * s(i) + sm) / (h * h);
                    const double grad = (sp - sm) / (2.0 * h);
                    cov.d << grad, 0.0;
                    cov.metric_norm = std::abs(grad);
                    next(i) = s(i) + dt * (kappa * lap +
                                           field.eval(grid_point(grid, i), s(i), cov));
                }
                break;
            }
            case Manifold::Torus2: {
                const int n1 = grid.n1, n2 = grid.n2;
                const double h1 = 2.0 * M_PI / n1, h2 = 2.0 * M_PI / n2;
                for (int i = 0; i < n1; ++i)
                    for (int j = 0; j < n2; ++j) {
                        const int idx = i * n2 + j;
                        const double sm1 = s(((i + n1 - 1) % n1) * n2 + j);
                        const double sp1 = s(((i + 1) % n1) * n2 + j);
                        const double sm2 = s(i * n2 + (j + n2 - 1) % n2);
                        const double sp2 = s(i * n2 + (j + 1) % n2);
                        const double lap = (sp1 - 2.0 * s(idx) + sm1) / (h1 * h1) +
                                           (sp2 - 2.0 * s(idx) + sm2) / (h2 * h2);
                        cov.d << (sp1 - sm1) / (2.0 * h1), (sp2 - sm2) / (2.0 * h2);
                        cov.metric_norm = cov.d.norm();
                        next(idx) = s(idx) + dt * (kappa * lap +
                                                   field.eval(grid_point(grid, idx), s(idx), cov));
                    }
                break;
            }
            default: {
                const int nlat = geo.nlat, nlon = geo.nlon;
                const double hphi = 2.0 * M_PI / nlon;
                // polar stencil + Hamiltonian, explicit
                for (int i = 0; i < nlat; ++i) {
                    const double t = geo.theta(i);
                    const double hm = (i == 0) ? 2.0 * t : t - geo.theta(i - 1);
                    const double hp = (i == nlat - 1) ? 2.0 * (M_PI - t) : geo.theta(i + 1) - t;
                    for (int k = 0; k < nlon; ++k) {
                        const int idx = i * nlon + k;
                        const int kop = (k + nlon / 2) % nlon;  // across-pole longitude
                        const double sm = (i == 0) ? s(0 * nlon + kop) : s((i - 1) * nlon + k);
                        const double sp =
                            (i == nlat - 1) ? s((nlat - 1) * nlon + kop) : s((i + 1) * nlon + k);
                        const double d2 = 2.0 * (sm / (hm * (hm + hp)) - s(idx) / (hm * hp) +
                                                 sp / (hp * (hm + hp)));
                        const double d1 = sp * hm / (hp * (hm + hp)) -
                                          sm * hp / (hm * (hm + hp)) +
                                          s(idx) * (hp - hm) / (hm * hp);
                        const double sphim = s(i * nlon + (k + nlon - 1) % nlon);
                        const double sphip = s(i * nlon + (k + 1) % nlon);
                        const double dphi = (sphip - sphim) / (2.0 * hphi);
                        cov.d << d1, dphi;
                        cov.metric_norm = std::hypot(d1, dphi / geo.sin_theta(i));
                        next(idx) =
                            s(idx) + dt * (kappa * (d2 + geo.cot_theta(i) * d1) +
                                           field.eval({t, hphi * k}, s(idx), cov));
                    }
                }
                // azimuthal diffusion, exact per ring
                CVector ring(nlon), freq(nlon);
                for (int i = 0; i < nlat; ++i) {
                    const double scale = kappa * dt / (geo.sin_theta(i) * geo.sin_theta(i));
                    for (int k = 0; k < nlon; ++k) ring(k) = next(i * nlon + k);
                    fft.fwd(freq, ring);
                    for (int m = 0; m < nlon; ++m) {
                        const double f = (m <= nlon / 2) ? m : m - nlon;
                        freq(m) *= std::exp(-scale * f * f);
                    }
                    fft.inv(ring, freq);
                    for (int k = 0; k < nlon; ++k) next(i * nlon + k) = ring(k).real();
                }
            }
        }
        out.slices[step - 1] = GridFunction(grid, next);
    }
    return out;
}

// ---------------------------------------------------------------------------
// smoothing report
// ---------------------------------------------------------------------------

std::vector<SmoothingRow> smoothing_estimate_check(const ManifoldGrid& grid,
                                                   const GridFunction& f,
                                                   const std::vector<double>& times) {
    if (!(f.grid == grid)) throw DimensionError("smoothing_estimate_check: grid mismatch");
    const double denom = f.max_abs();
    std::vector<SmoothingRow> rows;
    rows.reserve(times.size());
    for (double t : times) {
        if (t <= 0.0) throw Error("smoothing_estimate_check: times must be positive");
        const GridFunction flowed = heat_apply(grid, t, f);
        const GradientField grad = gradient_field(flowed);
        rows.push_back({t, grad.metric_norm.max_abs() * std::sqrt(t) / denom});
    }
    return rows;
}

}  // namespace qfg
