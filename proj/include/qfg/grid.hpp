#pragma once

#include <functional>
#include <memory>

#include "qfg/linalg.hpp"

namespace qfg {

enum class Manifold { Circle, Torus2, Sphere2 };

const char* to_string(Manifold m);

/// Discretization of one of the supported manifolds together with the
/// diffusion scale kappa: the process generator is kappa * Laplace-Beltrami.
/// Callers pick kappa to match the detection scheme (2 for the Pauli and
/// Gell-Mann arrangements, r^2/2 per channel on the torus).
struct ManifoldGrid {
    Manifold manifold = Manifold::Circle;
    int n1 = 0;    // circle nodes / torus first axis
    int n2 = 0;    // torus second axis
    int lmax = 0;  // sphere spherical-harmonic cutoff
    double kappa = 1.0;

    static ManifoldGrid circle(int n, double kappa);
    static ManifoldGrid torus(int n1, int n2, double kappa);
    static ManifoldGrid sphere(int lmax, double kappa);

    int node_count() const;
    int spectral_count() const;
    int sphere_nlat() const { return lmax + 1; }
    int sphere_nlon() const { return 2 * (lmax + 1); }

    bool operator==(const ManifoldGrid& o) const = default;
};

/// A point in native coordinates: angle phi on the circle, angles
/// (phi1, phi2) on the torus, colatitude/longitude (theta, phi) on the sphere.
struct ManifoldPoint {
    double c1 = 0.0;
    double c2 = 0.0;
};

ManifoldPoint grid_point(const ManifoldGrid& grid, int idx);

/// Scalar field sampled on the grid nodes.
struct GridFunction {
    ManifoldGrid grid;
    RVector values;

    GridFunction() = default;
    GridFunction(ManifoldGrid g, RVector v);

    double max_abs() const { return values.size() ? values.cwiseAbs().maxCoeff() : 0.0; }
};

GridFunction make_grid_function(const ManifoldGrid& grid,
                                const std::function<double(const ManifoldPoint&)>& f);

/// Spectral coefficients: FFT bins on circle/torus, packed (l, m >= 0)
/// spherical-harmonic coefficients on the sphere.
struct SpectralFunction {
    ManifoldGrid grid;
    CVector coeffs;
};

SpectralFunction to_spectral(const GridFunction& f);
GridFunction to_nodal(const SpectralFunction& f);

/// Heat semigroup exp(t kappa Laplace-Beltrami) by spectral multiplication;
/// exact on band-limited data, hence S_t S_s = S_{t+s} to rounding.
GridFunction heat_apply(const ManifoldGrid& grid, double t, const GridFunction& f);
void heat_apply_in_place(double t, SpectralFunction& f);

/// Nodal derivative fields in native coordinates plus the metric norm
/// ||grad f||_M.  d1 is d/dphi (circle, torus axis 1) or d/dtheta (sphere);
/// d2 is the second torus axis or d/dphi on the sphere.
struct GradientField {
    GridFunction d1;
    GridFunction d2;
    GridFunction metric_norm;
};
GradientField gradient_field(const GridFunction& f);
GradientField gradient_field(const SpectralFunction& f);

/// Point evaluation of a spectral representation (trigonometric /
/// spherical-harmonic synthesis).
double eval_at(const SpectralFunction& f, const ManifoldPoint& p);
/// Derivatives in native coordinates at a point.
Eigen::Vector2d gradient_at(const SpectralFunction& f, const ManifoldPoint& p);

/// Covector of f at a point: (f_phi, 0) on the circle, (f_phi1, f_phi2) on
/// the torus, and stereographic-chart components (f_x, f_y) on the sphere,
/// together with the metric norm; on the sphere
/// ||grad f||_M^2 = ((1+x^2+y^2)^2/4)(f_x^2+f_y^2) in chart coordinates.
struct MetricGradient {
    Eigen::Vector2d covector = Eigen::Vector2d::Zero();
    double norm = 0.0;
};
MetricGradient metric_gradient(const GridFunction& f, const ManifoldPoint& p);

/// Stereographic chart helpers for the sphere (unit sphere, chart centered
/// at theta = 0): w = tan(theta/2) e^{i phi}.
Complex sphere_to_chart(const ManifoldPoint& p);
ManifoldPoint chart_to_sphere(Complex w);

}  // namespace qfg
