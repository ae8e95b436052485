#include "qfg/grid.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace qfg {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

int signed_freq(int m, int n) { return m <= n / 2 ? m : m - n; }

CVector fft_forward(const CVector& x) {
    Eigen::FFT<double> fft;
    CVector out(x.size());
    fft.fwd(out, x);
    return out;
}

CVector fft_inverse(const CVector& x) {
    Eigen::FFT<double> fft;
    CVector out(x.size());
    fft.inv(out, x);
    return out;
}

// ---------------------------------------------------------------------------
// spherical-harmonic machinery
// ---------------------------------------------------------------------------

// Fully normalized associated Legendre values P_lm(x) with int P^2 dx = 1,
// packed as p(l, m) = l(l+1)/2 + m for 0 <= m <= l <= lmax.
int packed_index(int l, int m) { return l * (l + 1) / 2 + m; }

void legendre_row(int lmax, double x, double* plm, double* dplm_dtheta) {
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - x * x));
    plm[packed_index(0, 0)] = std::sqrt(0.5);
    for (int m = 1; m <= lmax; ++m)
        plm[packed_index(m, m)] =
            -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * sin_theta * plm[packed_index(m - 1, m - 1)];
    for (int m = 0; m < lmax; ++m)
        plm[packed_index(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * plm[packed_index(m, m)];
    for (int m = 0; m <= lmax; ++m)
        for (int l = m + 2; l <= lmax; ++l) {
            const double a = std::sqrt((4.0 * l * l - 1.0) / (double(l) * l - double(m) * m));
            const double b = std::sqrt((4.0 * (l - 1.0) * (l - 1.0) - 1.0) /
                                       ((l - 1.0) * (l - 1.0) - double(m) * m));
            plm[packed_index(l, m)] =
                a * (x * plm[packed_index(l - 1, m)] - plm[packed_index(l - 2, m)] / b);
        }
    if (dplm_dtheta) {
        // sin(theta) dP_lm/dtheta = l x P_lm - sqrt((2l+1)/(2l-1) (l^2-m^2)) P_{l-1,m}
        for (int m = 0; m <= lmax; ++m)
            for (int l = m; l <= lmax; ++l) {
                double v = l * x * plm[packed_index(l, m)];
                if (l > m)
                    v -= std::sqrt((2.0 * l + 1.0) / (2.0 * l - 1.0) *
                                   (double(l) * l - double(m) * m)) *
                         plm[packed_index(l - 1, m)];
                dplm_dtheta[packed_index(l, m)] = v / sin_theta;
            }
    }
}

struct SphereBasis {
    int lmax;
    int nlat, nlon, np;
    RVector theta;   // ascending colatitudes (Gauss-Legendre nodes)
    RVector weight;  // quadrature weights in x = cos(theta)
    RMatrix plm;     // nlat x np
    RMatrix dplm;    // nlat x np, d/dtheta

    explicit SphereBasis(int lmax_) : lmax(lmax_) {
        nlat = lmax + 1;
        nlon = 2 * (lmax + 1);
        np = (lmax + 1) * (lmax + 2) / 2;

        // Golub-Welsch nodes/weights from the Legendre Jacobi matrix
        RMatrix jacobi = RMatrix::Zero(nlat, nlat);
        for (int k = 1; k < nlat; ++k) {
            const double beta = k / std::sqrt(4.0 * k * k - 1.0);
            jacobi(k - 1, k) = beta;
            jacobi(k, k - 1) = beta;
        }
        Eigen::SelfAdjointEigenSolver<RMatrix> eig(jacobi);
        const RVector nodes = eig.eigenvalues();  // ascending x
        theta.resize(nlat);
        weight.resize(nlat);
        for (int i = 0; i < nlat; ++i) {
            const int j = nlat - 1 - i;  // descending x = ascending theta
            theta(i) = std::acos(std::clamp(nodes(j), -1.0, 1.0));
            weight(i) = 2.0 * eig.eigenvectors()(0, j) * eig.eigenvectors()(0, j);
        }

        plm.resize(nlat, np);
        dplm.resize(nlat, np);
        std::vector<double> row(np), drow(np);
        for (int i = 0; i < nlat; ++i) {
            legendre_row(lmax, std::cos(theta(i)), row.data(), drow.data());
            for (int p = 0; p < np; ++p) {
                plm(i, p) = row[p];
                dplm(i, p) = drow[p];
            }
        }
    }
};

const SphereBasis& sphere_basis(int lmax) {
    static std::map<int, std::unique_ptr<SphereBasis>> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto& slot = cache[lmax];
    if (!slot) slot = std::make_unique<SphereBasis>(lmax);
    return *slot;
}

// longitude DFT per latitude ring: modes(i, m) = (1/nlon) sum_k f(i,k) e^{-im phi_k}
Eigen::MatrixXcd ring_analysis(const SphereBasis& basis, const RVector& values) {
    Eigen::MatrixXcd modes(basis.nlat, basis.lmax + 1);
    Eigen::FFT<double> fft;
    CVector ring(basis.nlon), freq(basis.nlon);
    for (int i = 0; i < basis.nlat; ++i) {
        for (int k = 0; k < basis.nlon; ++k) ring(k) = values(i * basis.nlon + k);
        fft.fwd(freq, ring);
        for (int m = 0; m <= basis.lmax; ++m) modes(i, m) = freq(m) / double(basis.nlon);
    }
    return modes;
}

RVector ring_synthesis(const SphereBasis& basis, const Eigen::MatrixXcd& modes) {
    RVector values(basis.nlat * basis.nlon);
    Eigen::FFT<double> fft;
    CVector freq = CVector::Zero(basis.nlon), ring(basis.nlon);
    for (int i = 0; i < basis.nlat; ++i) {
        freq.setZero();
        for (int m = 0; m <= basis.lmax; ++m) {
            freq(m) = modes(i, m);
            if (m > 0) freq(basis.nlon - m) = std::conj(modes(i, m));
        }
        fft.inv(ring, freq);
        for (int k = 0; k < basis.nlon; ++k)
            values(i * basis.nlon + k) = ring(k).real() * basis.nlon;
    }
    return values;
}

CVector sphere_analysis(const SphereBasis& basis, const RVector& values) {
    const Eigen::MatrixXcd modes = ring_analysis(basis, values);
    CVector coeffs = CVector::Zero(basis.np);
    for (int m = 0; m <= basis.lmax; ++m)
        for (int l = m; l <= basis.lmax; ++l) {
            Complex acc(0, 0);
            for (int i = 0; i < basis.nlat; ++i)
                acc += basis.weight(i) * basis.plm(i, packed_index(l, m)) * modes(i, m);
            coeffs(packed_index(l, m)) = acc;
        }
    return coeffs;
}

// synthesis of the field, of its theta-derivative, or of its phi-derivative
RVector sphere_synthesis(const SphereBasis& basis, const CVector& coeffs, bool use_dtheta,
                         bool multiply_im) {
    const RMatrix& table = use_dtheta ? basis.dplm : basis.plm;
    Eigen::MatrixXcd modes = Eigen::MatrixXcd::Zero(basis.nlat, basis.lmax + 1);
    for (int m = 0; m <= basis.lmax; ++m)
        for (int l = m; l <= basis.lmax; ++l) {
            const Complex c = coeffs(packed_index(l, m));
            if (c == Complex(0, 0)) continue;
            for (int i = 0; i < basis.nlat; ++i) modes(i, m) += c * table(i, packed_index(l, m));
        }
    if (multiply_im)
        for (int m = 0; m <= basis.lmax; ++m) modes.col(m) *= Complex(0, double(m));
    return ring_synthesis(basis, modes);
}

}  // namespace

// ---------------------------------------------------------------------------
// grids
// ---------------------------------------------------------------------------

const char* to_string(Manifold m) {
    switch (m) {
        case Manifold::Circle: return "circle";
        case Manifold::Torus2: return "torus2";
        default: return "sphere2";
    }
}

ManifoldGrid ManifoldGrid::circle(int n, double kappa) {
    if (n < 4 || n % 2 != 0) throw Error("circle grid needs an even node count >= 4");
    if (kappa <= 0.0) throw Error("diffusion scale kappa must be positive");
    ManifoldGrid g;
    g.manifold = Manifold::Circle;
    g.n1 = n;
    g.kappa = kappa;
    return g;
}

ManifoldGrid ManifoldGrid::torus(int n1, int n2, double kappa) {
    if (n1 < 4 || n2 < 4 || n1 % 2 != 0 || n2 % 2 != 0)
        throw Error("torus grid needs even node counts >= 4");
    if (kappa <= 0.0) throw Error("diffusion scale kappa must be positive");
    ManifoldGrid g;
    g.manifold = Manifold::Torus2;
    g.n1 = n1;
    g.n2 = n2;
    g.kappa = kappa;
    return g;
}

ManifoldGrid ManifoldGrid::sphere(int lmax, double kappa) {
    if (lmax < 2) throw Error("sphere grid needs lmax >= 2");
    if (kappa <= 0.0) throw Error("diffusion scale kappa must be positive");
    ManifoldGrid g;
    g.manifold = Manifold::Sphere2;
    g.lmax = lmax;
    g.kappa = kappa;
    return g;
}

int ManifoldGrid::node_count() const {
    switch (manifold) {
        case Manifold::Circle: return n1;
        case Manifold::Torus2: return n1 * n2;
        default: return sphere_nlat() * sphere_nlon();
    }
}

int ManifoldGrid::spectral_count() const {
    switch (manifold) {
        case Manifold::Circle: return n1;
        case Manifold::Torus2: return n1 * n2;
        default: return (lmax + 1) * (lmax + 2) / 2;
    }
}

ManifoldPoint grid_point(const ManifoldGrid& grid, int idx) {
    switch (grid.manifold) {
        case Manifold::Circle:
            return {kTwoPi * idx / grid.n1, 0.0};
        case Manifold::Torus2:
            return {kTwoPi * (idx / grid.n2) / grid.n1, kTwoPi * (idx % grid.n2) / grid.n2};
        default: {
            const auto& basis = sphere_basis(grid.lmax);
            return {basis.theta(idx / basis.nlon), kTwoPi * (idx % basis.nlon) / basis.nlon};
        }
    }
}

GridFunction::GridFunction(ManifoldGrid g, RVector v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.node_count())
        throw DimensionError("GridFunction: value count does not match the grid");
}

GridFunction make_grid_function(const ManifoldGrid& grid,
                                const std::function<double(const ManifoldPoint&)>& f) {
    RVector values(grid.node_count());
    for (int idx = 0; idx < grid.node_count(); ++idx) values(idx) = f(grid_point(grid, idx));
    return GridFunction(grid, std::move(values));
}

// ---------------------------------------------------------------------------
// transforms
// ---------------------------------------------------------------------------

SpectralFunction to_spectral(const GridFunction& f) {
    SpectralFunction out;
    out.grid = f.grid;
    switch (f.grid.manifold) {
        case Manifold::Circle: {
            out.coeffs = fft_forward(f.values.cast<Complex>());
            break;
        }
        case Manifold::Torus2: {
            const int n1 = f.grid.n1, n2 = f.grid.n2;
            Eigen::MatrixXcd m(n1, n2);
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n2; ++j) m(i, j) = f.values(i * n2 + j);
            for (int i = 0; i < n1; ++i)
                m.row(i) = fft_forward(m.row(i).transpose()).transpose();
            for (int j = 0; j < n2; ++j) m.col(j) = fft_forward(m.col(j));
            out.coeffs.resize(n1 * n2);
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n2; ++j) out.coeffs(i * n2 + j) = m(i, j);
            break;
        }
        default:
            out.coeffs = sphere_analysis(sphere_basis(f.grid.lmax), f.values);
    }
    return out;
}

GridFunction to_nodal(const SpectralFunction& f) {
    switch (f.grid.manifold) {
        case Manifold::Circle:
            return GridFunction(f.grid, fft_inverse(f.coeffs).real());
        case Manifold::Torus2: {
            const int n1 = f.grid.n1, n2 = f.grid.n2;
            Eigen::MatrixXcd m(n1, n2);
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n2; ++j) m(i, j) = f.coeffs(i * n2 + j);
            for (int j = 0; j < n2; ++j) m.col(j) = fft_inverse(m.col(j));
            for (int i = 0; i < n1; ++i)
                m.row(i) = fft_inverse(m.row(i).transpose()).transpose();
            RVector values(n1 * n2);
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n2; ++j) values(i * n2 + j) = m(i, j).real();
            return GridFunction(f.grid, std::move(values));
        }
        default:
            return GridFunction(
                f.grid, sphere_synthesis(sphere_basis(f.grid.lmax), f.coeffs, false, false));
    }
}

// ---------------------------------------------------------------------------
// heat semigroup
// ---------------------------------------------------------------------------

void heat_apply_in_place(double t, SpectralFunction& f) {
    if (t < 0.0) throw Error("heat_apply: negative time");
    const double kappa = f.grid.kappa;
    switch (f.grid.manifold) {
        case Manifold::Circle: {
            const int n = f.grid.n1;
            for (int m = 0; m < n; ++m) {
                const double freq = signed_freq(m, n);
                f.coeffs(m) *= std::exp(-kappa * freq * freq * t);
            }
            break;
        }
        case Manifold::Torus2: {
            const int n1 = f.grid.n1, n2 = f.grid.n2;
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n2; ++j) {
                    const double f1 = signed_freq(i, n1), f2 = signed_freq(j, n2);
                    f.coeffs(i * n2 + j) *= std::exp(-kappa * (f1 * f1 + f2 * f2) * t);
                }
            break;
        }
        default: {
            for (int l = 0; l <= f.grid.lmax; ++l) {
                const double factor = std::exp(-kappa * l * (l + 1.0) * t);
                for (int m = 0; m <= l; ++m) f.coeffs(packed_index(l, m)) *= factor;
            }
        }
    }
}

GridFunction heat_apply(const ManifoldGrid& grid, double t, const GridFunction& f) {
    if (!(f.grid == grid)) throw DimensionError("heat_apply: grid mismatch");
    SpectralFunction spec = to_spectral(f);
    heat_apply_in_place(t, spec);
    return to_nodal(spec);
}

// ---------------------------------------------------------------------------
// gradients
// ---------------------------------------------------------------------------

GradientField gradient_field(const SpectralFunction& f) {
    GradientField out;
    switch (f.grid.manifold) {
        case Manifold::Circle: {
            const int n = f.grid.n1;
            SpectralFunction d = f;
            for (int m = 0; m < n; ++m)
                d.coeffs(m) =
                    (m == n / 2) ? Complex(0, 0) : f.coeffs(m) * Complex(0, signed_freq(m, n));
            out.d1 = to_nodal(d);
            out.d2 = GridFunction(f.grid, RVector::Zero(f.grid.node_count()));
            out.metric_norm = GridFunction(f.grid, out.d1.values.cwiseAbs());
            break;
        }
        case Manifold::Torus2: {
            const int n1 = f.grid.n1, n2 = f.grid.n2;
            SpectralFunction d1 = f, d2 = f;
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n2; ++j) {
                    const Complex c = f.coeffs(i * n2 + j);
                    d1.coeffs(i * n2 + j) =
                        (i == n1 / 2) ? Complex(0, 0) : c * Complex(0, signed_freq(i, n1));
                    d2.coeffs(i * n2 + j) =
                        (j == n2 / 2) ? Complex(0, 0) : c * Complex(0, signed_freq(j, n2));
                }
            out.d1 = to_nodal(d1);
            out.d2 = to_nodal(d2);
            out.metric_norm =
                GridFunction(f.grid, (out.d1.values.array().square() +
                                      out.d2.values.array().square())
                                         .sqrt()
                                         .matrix());
            break;
        }
        default: {
            const auto& basis = sphere_basis(f.grid.lmax);
            out.d1 = GridFunction(f.grid, sphere_synthesis(basis, f.coeffs, true, false));
            out.d2 = GridFunction(f.grid, sphere_synthesis(basis, f.coeffs, false, true));
            RVector norm(f.grid.node_count());
            for (int i = 0; i < basis.nlat; ++i) {
                const double inv_sin = 1.0 / std::sin(basis.theta(i));
                for (int k = 0; k < basis.nlon; ++k) {
                    const int idx = i * basis.nlon + k;
                    norm(idx) = std::hypot(out.d1.values(idx), out.d2.values(idx) * inv_sin);
                }
            }
            out.metric_norm = GridFunction(f.grid, std::move(norm));
        }
    }
    return out;
}

GradientField gradient_field(const GridFunction& f) { return gradient_field(to_spectral(f)); }

// ---------------------------------------------------------------------------
// point evaluation
// ---------------------------------------------------------------------------

namespace {

void circle_eval(const CVector& coeffs, int n, double x, double* value, double* deriv) {
    Complex acc(0, 0), dacc(0, 0);
    for (int m = 0; m < n; ++m) {
        const int freq = signed_freq(m, n);
        const Complex e = std::polar(1.0, freq * x);
        acc += coeffs(m) * e;
        if (m != n / 2) dacc += coeffs(m) * e * Complex(0, freq);
    }
    if (value) *value = acc.real() / n;
    if (deriv) *deriv = dacc.real() / n;
}

}  // namespace

double eval_at(const SpectralFunction& f, const ManifoldPoint& p) {
    switch (f.grid.manifold) {
        case Manifold::Circle: {
            double v;
            circle_eval(f.coeffs, f.grid.n1, p.c1, &v, nullptr);
            return v;
        }
        case Manifold::Torus2: {
            const int n1 = f.grid.n1, n2 = f.grid.n2;
            Complex acc(0, 0);
            for (int i = 0; i < n1; ++i) {
                const Complex e1 = std::polar(1.0, double(signed_freq(i, n1)) * p.c1);
                for (int j = 0; j < n2; ++j)
                    acc += f.coeffs(i * n2 + j) * e1 *
                           std::polar(1.0, double(signed_freq(j, n2)) * p.c2);
            }
            return acc.real() / (n1 * n2);
        }
        default: {
            const int lmax = f.grid.lmax;
            const int np = (lmax + 1) * (lmax + 2) / 2;
            std::vector<double> plm(np);
            legendre_row(lmax, std::cos(p.c1), plm.data(), nullptr);
            Complex acc(0, 0);
            for (int m = 0; m <= lmax; ++m) {
                Complex ring(0, 0);
                for (int l = m; l <= lmax; ++l)
                    ring += f.coeffs(packed_index(l, m)) * plm[packed_index(l, m)];
                if (m == 0) {
                    acc += ring;
                } else {
                    const Complex e = std::polar(1.0, m * p.c2);
                    acc += ring * e + std::conj(ring * e);
                }
            }
            return acc.real();
        }
    }
}

Eigen::Vector2d gradient_at(const SpectralFunction& f, const ManifoldPoint& p) {
    Eigen::Vector2d out = Eigen::Vector2d::Zero();
    switch (f.grid.manifold) {
        case Manifold::Circle: {
            circle_eval(f.coeffs, f.grid.n1, p.c1, nullptr, &out(0));
            break;
        }
        case Manifold::Torus2: {
            const int n1 = f.grid.n1, n2 = f.grid.n2;
            Complex a1(0, 0), a2(0, 0);
            for (int i = 0; i < n1; ++i) {
                const int f1 = signed_freq(i, n1);
                const Complex e1 = std::polar(1.0, double(f1) * p.c1);
                for (int j = 0; j < n2; ++j) {
                    const int f2 = signed_freq(j, n2);
                    const Complex term =
                        f.coeffs(i * n2 + j) * e1 * std::polar(1.0, double(f2) * p.c2);
                    if (i != n1 / 2) a1 += term * Complex(0, f1);
                    if (j != n2 / 2) a2 += term * Complex(0, f2);
                }
            }
            out << a1.real() / (n1 * n2), a2.real() / (n1 * n2);
            break;
        }
        default: {
            const int lmax = f.grid.lmax;
            const int np = (lmax + 1) * (lmax + 2) / 2;
            std::vector<double> plm(np), dplm(np);
            legendre_row(lmax, std::cos(p.c1), plm.data(), dplm.data());
            Complex dth(0, 0), dph(0, 0);
            for (int m = 0; m <= lmax; ++m) {
                Complex ring_t(0, 0), ring_p(0, 0);
                for (int l = m; l <= lmax; ++l) {
                    const Complex c = f.coeffs(packed_index(l, m));
                    ring_t += c * dplm[packed_index(l, m)];
                    ring_p += c * plm[packed_index(l, m)];
                }
                ring_p *= Complex(0, double(m));
                if (m == 0) {
                    dth += ring_t;
                    dph += ring_p;
                } else {
                    const Complex e = std::polar(1.0, m * p.c2);
                    dth += ring_t * e + std::conj(ring_t * e);
                    dph += ring_p * e + std::conj(ring_p * e);
                }
            }
            out << dth.real(), dph.real();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// metric gradient and chart helpers
// ---------------------------------------------------------------------------

Complex sphere_to_chart(const ManifoldPoint& p) {
    return std::polar(std::tan(0.5 * p.c1), p.c2);
}

ManifoldPoint chart_to_sphere(Complex w) {
    return {2.0 * std::atan(std::abs(w)), std::arg(w)};
}

MetricGradient metric_gradient(const GridFunction& f, const ManifoldPoint& p) {
    const SpectralFunction spec = to_spectral(f);
    MetricGradient out;
    const Eigen::Vector2d d = gradient_at(spec, p);
    switch (f.grid.manifold) {
        case Manifold::Circle:
            out.covector << d(0), 0.0;
            out.norm = std::abs(d(0));
            break;
        case Manifold::Torus2:
            out.covector = d;
            out.norm = d.norm();
            break;
        default: {
            // chain rule from (theta, phi) to the stereographic chart w = x + iy
            const double r = std::tan(0.5 * p.c1);
            const double fr = d(0) * 2.0 / (1.0 + r * r);  // df/dr
            const double fphi_over_r = (r > 0) ? d(1) / r : 0.0;
            const double c = std::cos(p.c2), s = std::sin(p.c2);
            out.covector << fr * c - fphi_over_r * s, fr * s + fphi_over_r * c;
            const double sin_theta = std::sin(p.c1);
            out.norm = std::hypot(d(0), sin_theta > 0 ? d(1) / sin_theta : 0.0);
        }
    }
    return out;
}

}  // namespace qfg
