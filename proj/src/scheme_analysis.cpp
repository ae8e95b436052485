#include "qfg/scheme_analysis.hpp"

#include <cmath>
#include <thread>

#include "qfg/detail/coeffs.hpp"
#include "qfg/filtering.hpp"
#include "qfg/rng.hpp"

namespace qfg {

namespace {

using LongC = std::complex<long double>;
using LongMat = Eigen::Matrix<LongC, Eigen::Dynamic, Eigen::Dynamic>;

// Real 2n-vector view (x_1, y_1, ..., x_n, y_n) of complex chart data.
template <class Scalar>
RVector realize(const Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>& v) {
    RVector out(2 * v.size());
    for (int k = 0; k < v.size(); ++k) {
        out(2 * k) = static_cast<double>(v(k).real());
        out(2 * k + 1) = static_cast<double>(v(k).imag());
    }
    return out;
}

template <class Scalar>
detail::Coeffs<Scalar> coeffs_at(const DetectionScheme& scheme, const Matrix& h,
                                 const CVector& w, NoiseKind kind) {
    const auto ops = detail::SchemeOps<Scalar>::from(scheme, h);
    Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> wc(w.size());
    for (int k = 0; k < w.size(); ++k)
        wc(k) = std::complex<Scalar>(static_cast<Scalar>(w(k).real()),
                                     static_cast<Scalar>(w(k).imag()));
    return detail::projective_coeffs<Scalar>(ops, wc, kind);
}

}  // namespace

LocalCoefficients local_coefficients(const DetectionScheme& scheme, const Matrix& h,
                                     const ProjectiveState& w, NoiseKind kind) {
    if (scheme.dim() != w.chart_dim() + 1 || h.rows() != scheme.dim())
        throw DimensionError("local_coefficients: dimension mismatch");
    const auto coeffs = coeffs_at<double>(scheme, h, w.w, kind);
    const int n2 = 2 * w.chart_dim();

    LocalCoefficients out;
    out.noise_kind = kind;
    out.drift = realize<double>(coeffs.drift);
    out.quadratic_variation = RMatrix::Zero(n2, n2);
    for (int j = 0; j < scheme.channels(); ++j) {
        const RVector row = realize<double>(coeffs.noise.col(j).eval());
        out.quadratic_variation += row * row.transpose();
    }
    return out;
}

IsothermalReport check_isothermal(const std::vector<Matrix>& couplings, double tol) {
    if (couplings.size() != 3)
        throw DimensionError("check_isothermal: exactly three couplings required");
    for (const Matrix& l : couplings) {
        if (l.rows() != 2 || l.cols() != 2)
            throw DimensionError("check_isothermal: couplings must be 2x2");
        if (!is_hermitian(l))
            throw DimensionError("check_isothermal: couplings must be Hermitian");
    }

    IsothermalReport report;
    report.first_order_cancellation = true;
    for (const Matrix& l : couplings)
        if (std::abs(l(0, 0).real() + l(1, 1).real()) > tol)
            report.first_order_cancellation = false;

    RMatrix gram(3, 3);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) gram(j, k) = trace_inner(couplings[j], couplings[k]);
    const double a = gram.diagonal().mean();
    const double scale_tol = tol * std::max(1.0, std::abs(a));
    for (int j = 0; j < 3; ++j)
        for (int k = j; k < 3; ++k) {
            const double target = (j == k) ? a : 0.0;
            if (std::abs(gram(j, k) - target) > scale_tol)
                report.failing_pairs.emplace_back(j, k);
        }
    report.scale = a;
    report.is_isothermal =
        report.failing_pairs.empty() && report.first_order_cancellation && a > tol;
    return report;
}

double sphere_generator_residual(Complex w, NoiseKind kind) {
    static const DetectionScheme scheme = pauli_scheme();
    static const Matrix h0 = Matrix::Zero(2, 2);
    CVector wv(1);
    wv << w;
    const auto coeffs = coeffs_at<long double>(scheme, h0, wv, kind);

    long double residual = 0.0L;
    for (int k = 0; k < coeffs.drift.size(); ++k)
        residual = std::max(residual, std::abs(coeffs.drift(k)));

    const long double x = w.real(), y = w.imag();
    const long double target = (1.0L + x * x + y * y) * (1.0L + x * x + y * y);
    long double qxx = 0.0L, qxy = 0.0L, qyy = 0.0L;
    for (int j = 0; j < 3; ++j) {
        const LongC s = coeffs.noise(0, j);
        qxx += s.real() * s.real();
        qxy += s.real() * s.imag();
        qyy += s.imag() * s.imag();
    }
    residual = std::max(residual, std::abs(qxx - target));
    residual = std::max(residual, std::abs(qyy - target));
    residual = std::max(residual, std::abs(qxy));
    return static_cast<double>(residual);
}

ProjectiveGeneratorReport projective_generator_report(const Eigen::Vector2cd& w) {
    static const DetectionScheme scheme = gell_mann_scheme(3);
    static const Matrix h0 = Matrix::Zero(3, 3);
    CVector wv(2);
    wv << w(0), w(1);
    const auto out_form = coeffs_at<long double>(scheme, h0, wv, NoiseKind::Output);
    const auto innov_form = coeffs_at<long double>(scheme, h0, wv, NoiseKind::Innovation);

    ProjectiveGeneratorReport report;
    long double drift_res = 0.0L, innov_gap = 0.0L;
    for (int k = 0; k < 2; ++k) {
        drift_res = std::max(drift_res, std::abs(out_form.drift(k)));
        innov_gap = std::max(innov_gap, std::abs(out_form.drift(k) - innov_form.drift(k)));
    }
    report.drift_residual = static_cast<double>(drift_res);
    report.innovation_gap = static_cast<double>(innov_gap);

    LongMat a = LongMat::Zero(2, 2);  // sum_j sigma^k_j conj(sigma^l_j)
    LongMat b = LongMat::Zero(2, 2);  // sum_j sigma^k_j sigma^l_j (must vanish)
    for (int j = 0; j < scheme.channels(); ++j)
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) {
                a(k, l) += out_form.noise(k, j) * std::conj(out_form.noise(l, j));
                b(k, l) += out_form.noise(k, j) * out_form.noise(l, j);
            }

    const LongC w1(w(0).real(), w(0).imag());
    const LongC w2(w(1).real(), w(1).imag());
    const long double norm2 = 1.0L + std::norm(w1) + std::norm(w2);
    LongMat ref(2, 2);
    ref(0, 0) = 2.0L * norm2 * (1.0L + std::norm(w1));
    ref(1, 1) = 2.0L * norm2 * (1.0L + std::norm(w2));
    ref(0, 1) = 2.0L * norm2 * w1 * std::conj(w2);
    ref(1, 0) = 2.0L * norm2 * w2 * std::conj(w1);

    long double disc = 0.0L, holo = 0.0L;
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) {
            disc = std::max(disc, std::abs(a(k, l) - ref(k, l)));
            holo = std::max(holo, std::abs(b(k, l)));
            report.sde(k, l) = Complex(static_cast<double>(a(k, l).real()),
                                       static_cast<double>(a(k, l).imag()));
            report.reference(k, l) = Complex(static_cast<double>(ref(k, l).real()),
                                             static_cast<double>(ref(k, l).imag()));
        }
    report.discrepancy = static_cast<double>(disc);
    report.holomorphic_residual = static_cast<double>(holo);
    return report;
}

double projective_generator_residual(const Eigen::Vector2cd& w) {
    const auto report = projective_generator_report(w);
    return std::max({report.discrepancy, report.drift_residual, report.innovation_gap});
}

bool innovation_invariance_check(const DetectionScheme& scheme, const Matrix& h,
                                 const ProjectiveState& w, double tol) {
    const auto out_form = local_coefficients(scheme, h, w, NoiseKind::Output);
    const auto innov_form = local_coefficients(scheme, h, w, NoiseKind::Innovation);
    const double drift_gap = (out_form.drift - innov_form.drift).cwiseAbs().maxCoeff();
    const double qv_gap = (out_form.quadratic_variation - innov_form.quadratic_variation)
                              .cwiseAbs()
                              .maxCoeff();
    return drift_gap <= tol && qv_gap <= tol;
}

McGeneratorResult mc_generator_check(const DetectionScheme& scheme, const Matrix& h,
                                     const TestFunction& f, const ProjectiveState& w,
                                     double h_step, int n_samples, std::uint64_t seed,
                                     NoiseKind kind, int threads) {
    if (h_step <= 0.0 || n_samples < 2)
        throw Error("mc_generator_check: need h > 0 and n_samples >= 2");
    const bool torus = scheme.kind() == SchemeKind::TorusDiagonal;
    const int n = scheme.dim() - 1;
    const int nch = scheme.channels();

    RVector base;  // coordinates f acts on: angles on the torus, else (x,y) pairs
    if (torus) {
        base.resize(n);
        for (int k = 0; k < n; ++k) base(k) = std::arg(w.w(k));
    } else {
        base = realize<double>(w.w);
    }
    const double f0 = f.value(base);

    McGeneratorResult result;
    {
        const RVector grad = f.gradient(base);
        const RMatrix hess = f.hessian(base);
        if (torus) {
            const RVector& rates = scheme.torus_rates();
            const double h00 = h(0, 0).real();
            double acc = 0.0;
            for (int k = 0; k < n; ++k) {
                acc += (h00 - h(k + 1, k + 1).real()) * grad(k);
                acc += 0.5 * rates(k) * rates(k) * hess(k, k);
            }
            result.analytic = acc;
        } else {
            const auto local = local_coefficients(scheme, h, w, kind);
            result.analytic = local.drift.dot(grad) +
                              0.5 * (local.quadratic_variation.cwiseProduct(hess)).sum();
        }
    }

    // one Euler-Maruyama step of size h per sample; coefficients are frozen
    // at the start point, so precompute them once
    detail::Coeffs<double> coeffs;
    if (!torus) {
        const auto ops = detail::SchemeOps<double>::from(scheme, h);
        coeffs = detail::projective_coeffs<double>(ops, w.w, kind);
    }

    std::vector<double> samples(static_cast<std::size_t>(n_samples));
    auto worker = [&](int begin, int end) {
        RVector dy(nch);
        CVector next(n);
        for (int i = begin; i < end; ++i) {
            RandomStream rng(seed, static_cast<std::uint64_t>(i));
            for (int j = 0; j < nch; ++j) dy(j) = rng.gauss(h_step);
            RVector coords;
            if (torus) {
                coords = step_torus_angles(base, h, scheme.torus_rates(), dy, h_step);
            } else {
                next = w.w + coeffs.drift * h_step;
                for (int j = 0; j < nch; ++j) next += coeffs.noise.col(j) * dy(j);
                coords = realize<double>(next);
            }
            samples[i] = (f.value(coords) - f0) / h_step;
        }
    };

    const int nthreads = std::max(1, std::min(threads, n_samples));
    if (nthreads == 1) {
        worker(0, n_samples);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n_samples + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(n_samples, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n_samples;
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= (n_samples - 1.0);
    result.estimate = mean;
    result.std_error = std::sqrt(var / n_samples);
    return result;
}

}  // namespace qfg
