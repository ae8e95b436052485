#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qfg/scheme.hpp"

namespace qfg::detail {

// Coefficient assembly for the projective-coordinate filtering equation,
// templated on the real scalar so that generator verification can run the
// identical algebra in extended precision.
//
// With W = (1, w) the step reads
//   dw_k =  i [ w_k (H W)_0 - (H W)_k ] dt
//         + 1/2 [ w_k (K W)_0 - (K W)_k ] dt,          K = sum_j L_j^* L_j
//         + sum_j [ w_k (L_j W)_0^2 - (L_j W)_0 (L_j W)_k ] dt
//         + sum_j [ (L_j W)_k - w_k (L_j W)_0 ] dY_t^j,
// and rewriting in terms of the innovation (dY = dB + <L_j + L_j^*>_W dt)
// keeps the noise rows and adds sum_j sigma_j <L_j + L_j^*>_W to the drift.

template <class Real>
struct SchemeOps {
    using C = std::complex<Real>;
    using Mat = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<C, Eigen::Dynamic, 1>;

    std::vector<Mat> couplings;
    std::vector<Mat> quadratures;  // L_j + L_j^*
    Mat damping;                   // sum_j L_j^* L_j
    Mat hamiltonian;

    static SchemeOps from(const DetectionScheme& scheme, const Matrix& h) {
        SchemeOps ops;
        ops.couplings.reserve(scheme.channels());
        ops.quadratures.reserve(scheme.channels());
        for (int j = 0; j < scheme.channels(); ++j) {
            ops.couplings.push_back(scheme.coupling(j).template cast<C>());
            ops.quadratures.push_back(scheme.quadrature(j).template cast<C>());
        }
        ops.damping = scheme.damping().template cast<C>();
        ops.hamiltonian = h.template cast<C>();
        return ops;
    }
};

template <class Real>
struct Coeffs {
    using C = std::complex<Real>;
    Eigen::Matrix<C, Eigen::Dynamic, 1> drift;               // length n
    Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic> noise;  // n x channels
};

template <class Real>
Coeffs<Real> projective_coeffs(const SchemeOps<Real>& ops,
                               const Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>& w,
                               NoiseKind kind) {
    using C = std::complex<Real>;
    using Vec = Eigen::Matrix<C, Eigen::Dynamic, 1>;
    const int n = static_cast<int>(w.size());
    const int nch = static_cast<int>(ops.couplings.size());
    const C imag(Real(0), Real(1));

    Vec lifted(n + 1);
    lifted(0) = C(Real(1), Real(0));
    lifted.tail(n) = w;

    Coeffs<Real> out;
    out.drift.setZero(n);
    out.noise.resize(n, nch);

    const Vec hw = ops.hamiltonian * lifted;
    const Vec kw = ops.damping * lifted;
    for (int k = 0; k < n; ++k) {
        out.drift(k) = imag * (w(k) * hw(0) - hw(k + 1)) +
                       Real(0.5) * (w(k) * kw(0) - kw(k + 1));
    }

    const Real w_norm2 = Real(1) + w.squaredNorm();
    for (int j = 0; j < nch; ++j) {
        const Vec lw = ops.couplings[j] * lifted;
        for (int k = 0; k < n; ++k) {
            out.noise(k, j) = lw(k + 1) - w(k) * lw(0);
            out.drift(k) += w(k) * lw(0) * lw(0) - lw(0) * lw(k + 1);
        }
        if (kind == NoiseKind::Innovation) {
            const C qexp = lifted.dot(ops.quadratures[j] * lifted) / w_norm2;
            out.drift += out.noise.col(j) * qexp.real();
        }
    }
    return out;
}

}  // namespace qfg::detail
