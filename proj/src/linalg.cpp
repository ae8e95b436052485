#include "qfg/linalg.hpp"

#include <cmath>

namespace qfg {

bool is_hermitian(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_anti_hermitian(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) return false;
    return (a + a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool is_traceless(const Matrix& a, double tol) {
    return std::abs(a.trace()) <= tol;
}

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols())
        throw DimensionError(std::string(what) + ": matrix is not square");
    if (a.rows() < 1 || a.rows() > kMaxDim)
        throw DimensionError(std::string(what) + ": dimension out of range [1," +
                             std::to_string(kMaxDim) + "]");
}

void require_hermitian(const Matrix& a, const char* what) {
    require_square(a, what);
    if (!is_hermitian(a))
        throw DimensionError(std::string(what) + ": matrix is not Hermitian");
}

Complex expectation(const Matrix& a, const CVector& v) {
    require_square(a, "expectation");
    if (a.rows() != v.size())
        throw DimensionError("expectation: operator/vector dimension mismatch");
    const double nrm2 = v.squaredNorm();
    if (nrm2 == 0.0)
        throw DimensionError("expectation: zero state vector");
    return v.dot(a * v) / nrm2;
}

double trace_inner(const Matrix& a, const Matrix& b) {
    require_square(a, "trace_inner");
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("trace_inner: dimension mismatch");
    return (a * b).trace().real();
}

namespace {

Matrix make_pauli(int which) {
    Matrix m = Matrix::Zero(2, 2);
    const Complex i(0.0, 1.0);
    switch (which) {
        case 0: m(0, 1) = 1.0; m(1, 0) = 1.0; break;
        case 1: m(0, 1) = -i;  m(1, 0) = i;   break;
        default: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
    }
    return m;
}

}  // namespace

const Matrix& pauli_x() { static const Matrix m = make_pauli(0); return m; }
const Matrix& pauli_y() { static const Matrix m = make_pauli(1); return m; }
const Matrix& pauli_z() { static const Matrix m = make_pauli(2); return m; }

std::vector<Matrix> gell_mann(int d) {
    if (d < 2 || d > kMaxDim)
        throw DimensionError("gell_mann: dimension out of range [2," +
                             std::to_string(kMaxDim) + "]");
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(d) * d - 1);
    const Complex i(0.0, 1.0);
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) {
            Matrix m = Matrix::Zero(d, d);
            m(j, k) = 1.0;
            m(k, j) = 1.0;
            out.push_back(std::move(m));
        }
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k) {
            Matrix m = Matrix::Zero(d, d);
            m(j, k) = -i;
            m(k, j) = i;
            out.push_back(std::move(m));
        }
    for (int k = 1; k < d; ++k) {
        // diag(1,...,1,-k,0,...,0) scaled so that tr(L^2) = 2
        Matrix m = Matrix::Zero(d, d);
        const double scale = std::sqrt(2.0 / (k * (k + 1.0)));
        for (int p = 0; p < k; ++p) m(p, p) = scale;
        m(k, k) = -k * scale;
        out.push_back(std::move(m));
    }
    return out;
}

CVector ProjectiveState::lift() const {
    CVector full(w.size() + 1);
    full(0) = 1.0;
    full.tail(w.size()) = w;
    return full;
}

ProjectiveState to_projective(const CVector& chi) {
    if (chi.size() < 1) throw DimensionError("to_projective: empty vector");
    if (chi.squaredNorm() == 0.0) throw DimensionError("to_projective: zero vector");
    const Complex c0 = chi(0);
    if (c0 == Complex(0.0, 0.0))
        throw ChartError("to_projective: state outside chart (chi_0 = 0)");
    return ProjectiveState{chi.tail(chi.size() - 1) / c0};
}

CVector from_projective(const ProjectiveState& s) {
    return s.lift();
}

}  // namespace qfg
