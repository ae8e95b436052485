#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qfg/errors.hpp"

namespace qfg {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

// Dense small-matrix regime: enough for qubit x qubit tensor products.
inline constexpr int kMaxDim = 16;
inline constexpr double kHermitianTol = 1e-12;

bool is_hermitian(const Matrix& a, double tol = kHermitianTol);
bool is_anti_hermitian(const Matrix& a, double tol = kHermitianTol);
bool is_traceless(const Matrix& a, double tol = kHermitianTol);

/// Throws DimensionError unless `a` is square with 1 <= dim <= kMaxDim.
void require_square(const Matrix& a, const char* what);
/// Throws DimensionError unless `a` is Hermitian within kHermitianTol.
/// Inputs failing the check are rejected, never symmetrized.
void require_hermitian(const Matrix& a, const char* what);

/// Average value (v, A v) / (v, v).  Real for Hermitian A.
Complex expectation(const Matrix& a, const CVector& v);

/// Re tr(a b).
double trace_inner(const Matrix& a, const Matrix& b);

const Matrix& pauli_x();
const Matrix& pauli_y();
const Matrix& pauli_z();

/// The d^2-1 generalized Pauli (Gell-Mann) matrices of su(d), Hermitian and
/// traceless with tr(L_j L_k) = 2 delta_jk.  Ordering is part of the
/// noise-channel indexing contract:
///   symmetric pairs (j,k) in lexicographic order, 0 <= j < k <= d-1,
///   then antisymmetric pairs in the same order,
///   then the d-1 diagonal matrices.
std::vector<Matrix> gell_mann(int d);

/// Chart coordinates w = (w_1,...,w_n) of a projective state, with the
/// convention W = (1, w_1, ..., w_n).
struct ProjectiveState {
    CVector w;

    ProjectiveState() = default;
    explicit ProjectiveState(CVector coords) : w(std::move(coords)) {}

    int chart_dim() const { return static_cast<int>(w.size()); }
    /// The representative vector W = (1, w).
    CVector lift() const;
};

/// w_k = chi_k / chi_0.  Throws ChartError when chi_0 = 0.
ProjectiveState to_projective(const CVector& chi);
/// The representative (1, w); left inverse of to_projective on the chart.
CVector from_projective(const ProjectiveState& s);

}  // namespace qfg
