#pragma once

#include <string>
#include <vector>

#include "qfg/linalg.hpp"

namespace qfg {

enum class SchemeKind { PauliSphere, GellMannProjective, TorusDiagonal, EuclideanColumn, Custom };
enum class NoiseKind { Output, Innovation };

/// A homodyne detection arrangement: one coupling operator L_j per
/// measurement channel, plus cached combinations used by the steppers.
class DetectionScheme {
public:
    DetectionScheme(SchemeKind kind, std::vector<Matrix> couplings,
                    std::vector<std::string> labels);

    SchemeKind kind() const { return kind_; }
    int dim() const { return dim_; }
    int channels() const { return static_cast<int>(couplings_.size()); }

    const std::vector<Matrix>& couplings() const { return couplings_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const Matrix& coupling(int j) const { return couplings_.at(j); }

    /// sum_j L_j^* L_j (the deterministic damping part of the drift).
    const Matrix& damping() const { return damping_; }
    /// L_j + L_j^*, the quadrature measured on channel j.
    const Matrix& quadrature(int j) const { return quadratures_.at(j); }

    /// Torus scheme: the coupling amplitudes r_k; throws otherwise.
    const RVector& torus_rates() const;

private:
    SchemeKind kind_;
    int dim_;
    std::vector<Matrix> couplings_;
    std::vector<std::string> labels_;
    Matrix damping_;
    std::vector<Matrix> quadratures_;
    RVector torus_rates_;
};

/// Qubit scheme with the three Pauli couplings (channels x, y, z).
DetectionScheme pauli_scheme();

/// Qudit scheme with the d^2-1 generalized Pauli couplings.
DetectionScheme gell_mann_scheme(int d);

/// n anti-Hermitian diagonal couplings on C^{n+1}: (L_j)_{jj} = i r_j.
/// Each |w_k| is conserved, so the filtering diffusion lives on a torus.
DetectionScheme torus_diagonal_scheme(const RVector& rates);

/// 2n couplings on C^{n+1} with non-vanishing entries only in the first
/// column: L_{j,1} = e_j e_0^T, L_{j,2} = i e_j e_0^T.  Channel order is
/// (1,1),(1,2),(2,1),(2,2),...
DetectionScheme euclidean_scheme(int n);

/// Arbitrary user-supplied couplings.
DetectionScheme custom_scheme(std::vector<Matrix> couplings,
                              std::vector<std::string> labels = {});

const char* to_string(SchemeKind kind);
const char* to_string(NoiseKind kind);

}  // namespace qfg
