#include "qfg/scheme.hpp"

#include <cmath>

namespace qfg {

namespace {

void validate_torus(const std::vector<Matrix>& ls) {
    const int d = static_cast<int>(ls.front().rows());
    if (static_cast<int>(ls.size()) != d - 1)
        throw SchemeError("torus scheme needs exactly dim-1 couplings");
    for (int j = 0; j < static_cast<int>(ls.size()); ++j) {
        const Matrix& l = ls[j];
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const Complex v = l(a, b);
                const bool allowed = (a == b && a == j + 1);
                if (!allowed && std::abs(v) > 0.0)
                    throw SchemeError("torus coupling " + std::to_string(j) +
                                      " has entries off its diagonal slot");
                if (allowed && std::abs(v.real()) > kHermitianTol)
                    throw SchemeError("torus coupling " + std::to_string(j) +
                                      " is not anti-Hermitian (i r)");
            }
    }
}

void validate_euclidean(const std::vector<Matrix>& ls) {
    const int d = static_cast<int>(ls.front().rows());
    if (static_cast<int>(ls.size()) != 2 * (d - 1))
        throw SchemeError("euclidean scheme needs exactly 2(dim-1) couplings");
    for (const Matrix& l : ls)
        for (int a = 0; a < d; ++a)
            for (int b = 1; b < d; ++b)
                if (std::abs(l(a, b)) > 0.0)
                    throw SchemeError("euclidean couplings may only populate the first column");
}

}  // namespace

DetectionScheme::DetectionScheme(SchemeKind kind, std::vector<Matrix> couplings,
                                 std::vector<std::string> labels)
    : kind_(kind), couplings_(std::move(couplings)), labels_(std::move(labels)) {
    if (couplings_.empty() && kind_ != SchemeKind::Custom)
        throw SchemeError("detection scheme has no coupling operators");
    dim_ = couplings_.empty() ? 0 : static_cast<int>(couplings_.front().rows());
    for (const Matrix& l : couplings_) {
        require_square(l, "DetectionScheme coupling");
        if (l.rows() != dim_)
            throw DimensionError("DetectionScheme: couplings have mixed dimensions");
    }
    if (labels_.empty())
        for (std::size_t j = 0; j < couplings_.size(); ++j)
            labels_.push_back("c" + std::to_string(j + 1));
    if (labels_.size() != couplings_.size())
        throw SchemeError("DetectionScheme: one label per channel required");

    switch (kind_) {
        case SchemeKind::TorusDiagonal: validate_torus(couplings_); break;
        case SchemeKind::EuclideanColumn: validate_euclidean(couplings_); break;
        default: break;
    }

    damping_ = Matrix::Zero(dim_, dim_);
    quadratures_.reserve(couplings_.size());
    for (const Matrix& l : couplings_) {
        damping_ += l.adjoint() * l;
        quadratures_.push_back(l + l.adjoint());
    }
    if (kind_ == SchemeKind::TorusDiagonal) {
        torus_rates_.resize(dim_ - 1);
        for (int j = 0; j < dim_ - 1; ++j)
            torus_rates_(j) = couplings_[j](j + 1, j + 1).imag();
    }
}

const RVector& DetectionScheme::torus_rates() const {
    if (kind_ != SchemeKind::TorusDiagonal)
        throw SchemeError("torus_rates: not a torus-diagonal scheme");
    return torus_rates_;
}

DetectionScheme pauli_scheme() {
    return DetectionScheme(SchemeKind::PauliSphere, {pauli_x(), pauli_y(), pauli_z()},
                           {"x", "y", "z"});
}

DetectionScheme gell_mann_scheme(int d) {
    std::vector<std::string> labels;
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k)
            labels.push_back("s" + std::to_string(j) + std::to_string(k));
    for (int j = 0; j < d; ++j)
        for (int k = j + 1; k < d; ++k)
            labels.push_back("a" + std::to_string(j) + std::to_string(k));
    for (int k = 1; k < d; ++k) labels.push_back("d" + std::to_string(k));
    return DetectionScheme(SchemeKind::GellMannProjective, gell_mann(d), std::move(labels));
}

DetectionScheme torus_diagonal_scheme(const RVector& rates) {
    const int n = static_cast<int>(rates.size());
    if (n < 1 || n + 1 > kMaxDim)
        throw DimensionError("torus_diagonal_scheme: need 1 <= n <= kMaxDim-1 rates");
    std::vector<Matrix> ls;
    std::vector<std::string> labels;
    for (int j = 0; j < n; ++j) {
        Matrix l = Matrix::Zero(n + 1, n + 1);
        l(j + 1, j + 1) = Complex(0.0, rates(j));
        ls.push_back(std::move(l));
        labels.push_back("t" + std::to_string(j + 1));
    }
    return DetectionScheme(SchemeKind::TorusDiagonal, std::move(ls), std::move(labels));
}

DetectionScheme euclidean_scheme(int n) {
    if (n < 1 || n + 1 > kMaxDim)
        throw DimensionError("euclidean_scheme: need 1 <= n <= kMaxDim-1");
    std::vector<Matrix> ls;
    std::vector<std::string> labels;
    for (int j = 1; j <= n; ++j) {
        Matrix l1 = Matrix::Zero(n + 1, n + 1);
        l1(j, 0) = 1.0;
        Matrix l2 = Matrix::Zero(n + 1, n + 1);
        l2(j, 0) = Complex(0.0, 1.0);
        ls.push_back(std::move(l1));
        labels.push_back("e" + std::to_string(j) + "1");
        ls.push_back(std::move(l2));
        labels.push_back("e" + std::to_string(j) + "2");
    }
    return DetectionScheme(SchemeKind::EuclideanColumn, std::move(ls), std::move(labels));
}

DetectionScheme custom_scheme(std::vector<Matrix> couplings, std::vector<std::string> labels) {
    return DetectionScheme(SchemeKind::Custom, std::move(couplings), std::move(labels));
}

const char* to_string(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::PauliSphere: return "pauli";
        case SchemeKind::GellMannProjective: return "gellmann";
        case SchemeKind::TorusDiagonal: return "torus";
        case SchemeKind::EuclideanColumn: return "euclidean";
        default: return "custom";
    }
}

const char* to_string(NoiseKind kind) {
    return kind == NoiseKind::Output ? "output" : "innovation";
}

}  // namespace qfg
