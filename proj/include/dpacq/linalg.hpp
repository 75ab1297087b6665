#pragma once

#include <map>
#include <span>

#include <Eigen/Dense>

namespace dpacq {

/// Spectrum of a dense symmetric matrix, computed lazily.
///
/// Construction performs a Householder tridiagonal reduction and computes all
/// eigenvalues (ascending). Eigenvectors are produced only for the indices
/// requested, by MRRR on the tridiagonal form followed by back-transformation,
/// so a caller that needs k of N eigenvectors pays O(N^2 k) instead of O(N^3).
class SymmetricSpectrum {
public:
    SymmetricSpectrum() = default;
    explicit SymmetricSpectrum(Eigen::MatrixXd symmetric);

    Eigen::Index size() const { return values_.size(); }
    const Eigen::VectorXd& values() const { return values_; }

    // Columns are unit eigenvectors for the given ascending-order indices.
    Eigen::MatrixXd vectors(std::span<const int> indices) const;

private:
    Eigen::MatrixXd reflectors_;
    Eigen::VectorXd diag_;
    Eigen::VectorXd offdiag_;
    Eigen::VectorXd tau_;
    Eigen::VectorXd values_;
};

struct TopEigen {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // matching columns
};

// Largest `count` eigenpairs of a symmetric matrix.
TopEigen top_eigenpairs(Eigen::MatrixXd symmetric, int count);

// Column-pivoted Householder QR (blocked LAPACK) of an m x n matrix.
struct PivotedQr {
    Eigen::MatrixXd factors;  // reflectors below the diagonal, R on and above
    Eigen::VectorXd tau;
    Eigen::VectorXd rdiag;    // |R_ii|, non-increasing
};
PivotedQr pivoted_qr(Eigen::MatrixXd a);
// c <- Q^T c using the first `reflectors` Householder vectors of the factorization.
void apply_qt(const PivotedQr& qr, Eigen::Index reflectors, Eigen::MatrixXd& c);

}  // namespace dpacq
