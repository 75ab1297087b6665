#include "dpacq/linalg.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include <lapacke.h>

#include "dpacq/error.hpp"

namespace dpacq {

SymmetricSpectrum::SymmetricSpectrum(Eigen::MatrixXd symmetric) : reflectors_(std::move(symmetric)) {
    const auto n = static_cast<lapack_int>(reflectors_.rows());
    if (reflectors_.cols() != n) throw DimensionMismatch("spectrum of a non-square matrix");
    diag_.resize(n);
    offdiag_.resize(std::max<lapack_int>(n, 1));
    offdiag_.setZero();
    tau_.resize(std::max<lapack_int>(n, 1));
    values_.resize(n);
    if (n == 0) return;

    lapack_int info = LAPACKE_dsytrd(LAPACK_COL_MAJOR, 'L', n, reflectors_.data(), n, diag_.data(),
                                     offdiag_.data(), tau_.data());
    if (info != 0) throw SolverSingular("dsytrd failed with info " + std::to_string(info));

    values_ = diag_;
    Eigen::VectorXd e = offdiag_;
    info = LAPACKE_dsterf(n, values_.data(), e.data());
    if (info != 0) throw SolverSingular("dsterf failed with info " + std::to_string(info));
}

Eigen::MatrixXd SymmetricSpectrum::vectors(std::span<const int> indices) const {
    const auto n = static_cast<lapack_int>(values_.size());
    const auto m = static_cast<lapack_int>(indices.size());
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, m);
    if (m == 0) return z;

    Eigen::VectorXd d(n);
    Eigen::VectorXd e(n);
    Eigen::VectorXd w(n);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(n));
    for (lapack_int col = 0; col < m; ++col) {
        const int idx = indices[static_cast<std::size_t>(col)];
        if (idx < 0 || idx >= n) throw DimensionMismatch("eigenvector index out of range");
        d = diag_;
        e = offdiag_.head(n);
        lapack_int found = 0;
        lapack_logical tryrac = 1;
        lapack_int info = LAPACKE_dstemr(LAPACK_COL_MAJOR, 'V', 'I', n, d.data(), e.data(), 0.0, 0.0,
                                         idx + 1, idx + 1, &found, w.data(), z.col(col).data(), n, 1,
                                         support.data(), &tryrac);
        if (info != 0 || found != 1) {
            throw SolverSingular("dstemr failed for eigenvector " + std::to_string(idx));
        }
    }
    lapack_int info = LAPACKE_dormtr(LAPACK_COL_MAJOR, 'L', 'L', 'N', n, m, reflectors_.data(), n,
                                     tau_.data(), z.data(), n);
    if (info != 0) throw SolverSingular("dormtr failed with info " + std::to_string(info));
    return z;
}

TopEigen top_eigenpairs(Eigen::MatrixXd symmetric, int count) {
    const auto n = static_cast<lapack_int>(symmetric.rows());
    if (symmetric.cols() != n) throw DimensionMismatch("eigenpairs of a non-square matrix");
    count = std::clamp(count, 0, static_cast<int>(n));
    TopEigen out;
    out.values.resize(count);
    out.vectors.resize(n, count);
    if (count == 0) return out;

    Eigen::VectorXd w(n);
    Eigen::MatrixXd z(n, count);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(count));
    lapack_int found = 0;
    lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'L', n, symmetric.data(), n, 0.0, 0.0,
                                     n - count + 1, n, 0.0, &found, w.data(), z.data(), n,
                                     support.data());
    if (info != 0 || found != count) throw SolverSingular("dsyevr failed with info " + std::to_string(info));
    for (int j = 0; j < count; ++j) {
        out.values(j) = w(count - 1 - j);
        out.vectors.col(j) = z.col(count - 1 - j);
    }
    return out;
}

PivotedQr pivoted_qr(Eigen::MatrixXd a) {
    const auto m = static_cast<lapack_int>(a.rows());
    const auto n = static_cast<lapack_int>(a.cols());
    PivotedQr out;
    const lapack_int k = std::min(m, n);
    out.tau.resize(std::max<lapack_int>(k, 1));
    std::vector<lapack_int> jpvt(static_cast<std::size_t>(std::max<lapack_int>(n, 1)), 0);
    if (k > 0) {
        const lapack_int info = LAPACKE_dgeqp3(LAPACK_COL_MAJOR, m, n, a.data(), m, jpvt.data(), out.tau.data());
        if (info != 0) throw SolverSingular("dgeqp3 failed with info " + std::to_string(info));
    }
    out.rdiag = a.diagonal().head(k).cwiseAbs();
    out.factors = std::move(a);
    return out;
}

void apply_qt(const PivotedQr& qr, Eigen::Index reflectors, Eigen::MatrixXd& c) {
    const auto m = static_cast<lapack_int>(c.rows());
    if (m != qr.factors.rows()) throw DimensionMismatch("Q^T applied to a matrix of the wrong height");
    if (reflectors <= 0 || c.cols() == 0) return;
    const lapack_int info = LAPACKE_dormqr(LAPACK_COL_MAJOR, 'L', 'T', m, static_cast<lapack_int>(c.cols()),
                                           static_cast<lapack_int>(reflectors), qr.factors.data(), m,
                                           qr.tau.data(), c.data(), m);
    if (info != 0) throw SolverSingular("dormqr failed with info " + std::to_string(info));
}

}  // namespace dpacq
