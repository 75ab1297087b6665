#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dpacq/linalg.hpp"
#include "dpacq/rng.hpp"

namespace dpacq {

struct SimilarityKernel {
    Eigen::MatrixXd L;
    double bandwidth = 1.0;
};

// Row-feature representation of a PSD kernel over the still-active items.
//
// The full-width feature matrix is coords * basis^T, with `basis` holding
// orthonormal columns (empty basis = identity). Conditioning shrinks the
// width instead of carrying a projected D_v-wide matrix around.
struct LowRankFeature {
    Eigen::MatrixXd coords;          // active rows x width
    Eigen::MatrixXd basis;           // D_v x width, or empty
    std::vector<int> items;          // item id of each row
    Eigen::MatrixXd frequencies;     // d x D_v (RFF only)
    Eigen::VectorXd phases;          // D_v (RFF only)
    Eigen::Index full_width = 0;     // D_v
    bool keep_basis = true;          // false: conditioning skips the basis update, dense() unavailable

    Eigen::Index rows() const { return coords.rows(); }
    Eigen::Index width() const { return coords.cols(); }
    Eigen::MatrixXd dense() const;   // rows x D_v
    Eigen::MatrixXd kernel() const;  // implied rows x rows kernel
    int row_of(int item) const;      // -1 when not active
};

enum class BatchTag { shape, property };

struct Batch {
    std::vector<int> indices;  // item ids
    BatchTag tag = BatchTag::shape;
};

SimilarityKernel gaussian_kernel(const Eigen::MatrixXd& points, double bandwidth);

// Median pairwise Euclidean distance over at most `max_points` leading rows.
double median_bandwidth(const Eigen::MatrixXd& points, Eigen::Index max_points = 1000);

LowRankFeature rff_features(const Eigen::MatrixXd& points, double bandwidth, Eigen::Index dv, std::uint64_t seed);

// Exact feature V with V V^T = L (Cholesky with jitter, D_v = n).
LowRankFeature exact_feature(const Eigen::MatrixXd& L);

// Feature over items 0..n-1 from an explicit n x D matrix.
LowRankFeature feature_from_matrix(const Eigen::MatrixXd& V);

// Conditional kernel over the complement of B; rows ordered as the complement in ascending order.
SimilarityKernel condition_exact(const SimilarityKernel& kernel, const std::vector<int>& B);

// Removes the rows of B and projects every remaining row onto the orthogonal complement of span(V_B).
LowRankFeature condition_lowrank(const LowRankFeature& feature, const std::vector<int>& B);
void condition_lowrank_inplace(LowRankFeature& feature, const std::vector<int>& B);

// Scales row i by q(i); q is indexed by active row.
LowRankFeature apply_quality(const LowRankFeature& feature, const Eigen::VectorXd& q);

// e_0..e_k of the given values.
Eigen::VectorXd elementary_symmetric(const Eigen::VectorXd& eigenvalues, int k);

// k-DPP sampler over a frozen feature, which must outlive the sampler.
// The spectral decomposition is reused across draws.
class KdppSampler {
public:
    explicit KdppSampler(const LowRankFeature& feature);

    int rank() const { return rank_; }
    Batch draw(int k, Engine& rng, BatchTag tag = BatchTag::shape) const;

private:
    const LowRankFeature* feature_;
    bool primal_ = false;
    SymmetricSpectrum spectrum_;
    Eigen::VectorXd values_;  // ascending, clamped
    int rank_ = 0;
};

Batch sample_kdpp(const LowRankFeature& feature, int k, std::uint64_t seed, BatchTag tag = BatchTag::shape);
Batch sample_kdpp(const LowRankFeature& feature, int k, Engine& rng, BatchTag tag = BatchTag::shape);

}  // namespace dpacq
