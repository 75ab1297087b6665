#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "dpacq/rng.hpp"

namespace dpacq {

struct GainReport {
    double gain = 0;
    double mean_distance = 0;
    int n_rep = 0;
    Eigen::VectorXd replicate_means;
};

// Mean Euclidean distance over unordered pairs.
double mean_pairwise_distance(const Eigen::MatrixXd& points);

// Mean pairwise distance of `selected` over the average of n_rep uniform
// without-replacement subsets of `population` of equal size.
GainReport distance_gain(const Eigen::MatrixXd& selected, const Eigen::MatrixXd& population, int n_rep,
                         std::uint64_t seed);
GainReport distance_gain(const Eigen::MatrixXd& selected, const Eigen::MatrixXd& population, int n_rep, Engine& rng);

// Mean of distance_gain's replicate denominators alone.
Eigen::VectorXd iid_replicate_means(Eigen::Index size, const Eigen::MatrixXd& population, int n_rep, Engine& rng);

// Running pair-distance sum over a growing point set.
class PairDistanceAccumulator {
public:
    PairDistanceAccumulator() : points_(0, 0) {}
    explicit PairDistanceAccumulator(Eigen::Index dim) : points_(0, dim) {}

    void add(const Eigen::MatrixXd& rows);
    Eigen::Index count() const { return points_.rows(); }
    double pair_sum() const { return sum_; }
    double mean() const;  // requires count() >= 2
    const Eigen::MatrixXd& points() const { return points_; }

private:
    Eigen::MatrixXd points_;
    double sum_ = 0;
};

}  // namespace dpacq
