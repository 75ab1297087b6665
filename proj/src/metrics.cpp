#include "dpacq/metrics.hpp"

#include <numeric>
#include <random>
#include <vector>

#include "dpacq/error.hpp"

namespace dpacq {
namespace {

double pair_sum(const Eigen::MatrixXd& p) {
    double s = 0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = i + 1; j < p.rows(); ++j) s += (p.row(i) - p.row(j)).norm();
    return s;
}

double pairs(Eigen::Index n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

}  // namespace

double mean_pairwise_distance(const Eigen::MatrixXd& points) {
    if (points.rows() < 2) throw TooFewPoints("mean pairwise distance needs at least two points");
    return pair_sum(points) / pairs(points.rows());
}

Eigen::VectorXd iid_replicate_means(Eigen::Index size, const Eigen::MatrixXd& population, int n_rep, Engine& rng) {
    const Eigen::Index big_n = population.rows();
    if (size < 2 || big_n < size) throw TooFewPoints("iid replicates need 2 <= size <= population");
    if (n_rep < 1) throw UsageError("n_rep must be at least 1");
    Eigen::VectorXd means(n_rep);
    std::vector<int> perm(static_cast<std::size_t>(big_n));
    Eigen::MatrixXd subset(size, population.cols());
    for (int r = 0; r < n_rep; ++r) {
        std::iota(perm.begin(), perm.end(), 0);
        for (Eigen::Index i = 0; i < size; ++i) {
            std::uniform_int_distribution<Eigen::Index> pick(i, big_n - 1);
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
            subset.row(i) = population.row(perm[static_cast<std::size_t>(i)]);
        }
        means(r) = mean_pairwise_distance(subset);
    }
    return means;
}

GainReport distance_gain(const Eigen::MatrixXd& selected, const Eigen::MatrixXd& population, int n_rep, Engine& rng) {
    if (selected.cols() != population.cols()) throw DimensionMismatch("selected and population differ in dimension");
    GainReport g;
    g.mean_distance = mean_pairwise_distance(selected);
    g.replicate_means = iid_replicate_means(selected.rows(), population, n_rep, rng);
    g.n_rep = n_rep;
    g.gain = g.mean_distance / g.replicate_means.mean();
    return g;
}

GainReport distance_gain(const Eigen::MatrixXd& selected, const Eigen::MatrixXd& population, int n_rep,
                         std::uint64_t seed) {
    Engine rng(seed);
    return distance_gain(selected, population, n_rep, rng);
}

void PairDistanceAccumulator::add(const Eigen::MatrixXd& rows) {
    if (points_.rows() == 0 && points_.cols() != rows.cols()) points_.resize(0, rows.cols());
    if (rows.cols() != points_.cols()) throw DimensionMismatch("accumulator rows differ in dimension");
    const Eigen::Index old = points_.rows();
    points_.conservativeResize(old + rows.rows(), Eigen::NoChange);
    points_.bottomRows(rows.rows()) = rows;
    for (Eigen::Index i = old; i < points_.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) sum_ += (points_.row(i) - points_.row(j)).norm();
}

double PairDistanceAccumulator::mean() const {
    if (points_.rows() < 2) throw TooFewPoints("mean pairwise distance needs at least two points");
    return sum_ / pairs(points_.rows());
}

}  // namespace dpacq
