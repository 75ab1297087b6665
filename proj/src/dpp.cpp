#include "dpacq/dpp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dpacq/error.hpp"
#include "dpacq/log.hpp"

namespace dpacq {

Eigen::MatrixXd LowRankFeature::dense() const {
    if (!keep_basis && coords.cols() != full_width) throw UsageError("feature basis was not tracked");
    if (basis.size() == 0) return coords;
    return coords * basis.transpose();
}

Eigen::MatrixXd LowRankFeature::kernel() const {
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(rows(), rows());
    k.selfadjointView<Eigen::Lower>().rankUpdate(coords);
    return k.selfadjointView<Eigen::Lower>();
}

int LowRankFeature::row_of(int item) const {
    auto it = std::find(items.begin(), items.end(), item);
    return it == items.end() ? -1 : static_cast<int>(it - items.begin());
}

SimilarityKernel gaussian_kernel(const Eigen::MatrixXd& points, double bandwidth) {
    if (!(bandwidth > 0)) throw UsageError("kernel bandwidth must be positive");
    const Eigen::Index n = points.rows();
    SimilarityKernel out;
    out.bandwidth = bandwidth;
    out.L.resize(n, n);
    const double scale = 1.0 / (2.0 * bandwidth * bandwidth);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.L(j, j) = 1.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = std::exp(-(points.row(i) - points.row(j)).squaredNorm() * scale);
            out.L(i, j) = v;
            out.L(j, i) = v;
        }
    }
    return out;
}

double median_bandwidth(const Eigen::MatrixXd& points, Eigen::Index max_points) {
    const Eigen::Index n = std::min(points.rows(), max_points);
    if (n < 2) throw TooFewPoints("median bandwidth needs at least two points");
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((points.row(i) - points.row(j)).norm());
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    if (!(*mid > 0)) throw UsageError("median pairwise distance is zero");
    return *mid;
}

LowRankFeature rff_features(const Eigen::MatrixXd& points, double bandwidth, Eigen::Index dv, std::uint64_t seed) {
    if (dv < 1) throw UsageError("feature size must be at least 1");
    if (!(bandwidth > 0)) throw UsageError("kernel bandwidth must be positive");
    const Eigen::Index d = points.cols();
    Engine rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / bandwidth);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    LowRankFeature f;
    f.frequencies.resize(d, dv);
    f.phases.resize(dv);
    for (Eigen::Index j = 0; j < dv; ++j) {
        for (Eigen::Index c = 0; c < d; ++c) f.frequencies(c, j) = normal(rng);
        f.phases(j) = phase(rng);
    }
    Eigen::MatrixXd arg = points * f.frequencies;
    arg.rowwise() += f.phases.transpose();
    f.coords = std::sqrt(2.0 / static_cast<double>(dv)) * arg.array().cos().matrix();
    f.full_width = dv;
    f.items.resize(static_cast<std::size_t>(points.rows()));
    for (std::size_t i = 0; i < f.items.size(); ++i) f.items[i] = static_cast<int>(i);
    return f;
}

LowRankFeature feature_from_matrix(const Eigen::MatrixXd& V) {
    LowRankFeature f;
    f.coords = V;
    f.full_width = V.cols();
    f.items.resize(static_cast<std::size_t>(V.rows()));
    for (std::size_t i = 0; i < f.items.size(); ++i) f.items[i] = static_cast<int>(i);
    return f;
}

LowRankFeature exact_feature(const Eigen::MatrixXd& L) {
    const Eigen::Index n = L.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(L);
    if (llt.info() != Eigen::Success) llt.compute(L + 1e-10 * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return feature_from_matrix(llt.matrixL());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    const Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return feature_from_matrix(es.eigenvectors() * s.asDiagonal());
}

SimilarityKernel condition_exact(const SimilarityKernel& kernel, const std::vector<int>& B) {
    const Eigen::Index n = kernel.L.rows();
    std::vector<bool> in_b(static_cast<std::size_t>(n), false);
    for (int b : B) {
        if (b < 0 || b >= n) throw UsageError("conditioning index out of range");
        in_b[static_cast<std::size_t>(b)] = true;
    }
    std::vector<int> rest;
    for (int i = 0; i < n; ++i)
        if (!in_b[static_cast<std::size_t>(i)]) rest.push_back(i);
    if (B.empty() || rest.empty()) throw UsageError("conditioning set must be a nonempty proper subset");

    Eigen::MatrixXd m = kernel.L;
    for (int i : rest) m(i, i) += 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    auto invertible = [](const Eigen::PartialPivLU<Eigen::MatrixXd>& f) {
        const Eigen::VectorXd d = f.matrixLU().diagonal().cwiseAbs();
        return d.minCoeff() > 1e-13 * std::max(1.0, d.maxCoeff());
    };
    lu.compute(m);
    if (!invertible(lu)) {
        m.diagonal().array() += 1e-10;
        lu.compute(m);
        if (!invertible(lu)) throw SingularConditioning("L + I_complement is singular");
    }
    const Eigen::MatrixXd inv = lu.inverse();
    const auto r = static_cast<Eigen::Index>(rest.size());
    Eigen::MatrixXd block(r, r);
    for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < r; ++b) block(a, b) = inv(rest[a], rest[b]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu2(block);
    if (!invertible(lu2)) throw SingularConditioning("complement block is singular");
    SimilarityKernel out;
    out.bandwidth = kernel.bandwidth;
    out.L = lu2.inverse() - Eigen::MatrixXd::Identity(r, r);
    out.L = (0.5 * (out.L + out.L.transpose())).eval();
    return out;
}

void condition_lowrank_inplace(LowRankFeature& f, const std::vector<int>& B) {
    if (B.empty()) return;
    std::vector<int> b_rows;
    std::vector<bool> drop(static_cast<std::size_t>(f.rows()), false);
    {
        // item -> row lookup
        std::vector<int> order(f.items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return f.items[a] < f.items[b]; });
        for (int item : B) {
            auto it = std::lower_bound(order.begin(), order.end(), item,
                                       [&](int row, int v) { return f.items[row] < v; });
            if (it == order.end() || f.items[*it] != item) {
                throw UsageError("conditioning item " + std::to_string(item) + " is not active");
            }
            if (drop[static_cast<std::size_t>(*it)]) throw UsageError("conditioning set has duplicate items");
            drop[static_cast<std::size_t>(*it)] = true;
            b_rows.push_back(*it);
        }
    }
    std::vector<int> keep;
    for (int i = 0; i < f.rows(); ++i)
        if (!drop[static_cast<std::size_t>(i)]) keep.push_back(i);

    const Eigen::Index w = f.width();
    Eigen::MatrixXd vbt(w, static_cast<Eigen::Index>(b_rows.size()));
    for (std::size_t c = 0; c < b_rows.size(); ++c) vbt.col(static_cast<Eigen::Index>(c)) = f.coords.row(b_rows[c]).transpose();

    const PivotedQr qr = pivoted_qr(std::move(vbt));
    const Eigen::VectorXd& rdiag = qr.rdiag;
    int r = 0;
    if (rdiag.size() > 0 && rdiag(0) > 0) {
        // |R_ii| relative 1e-6 corresponds to Gram eigenvalues relative 1e-12.
        while (r < rdiag.size() && rdiag(r) > 1e-6 * rdiag(0)) ++r;
    }
    if (r < static_cast<int>(b_rows.size())) {
        log::warn("RankCollapse: conditioning set of " + std::to_string(b_rows.size()) + " items spans rank " +
                  std::to_string(r) + "; dependent rows dropped from the projection");
    }

    // Rows are projected as columns of the transpose so Q^T is applied blocked.
    Eigen::MatrixXd rest_t(w, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) rest_t.col(static_cast<Eigen::Index>(i)) = f.coords.row(keep[i]).transpose();
    std::vector<int> items;
    items.reserve(keep.size());
    for (int i : keep) items.push_back(f.items[static_cast<std::size_t>(i)]);

    if (r > 0) {
        apply_qt(qr, r, rest_t);
        f.coords = rest_t.bottomRows(w - r).transpose();
        if (!f.keep_basis) {
            f.basis.resize(0, 0);
            f.items = std::move(items);
            return;
        }
        Eigen::MatrixXd basis_t = f.basis.size() == 0 ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(w, w))
                                                       : Eigen::MatrixXd(f.basis.transpose());
        apply_qt(qr, r, basis_t);
        f.basis = basis_t.bottomRows(w - r).transpose();
    } else {
        f.coords = rest_t.transpose();
    }
    f.items = std::move(items);
}

LowRankFeature condition_lowrank(const LowRankFeature& feature, const std::vector<int>& B) {
    LowRankFeature out = feature;
    condition_lowrank_inplace(out, B);
    return out;
}

LowRankFeature apply_quality(const LowRankFeature& feature, const Eigen::VectorXd& q) {
    if (q.size() != feature.rows()) throw DimensionMismatch("quality vector length does not match active rows");
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (!std::isfinite(q(i)) || q(i) < 0) throw UsageError("quality weights must be finite and non-negative");
    }
    LowRankFeature out = feature;
    out.coords = q.asDiagonal() * feature.coords;
    return out;
}

Eigen::VectorXd elementary_symmetric(const Eigen::VectorXd& eigenvalues, int k) {
    if (k < 0) throw UsageError("k must be non-negative");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(k + 1);
    e(0) = 1.0;
    for (Eigen::Index n = 0; n < eigenvalues.size(); ++n) {
        const double lam = std::max(eigenvalues(n), 0.0);
        for (int l = std::min<int>(k, static_cast<int>(n) + 1); l >= 1; --l) e(l) += lam * e(l - 1);
    }
    return e;
}

KdppSampler::KdppSampler(const LowRankFeature& feature) : feature_(&feature) {
    const Eigen::MatrixXd& x = feature.coords;
    primal_ = x.rows() <= x.cols();
    Eigen::MatrixXd gram;
    if (primal_) {
        gram = Eigen::MatrixXd::Zero(x.rows(), x.rows());
        gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    } else {
        gram = Eigen::MatrixXd::Zero(x.cols(), x.cols());
        gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    }
    if (gram.rows() == 0) return;
    spectrum_ = SymmetricSpectrum(std::move(gram));
    values_ = spectrum_.values();
    const double top = values_.maxCoeff();
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
        if (!(top > 0) || values_(i) < 1e-12 * top) {
            values_(i) = 0.0;
        } else {
            ++rank_;
        }
    }
}

Batch KdppSampler::draw(int k, Engine& rng, BatchTag tag) const {
    Batch batch;
    batch.tag = tag;
    if (k < 0) throw UsageError("batch size must be non-negative");
    if (k == 0) return batch;
    if (k > rank_) {
        throw RankTooLow("feature rank " + std::to_string(rank_) + " is below batch size " + std::to_string(k));
    }
    std::vector<int> pos;  // spectrum indices of positive eigenvalues, ascending
    for (Eigen::Index i = 0; i < values_.size(); ++i)
        if (values_(i) > 0) pos.push_back(static_cast<int>(i));
    const int n = static_cast<int>(pos.size());
    double mean = 0;
    for (int i : pos) mean += values_(i);
    mean /= n;

    // E(l, j) = e_l of the first j normalized eigenvalues.
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(k + 1, n + 1);
    e.row(0).setOnes();
    for (int j = 1; j <= n; ++j) {
        const double lam = values_(pos[j - 1]) / mean;
        for (int l = 1; l <= k; ++l) e(l, j) = e(l, j - 1) + lam * e(l - 1, j - 1);
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> chosen;
    int remaining = k;
    for (int j = n; j >= 1 && remaining > 0; --j) {
        const double lam = values_(pos[j - 1]) / mean;
        const double marginal = lam * e(remaining - 1, j - 1) / e(remaining, j);
        if (unif(rng) < marginal) {
            chosen.push_back(pos[j - 1]);
            --remaining;
        }
    }
    std::sort(chosen.begin(), chosen.end());

    Eigen::MatrixXd v = spectrum_.vectors(chosen);
    if (!primal_) {
        v = feature_->coords * v;
        for (Eigen::Index c = 0; c < v.cols(); ++c) v.col(c) /= std::sqrt(values_(chosen[static_cast<std::size_t>(c)]));
    }

    while (v.cols() > 0) {
        const Eigen::VectorXd p = v.rowwise().squaredNorm();
        const double target = unif(rng) * p.sum();
        Eigen::Index i = 0;
        double acc = 0;
        Eigen::Index last_positive = -1;
        for (; i < p.size(); ++i) {
            if (p(i) <= 0) continue;
            last_positive = i;
            acc += p(i);
            if (acc > target) break;
        }
        if (i == p.size()) i = last_positive;
        batch.indices.push_back(feature_->items[static_cast<std::size_t>(i)]);

        Eigen::Index j = 0;
        v.row(i).cwiseAbs().maxCoeff(&j);
        const Eigen::VectorXd vj = v.col(j);
        const Eigen::RowVectorXd coeff = v.row(i) / v(i, j);
        v.noalias() -= vj * coeff;
        const Eigen::Index cols = v.cols();
        if (j < cols - 1) v.col(j) = v.col(cols - 1);
        v.conservativeResize(Eigen::NoChange, cols - 1);
        if (v.cols() > 0) {
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
            v = qr.householderQ() * Eigen::MatrixXd::Identity(v.rows(), v.cols());
        }
    }
    return batch;
}

Batch sample_kdpp(const LowRankFeature& feature, int k, Engine& rng, BatchTag tag) {
    return KdppSampler(feature).draw(k, rng, tag);
}

Batch sample_kdpp(const LowRankFeature& feature, int k, std::uint64_t seed, BatchTag tag) {
    Engine rng(seed);
    return sample_kdpp(feature, k, rng, tag);
}

}  // namespace dpacq
