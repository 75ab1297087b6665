#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dpacq/error.hpp"
#include "dpacq/gp.hpp"
#include "support.hpp"

using namespace dpacq;

namespace {

Eigen::MatrixXd uniform_points(Eigen::Index n, Eigen::Index d, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd z(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) z(i, j) = u(rng);
    return z;
}

Eigen::MatrixXd smooth_outputs(const Eigen::MatrixXd& z) {
    Eigen::MatrixXd p(z.rows(), 2);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double a = z(i, 0);
        const double b = z.cols() > 1 ? z(i, 1) : 0.0;
        p(i, 0) = std::sin(2 * a) + 0.5 * b * b;
        p(i, 1) = std::cos(a + b) + 0.3 * a;
    }
    return p;
}

// Direct kriging with a general LU solve.
struct DenseKriging {
    double beta = 0;
    double mean = 0;
};

DenseKriging dense_kriging(const Eigen::MatrixXd& z, const Eigen::VectorXd& p, const Eigen::VectorXd& omega,
                           const Eigen::VectorXd& query) {
    const Eigen::Index n = z.rows();
    Eigen::MatrixXd R(n, n);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double dq = 0;
        for (Eigen::Index d = 0; d < z.cols(); ++d) dq += std::pow(10.0, omega(d)) * std::pow(z(i, d) - query(d), 2);
        r(i) = std::exp(-dq);
        for (Eigen::Index j = 0; j < n; ++j) {
            double s = 0;
            for (Eigen::Index d = 0; d < z.cols(); ++d) s += std::pow(10.0, omega(d)) * std::pow(z(i, d) - z(j, d), 2);
            R(i, j) = std::exp(-s);
        }
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(n);
    DenseKriging k;
    k.beta = one.dot(lu.solve(p)) / one.dot(lu.solve(one));
    k.mean = k.beta + r.dot(lu.solve(p - k.beta * one));
    return k;
}

}  // namespace

TEST_CASE("correlation examples") {
    Eigen::VectorXd a(3), b(3), w = Eigen::VectorXd::Zero(3);
    a << 0.3, -1.0, 2.0;
    CHECK(correlation(a, a, w) == 1.0);
    b = a;
    b(1) += 1.0;
    CHECK(correlation(a, b, w) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(correlation(a, b, w) == doctest::Approx(0.367879).epsilon(1e-6));
    double prev = correlation(a, b, w);
    for (int step = 1; step <= 5; ++step) {
        w(1) = 0.2 * step;
        const double cur = correlation(a, b, w);
        CHECK(cur < prev);
        prev = cur;
    }
    w(1) = 2.0;
    b(1) = a(1);
    CHECK(correlation(a, b, w) == 1.0);

    const Eigen::MatrixXd z = uniform_points(5, 3, -1, 1, 1);
    const Eigen::MatrixXd R = correlation_matrix(z, z, Eigen::VectorXd::Constant(3, 0.1));
    for (Eigen::Index i = 0; i < 5; ++i) {
        CHECK(R(i, i) == 1.0);
        for (Eigen::Index j = 0; j < 5; ++j) {
            CHECK(R(i, j) == doctest::Approx(correlation(z.row(i).transpose(), z.row(j).transpose(),
                                                         Eigen::VectorXd::Constant(3, 0.1))).epsilon(1e-14));
        }
    }
}

TEST_CASE("roughness residual examples") {
    Eigen::VectorXd a = Eigen::VectorXd::Constant(4, 0.7);
    CHECK(roughness_residual(a, a) == 0.0);
    Eigen::VectorXd b = a.array() + 0.02;
    CHECK(roughness_residual(b, a) == doctest::Approx(0.02).epsilon(1e-12));
    Eigen::VectorXd c(1), d(1);
    c << 0.05;
    d << 0.0;
    CHECK(roughness_residual(c, d) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK_THROWS_AS(roughness_residual(a, c), DimensionMismatch);
}

TEST_CASE("profiled likelihood gradient matches central differences") {
    const Eigen::MatrixXd z = uniform_points(25, 3, -1.5, 1.5, 3);
    Eigen::MatrixXd p(25, 2);
    p.col(0) = smooth_outputs(z).col(0);
    p.col(1) = (z.col(2).array() * 1.5).sin().matrix() + z.col(0);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.5, 1.0);
    const double nugget = 1e-8;
    const double h = 1e-5;
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd w(3);
        for (Eigen::Index d = 0; d < 3; ++d) w(d) = u(rng);
        const NllValue v = profiled_nll(z, p, w, nugget, true);
        REQUIRE(v.ok);
        Eigen::VectorXd fd(3);
        for (Eigen::Index d = 0; d < 3; ++d) {
            Eigen::VectorXd wp = w, wm = w;
            wp(d) += h;
            wm(d) -= h;
            const NllValue fp = profiled_nll(z, p, wp, nugget, false);
            const NllValue fm = profiled_nll(z, p, wm, nugget, false);
            REQUIRE(fp.ok);
            REQUIRE(fm.ok);
            fd(d) = (fp.value - fm.value) / (2 * h);
        }
        const double err = (v.gradient - fd).norm() / std::max(fd.norm(), 1e-3);
        CHECK(err <= 1e-4);
        ++checked;
    }
    CHECK(checked == 20);
}

TEST_CASE("nugget gradient matches central differences") {
    const Eigen::MatrixXd z = uniform_points(25, 3, -1.5, 1.5, 5);
    const Eigen::MatrixXd p = smooth_outputs(z);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(3, -0.4);
    const double h = 1e-5;
    for (double lg : {-7.0, -4.0, -2.5, -1.0}) {
        const NllValue v = profiled_nll(z, p, w, std::pow(10.0, lg), true);
        REQUIRE(v.ok);
        const double fd = (profiled_nll(z, p, w, std::pow(10.0, lg + h), false).value -
                           profiled_nll(z, p, w, std::pow(10.0, lg - h), false).value) /
                          (2 * h);
        CHECK(std::abs(v.nugget_gradient - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
    }
}

TEST_CASE("estimated nugget tracks output noise") {
    const Eigen::MatrixXd z = uniform_points(80, 2, -2, 2, 6);
    const Eigen::MatrixXd clean = smooth_outputs(z);
    Eigen::MatrixXd noisy = clean;
    std::mt19937_64 g(7);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += noise(g);
    GpConfig cfg;
    cfg.restarts = 2;
    Engine r1(2), r2(2);
    const GpModel a = fit(z, clean, std::nullopt, cfg, r1);
    const GpModel b = fit(z, noisy, std::nullopt, cfg, r2);
    CHECK(a.nugget <= 1e-6);
    CHECK(b.nugget >= 1e-4);
    // the delta term keeps training outputs reproduced either way
    CHECK((predict_mean(b, z) - noisy).cwiseAbs().maxCoeff() <= 1e-6);

    cfg.estimate_nugget = false;
    Engine r3(2);
    CHECK(fit(z, noisy, std::nullopt, cfg, r3).nugget <= cfg.nugget_max);
}

TEST_CASE("fit interpolates its training data") {
    const Eigen::MatrixXd z = uniform_points(30, 2, -2, 2, 4);
    const Eigen::MatrixXd p = smooth_outputs(z);
    Engine rng(1);
    const GpModel m = fit(z, p, std::nullopt, GpConfig{}, rng);
    CHECK(m.nugget <= 1e-6);
    CHECK(m.omega.minCoeff() >= -3.0);
    CHECK(m.omega.maxCoeff() <= 3.0);
    const Eigen::MatrixXd mean = predict_mean(m, z);
    CHECK((mean - p).cwiseAbs().maxCoeff() <= 1e-5);
    const auto preds = predict(m, z);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        CHECK((preds[static_cast<std::size_t>(i)].mean - p.row(i)).cwiseAbs().maxCoeff() <= 1e-5);
    }
}

TEST_CASE("kriging mean matches a dense oracle on three points") {
    Eigen::MatrixXd z(3, 1);
    z << -1.0, 0.2, 1.5;
    Eigen::MatrixXd p(3, 1);
    p << 0.4, -0.3, 1.1;
    Eigen::VectorXd w(1);
    w << -0.2;
    const GpModel m = assemble_model(z, p, w, GpConfig{});
    for (double q : {-2.0, -0.4, 0.9, 3.0}) {
        Eigen::VectorXd qv(1);
        qv << q;
        const DenseKriging k = dense_kriging(z, p.col(0), w, qv);
        CHECK(m.beta(0) == doctest::Approx(k.beta).epsilon(1e-8));
        Eigen::MatrixXd qm(1, 1);
        qm << q;
        CHECK(predict_mean(m, qm)(0, 0) == doctest::Approx(k.mean).epsilon(1e-8));
    }
}

TEST_CASE("far-field prediction reverts to the prior") {
    const Eigen::MatrixXd z = uniform_points(20, 2, -1, 1, 5);
    const Eigen::MatrixXd p = smooth_outputs(z);
    const GpModel m = assemble_model(z, p, Eigen::VectorXd::Constant(2, 0.0), GpConfig{});
    Eigen::MatrixXd far(1, 2);
    far << 1e3, -1e3;
    const auto pr = predict(m, far).front();
    CHECK((pr.mean - m.beta).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pr.cov - m.sigma);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("posterior covariance is symmetric PSD") {
    const Eigen::MatrixXd z = uniform_points(25, 3, -1, 1, 6);
    Eigen::MatrixXd p(25, 3);
    p.leftCols(2) = smooth_outputs(z);
    p.col(2) = z.col(2).array().square();
    Engine rng(2);
    const GpModel m = fit(z, p, std::nullopt, GpConfig{}, rng);
    const auto preds = predict(m, uniform_points(50, 3, -1.5, 1.5, 7));
    for (const auto& pr : preds) {
        CHECK((pr.cov - pr.cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pr.cov);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8);
    }
}

TEST_CASE("an extra training point never increases the variance factor") {
    // Fixed omega; compare cov / Sigma so the profiled Sigma estimate does not enter.
    const Eigen::MatrixXd z = uniform_points(16, 2, -1, 1, 8);
    Eigen::MatrixXd p = smooth_outputs(z).leftCols(1);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.2);
    const Eigen::MatrixXd queries = uniform_points(40, 2, -1.3, 1.3, 9);
    for (Eigen::Index n = 8; n < 16; ++n) {
        const GpModel a = assemble_model(z.topRows(n), p.topRows(n), w, GpConfig{});
        const GpModel b = assemble_model(z.topRows(n + 1), p.topRows(n + 1), w, GpConfig{});
        REQUIRE(a.nugget == b.nugget);
        const auto pa = predict(a, queries);
        const auto pb = predict(b, queries);
        for (std::size_t q = 0; q < pa.size(); ++q) {
            CHECK(pb[q].cov(0, 0) / b.sigma(0, 0) <= pa[q].cov(0, 0) / a.sigma(0, 0) + 1e-8);
        }
    }
}

TEST_CASE("constant outputs give beta = c and vanishing Sigma") {
    const Eigen::MatrixXd z = uniform_points(12, 2, -1, 1, 10);
    Eigen::MatrixXd p(12, 2);
    p.col(0).setConstant(2.5);
    p.col(1).setConstant(-0.75);
    Engine rng(3);
    const GpModel m = fit(z, p, std::nullopt, GpConfig{}, rng);
    CHECK(m.beta(0) == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(m.beta(1) == doctest::Approx(-0.75).epsilon(1e-10));
    CHECK(m.sigma.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("roughness recovered from a noiseless sample path") {
    const Eigen::Index n = 80;
    const Eigen::MatrixXd z = uniform_points(n, 2, -2, 2, 11);
    Eigen::VectorXd truth(2);
    truth << 0.3, -0.5;
    Eigen::MatrixXd R = correlation_matrix(z, z, truth);
    R.diagonal().array() += 1e-10;
    const Eigen::LLT<Eigen::MatrixXd> llt(R);
    REQUIRE(llt.info() == Eigen::Success);
    const Eigen::MatrixXd p = Eigen::MatrixXd(llt.matrixL()) * testing::random_matrix(n, 3, 12);
    Engine rng(4);
    const GpModel m = fit(z, p, std::nullopt, GpConfig{}, rng);
    CHECK(std::abs(m.omega(0) - truth(0)) <= 0.5);
    CHECK(std::abs(m.omega(1) - truth(1)) <= 0.5);
    CHECK(m.nugget <= 1e-6);
}

TEST_CASE("fit is deterministic and honours the warm start") {
    const Eigen::MatrixXd z = uniform_points(30, 3, -1.5, 1.5, 13);
    Eigen::MatrixXd p(30, 2);
    p.col(0) = smooth_outputs(z).col(0);
    p.col(1) = z.col(2);
    Engine r1(7), r2(7);
    const GpModel a = fit(z, p, std::nullopt, GpConfig{}, r1);
    const GpModel b = fit(z, p, std::nullopt, GpConfig{}, r2);
    CHECK(a.omega == b.omega);
    CHECK(a.nll == b.nll);

    GpConfig only_warm;
    only_warm.restarts = 0;
    Engine r3(8);
    const GpModel c = fit(z, p, a.omega, only_warm, r3);
    CHECK((c.omega - a.omega).cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(c.nll <= a.nll + 1e-6);

    GpConfig cold_only;
    cold_only.warm_restarts = false;
    Engine r4(8), r5(8);
    const GpModel d = fit(z, p, a.omega, cold_only, r4);
    CHECK(d.omega == c.omega);
    CHECK(r4() == r5());  // no restart draws were taken
}

TEST_CASE("duplicates are dropped before fitting") {
    Eigen::MatrixXd z = uniform_points(12, 2, -1, 1, 14);
    z.row(5) = z.row(2);
    z(9, 0) = z(1, 0) + 1e-12;
    z(9, 1) = z(1, 1);
    const auto keep = dedupe_rows(z, 1e-10);
    CHECK(keep.size() == 10);
    CHECK(std::find(keep.begin(), keep.end(), 5) == keep.end());
    CHECK(std::find(keep.begin(), keep.end(), 9) == keep.end());
    const Eigen::MatrixXd p = smooth_outputs(z);
    Engine rng(5);
    const GpModel m = fit(z, p, std::nullopt, GpConfig{}, rng);
    CHECK(m.train_rows == keep);
    CHECK(m.train_z.rows() == 10);
}

TEST_CASE("fit input errors") {
    Engine rng(1);
    const Eigen::MatrixXd z = uniform_points(4, 3, -1, 1, 15);
    CHECK_THROWS_AS(fit(z, smooth_outputs(z), std::nullopt, GpConfig{}, rng), TooFewPoints);
    CHECK_THROWS_AS(fit(z, Eigen::MatrixXd::Zero(3, 2), std::nullopt, GpConfig{}, rng), DimensionMismatch);
    const Eigen::MatrixXd z2 = uniform_points(10, 2, -1, 1, 16);
    CHECK_THROWS_AS(fit(z2, smooth_outputs(z2), Eigen::VectorXd::Zero(3), GpConfig{}, rng), DimensionMismatch);
}
