#include "dpacq/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dpacq/error.hpp"
#include "dpacq/optimize.hpp"

namespace dpacq {
namespace {

struct Factor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool ok = false;
};

Factor factor_correlation(Eigen::MatrixXd r, double nugget) {
    r.diagonal().array() += nugget;
    Factor f;
    f.llt.compute(r);
    if (f.llt.info() != Eigen::Success) return f;
    // Every exact pivot of R + nugget I is at least the nugget.
    const auto& l = f.llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        const double pivot = l(i, i) * l(i, i);
        if (!(pivot >= 0.5 * nugget)) return f;
    }
    f.ok = true;
    return f;
}

// Keeps log det(Sigma) finite for outputs without variance.
double sigma_floor(const Eigen::MatrixXd& p) {
    const Eigen::RowVectorXd mean = p.colwise().mean();
    const double var = (p.rowwise() - mean).squaredNorm() / static_cast<double>(p.rows() * p.cols());
    return 1e-10 * var + 1e-300;
}

}  // namespace

double correlation(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                   const Eigen::VectorXd& omega) {
    double s = 0;
    for (Eigen::Index d = 0; d < omega.size(); ++d) {
        const double diff = a(d) - b(d);
        s += std::pow(10.0, omega(d)) * diff * diff;
    }
    return std::exp(-s);
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const Eigen::VectorXd& omega) {
    const Eigen::VectorXd theta = omega.unaryExpr([](double w) { return std::pow(10.0, w); });
    Eigen::MatrixXd r(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            double s = 0;
            for (Eigen::Index d = 0; d < theta.size(); ++d) {
                const double diff = a(i, d) - b(j, d);
                s += theta(d) * diff * diff;
            }
            r(i, j) = std::exp(-s);
        }
    }
    return r;
}

namespace {

// Query-vs-train correlation. The nugget is a delta term of the covariance, so a query that
// coincides with a training input sees it too and the mean interpolates that output exactly.
Eigen::MatrixXd query_correlation(const GpModel& model, const Eigen::MatrixXd& query) {
    Eigen::MatrixXd rq = correlation_matrix(query, model.train_z, model.omega);
    if (model.nugget <= 0) return rq;
    for (Eigen::Index j = 0; j < model.train_z.rows(); ++j) {
        for (Eigen::Index i = 0; i < query.rows(); ++i) {
            if (rq(i, j) == 1.0 && query.row(i) == model.train_z.row(j)) rq(i, j) += model.nugget;
        }
    }
    return rq;
}

}  // namespace

NllValue profiled_nll(const Eigen::MatrixXd& z, const Eigen::MatrixXd& p, const Eigen::VectorXd& omega,
                      double nugget, bool with_gradient) {
    NllValue out;
    const Eigen::Index n = z.rows();
    const Eigen::Index m = p.cols();
    const Eigen::MatrixXd r = correlation_matrix(z, z, omega);
    Factor f = factor_correlation(r, nugget);
    if (!f.ok) return out;

    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd r_inv_one = f.llt.solve(ones);
    const double s = ones.dot(r_inv_one);
    const Eigen::RowVectorXd beta = (r_inv_one.transpose() * p) / s;
    const Eigen::MatrixXd e = p.rowwise() - beta;
    const Eigen::MatrixXd ae = f.llt.solve(e);
    Eigen::MatrixXd sigma = (e.transpose() * ae) / static_cast<double>(n);
    sigma.diagonal().array() += sigma_floor(p);
    Eigen::LLT<Eigen::MatrixXd> sigma_llt(sigma);
    if (sigma_llt.info() != Eigen::Success) return out;

    const auto& l = f.llt.matrixLLT();
    double logdet_r = 0;
    for (Eigen::Index i = 0; i < n; ++i) logdet_r += 2.0 * std::log(l(i, i));
    double logdet_s = 0;
    for (Eigen::Index i = 0; i < m; ++i) logdet_s += 2.0 * std::log(sigma_llt.matrixLLT()(i, i));
    out.value = 0.5 * static_cast<double>(n) * logdet_s + 0.5 * static_cast<double>(m) * logdet_r;
    if (!std::isfinite(out.value)) return out;
    out.ok = true;
    if (!with_gradient) return out;

    // d nll = sum_ij G_ij dR_ij with G = (m/2) R^-1 - 1/2 (R^-1 E) S^-1 (R^-1 E)^T;
    // the beta-derivative term vanishes at the GLS optimum.
    Eigen::MatrixXd g = f.llt.solve(Eigen::MatrixXd::Identity(n, n)) * (0.5 * static_cast<double>(m));
    const Eigen::MatrixXd w = sigma_llt.solve(ae.transpose());  // m x n
    g.noalias() -= 0.5 * ae * w;
    out.nugget_gradient = std::numbers::ln10 * nugget * g.trace();
    const Eigen::MatrixXd gm = g.cwiseProduct(r);
    const Eigen::VectorXd row_sum = gm.rowwise().sum();
    const Eigen::MatrixXd gz = gm * z;
    out.gradient.resize(omega.size());
    for (Eigen::Index d = 0; d < omega.size(); ++d) {
        // sum_ij gm_ij (z_id - z_jd)^2 = 2 sum_i z_id^2 rowsum_i - 2 z_d^T gm z_d
        const double quad = 2.0 * (z.col(d).array().square() * row_sum.array()).sum() - 2.0 * z.col(d).dot(gz.col(d));
        out.gradient(d) = -std::numbers::ln10 * std::pow(10.0, omega(d)) * quad;
    }
    return out;
}

std::vector<int> dedupe_rows(const Eigen::MatrixXd& z, double tol) {
    std::vector<int> keep;
    const double tol2 = tol * tol;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        bool dup = false;
        for (int j : keep) {
            if ((z.row(i) - z.row(j)).squaredNorm() <= tol2) {
                dup = true;
                break;
            }
        }
        if (!dup) keep.push_back(static_cast<int>(i));
    }
    return keep;
}

GpModel assemble_model(const Eigen::MatrixXd& z, const Eigen::MatrixXd& p, const Eigen::VectorXd& omega,
                       const GpConfig& config, std::optional<double> start) {
    if (z.rows() != p.rows()) throw DimensionMismatch("GP inputs and outputs differ in row count");
    if (omega.size() != z.cols()) throw DimensionMismatch("roughness vector does not match input dimension");
    GpModel model;
    model.omega = omega;
    const Eigen::MatrixXd r = correlation_matrix(z, z, omega);
    double nugget = start.value_or(config.nugget_start);
    const double top = std::max(config.nugget_max, nugget);
    Factor f;
    while (true) {
        f = factor_correlation(r, nugget);
        if (f.ok) break;
        nugget *= 10.0;
        if (nugget > top * (1 + 1e-12)) {
            throw IllConditioned("correlation matrix not positive definite with nugget up to " + std::to_string(top));
        }
    }
    const Eigen::Index n = z.rows();
    model.train_z = z;
    model.train_p = p;
    model.nugget = nugget;
    model.chol = std::move(f.llt);
    model.r_inv_one = model.chol.solve(Eigen::VectorXd::Ones(n));
    model.one_r_inv_one = model.r_inv_one.sum();
    model.beta = (model.r_inv_one.transpose() * p) / model.one_r_inv_one;
    const Eigen::MatrixXd e = p.rowwise() - model.beta;
    model.alpha = model.chol.solve(e);
    model.sigma = (e.transpose() * model.alpha) / static_cast<double>(n);
    model.sigma = (0.5 * (model.sigma + model.sigma.transpose())).eval();
    model.nll = profiled_nll(z, p, omega, nugget, false).value;
    return model;
}

GpModel fit(const Eigen::MatrixXd& z, const Eigen::MatrixXd& p, const std::optional<Eigen::VectorXd>& warm_start,
            const GpConfig& config, Engine& rng, std::optional<double> warm_nugget) {
    if (z.rows() != p.rows()) throw DimensionMismatch("GP inputs and outputs differ in row count");
    const std::vector<int> keep = dedupe_rows(z, config.dedupe_tol);
    const auto n = static_cast<Eigen::Index>(keep.size());
    const Eigen::Index dim = z.cols();
    if (n < dim + 2) {
        throw TooFewPoints("GP fit needs at least " + std::to_string(dim + 2) + " distinct points, got " +
                           std::to_string(n));
    }
    Eigen::MatrixXd zu(n, dim);
    Eigen::MatrixXd pu(n, p.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        zu.row(i) = z.row(keep[static_cast<std::size_t>(i)]);
        pu.row(i) = p.row(keep[static_cast<std::size_t>(i)]);
    }

    // x = omega, followed by log10(nugget) when the nugget is estimated
    const bool est = config.estimate_nugget;
    const Eigen::Index width = dim + (est ? 1 : 0);
    Eigen::VectorXd lower = Eigen::VectorXd::Constant(width, config.omega_lower);
    Eigen::VectorXd upper = Eigen::VectorXd::Constant(width, config.omega_upper);
    if (est) {
        lower(dim) = config.nugget_log10_lower;
        upper(dim) = config.nugget_log10_upper;
    }
    std::vector<Eigen::VectorXd> starts;
    if (warm_start) {
        if (warm_start->size() != dim) throw DimensionMismatch("warm start has the wrong dimension");
        Eigen::VectorXd x(width);
        x.head(dim) = *warm_start;
        if (est) x(dim) = warm_nugget && *warm_nugget > 0 ? std::log10(*warm_nugget) : 0.5 * (lower(dim) + upper(dim));
        starts.push_back(x.cwiseMax(lower).cwiseMin(upper));
    }
    const int restarts = warm_start && !config.warm_restarts ? 0 : config.restarts;
    for (int s = 0; s < restarts; ++s) {
        Eigen::VectorXd x(width);
        for (Eigen::Index d = 0; d < width; ++d) x(d) = std::uniform_real_distribution<double>(lower(d), upper(d))(rng);
        starts.push_back(x);
    }
    if (starts.empty()) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(width);
        if (est) x(dim) = 0.5 * (lower(dim) + upper(dim));
        starts.push_back(x);
    }

    const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        grad.setZero(width);
        const Eigen::VectorXd omega = x.head(dim);
        if (est) {
            const NllValue v = profiled_nll(zu, pu, omega, std::pow(10.0, x(dim)), true);
            if (!v.ok) return std::numeric_limits<double>::infinity();
            grad.head(dim) = v.gradient;
            grad(dim) = v.nugget_gradient;
            return v.value;
        }
        for (double nugget = config.nugget_start; nugget <= config.nugget_max * (1 + 1e-12); nugget *= 10.0) {
            NllValue v = profiled_nll(zu, pu, omega, nugget, true);
            if (v.ok) {
                grad = v.gradient;
                return v.value;
            }
        }
        return std::numeric_limits<double>::infinity();
    };

    BoxOptions opts;
    opts.max_iter = config.max_iter;
    BoxResult best;
    best.f = std::numeric_limits<double>::infinity();
    double margin = 0;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        BoxResult r = minimize_box(objective, starts[s], lower, upper, opts);
        if (r.f < best.f - margin) best = r;
        if (s == 0 && warm_start && std::isfinite(best.f)) margin = config.restart_margin;
    }
    if (!std::isfinite(best.f)) throw IllConditioned("no start point produced a finite likelihood");

    GpModel model = est ? assemble_model(zu, pu, best.x.head(dim), config, std::pow(10.0, best.x(dim)))
                        : assemble_model(zu, pu, best.x, config);
    model.train_rows = keep;
    return model;
}

Eigen::MatrixXd predict_mean(const GpModel& model, const Eigen::MatrixXd& query) {
    const Eigen::MatrixXd rq = query_correlation(model, query);
    Eigen::MatrixXd mean = rq * model.alpha;
    mean.rowwise() += model.beta;
    return mean;
}

std::vector<Prediction> predict(const GpModel& model, const Eigen::MatrixXd& query) {
    const Eigen::MatrixXd rq = query_correlation(model, query);
    Eigen::MatrixXd mean = rq * model.alpha;
    mean.rowwise() += model.beta;
    // v = L^-1 r for every query column.
    const Eigen::MatrixXd v = model.chol.matrixL().solve(rq.transpose());
    const Eigen::VectorXd r_r_inv_r = v.colwise().squaredNorm().transpose();
    const Eigen::VectorXd one_r_inv_r = rq * model.r_inv_one;

    std::vector<Prediction> out(static_cast<std::size_t>(query.rows()));
    for (Eigen::Index q = 0; q < query.rows(); ++q) {
        const double w = 1.0 - one_r_inv_r(q);
        const double scale = std::max(0.0, 1.0 - r_r_inv_r(q) + w * w / model.one_r_inv_one);
        auto& pr = out[static_cast<std::size_t>(q)];
        pr.mean = mean.row(q);
        pr.cov = model.sigma * scale;
    }
    return out;
}

double roughness_residual(const Eigen::VectorXd& omega_new, const Eigen::VectorXd& omega_old) {
    if (omega_new.size() != omega_old.size() || omega_new.size() == 0) {
        throw DimensionMismatch("roughness vectors differ in dimension");
    }
    return std::sqrt((omega_new - omega_old).squaredNorm() / static_cast<double>(omega_new.size()));
}

}  // namespace dpacq
