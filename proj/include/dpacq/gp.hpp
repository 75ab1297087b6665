#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dpacq/rng.hpp"

namespace dpacq {

struct GpConfig {
    double omega_lower = -3.0;  // log10 roughness bounds
    double omega_upper = 3.0;
    int restarts = 8;           // seeded random starts, in addition to the warm start
    bool warm_restarts = true;  // false: random starts only when there is no warm start
    int max_iter = 200;         // per start
    // Maximum-likelihood nugget, searched in log10 over [nugget_log10_lower, nugget_log10_upper].
    // When false the nugget is the smallest rung of the jitter ladder that factors.
    bool estimate_nugget = true;
    double nugget_log10_lower = -10.0;
    double nugget_log10_upper = -1.0;
    double nugget_start = 1e-10;
    double nugget_max = 1e-4;
    double dedupe_tol = 1e-10;
    // A random restart displaces the warm-start optimum only when its NLL is lower by more than this.
    double restart_margin = 1.0;
};

/// Multiresponse kriging model with separable covariance Sigma (x) r(z, z').
struct GpModel {
    Eigen::VectorXd omega;      // log10 roughness, one per input dimension
    Eigen::RowVectorXd beta;    // constant prior mean, one per response
    Eigen::MatrixXd sigma;      // m x m prior covariance
    Eigen::MatrixXd train_z;    // deduplicated training inputs
    Eigen::MatrixXd train_p;
    std::vector<int> train_rows;  // rows of the caller's training set kept after deduplication
    double nugget = 0;
    double nll = 0;

    // Factorization state derived from the above.
    Eigen::LLT<Eigen::MatrixXd> chol;
    Eigen::MatrixXd alpha;       // R^-1 (P - 1 beta)
    Eigen::VectorXd r_inv_one;   // R^-1 1
    double one_r_inv_one = 0;

    int inputs() const { return static_cast<int>(omega.size()); }
    int responses() const { return static_cast<int>(beta.size()); }
};

struct Prediction {
    Eigen::RowVectorXd mean;
    Eigen::MatrixXd cov;
};

struct NllValue {
    double value = 0;
    Eigen::VectorXd gradient;  // d value / d omega
    double nugget_gradient = 0;  // d value / d log10(nugget)
    bool ok = false;
};

// Squared-exponential correlation exp(-sum_d 10^omega_d (a_d - b_d)^2).
double correlation(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                   const Eigen::VectorXd& omega);

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                   const Eigen::VectorXd& omega);

// Negative log-likelihood with beta and Sigma profiled out by generalized least squares,
// at a fixed nugget. ok == false when R + nugget I is not numerically positive definite.
NllValue profiled_nll(const Eigen::MatrixXd& z, const Eigen::MatrixXd& p, const Eigen::VectorXd& omega,
                      double nugget, bool with_gradient = true);

// Rows kept after dropping points within `tol` of an earlier row.
std::vector<int> dedupe_rows(const Eigen::MatrixXd& z, double tol);

// Closed-form beta/Sigma and factorization at fixed omega, climbing the nugget ladder
// from `nugget` (default: the ladder start).
GpModel assemble_model(const Eigen::MatrixXd& z, const Eigen::MatrixXd& p, const Eigen::VectorXd& omega,
                       const GpConfig& config, std::optional<double> nugget = std::nullopt);

// Maximum-likelihood fit over omega (and the nugget when estimated). The warm start, when given,
// is the first start point.
GpModel fit(const Eigen::MatrixXd& z, const Eigen::MatrixXd& p, const std::optional<Eigen::VectorXd>& warm_start,
            const GpConfig& config, Engine& rng, std::optional<double> warm_nugget = std::nullopt);

std::vector<Prediction> predict(const GpModel& model, const Eigen::MatrixXd& query);
Eigen::MatrixXd predict_mean(const GpModel& model, const Eigen::MatrixXd& query);

// sqrt(mean((a - b)^2)): the iteration-to-iteration roughness change.
double roughness_residual(const Eigen::VectorXd& omega_new, const Eigen::VectorXd& omega_old);

}  // namespace dpacq
