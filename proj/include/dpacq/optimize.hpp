#pragma once

#include <functional>

#include <Eigen/Dense>

namespace dpacq {

// Objective returning f(x) and writing its gradient. Non-finite f marks an infeasible point.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct BoxOptions {
    int max_iter = 200;
    int history = 8;
    double gtol = 1e-6;   // projected-gradient infinity norm
    double ftol = 1e-10;  // relative objective decrease
};

struct BoxResult {
    Eigen::VectorXd x;
    double f = 0;
    int iterations = 0;
    int evaluations = 0;
};

// Projected L-BFGS with Armijo backtracking along the projection arc.
BoxResult minimize_box(const Objective& objective, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper, const BoxOptions& opts = {});

}  // namespace dpacq
