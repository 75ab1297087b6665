#include "dpacq/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace dpacq {
namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

// Zero the gradient components that push against an active bound.
Eigen::VectorXd free_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi) {
    Eigen::VectorXd out = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if ((x(i) <= lo(i) && g(i) > 0) || (x(i) >= hi(i) && g(i) < 0)) out(i) = 0;
    }
    return out;
}

}  // namespace

BoxResult minimize_box(const Objective& objective, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper, const BoxOptions& opts) {
    BoxResult res;
    Eigen::VectorXd x = project(x0, lower, upper);
    Eigen::VectorXd g(x.size());
    double f = objective(x, g);
    ++res.evaluations;
    if (!std::isfinite(f)) {
        res.x = x;
        res.f = std::numeric_limits<double>::infinity();
        return res;
    }

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    Eigen::VectorXd g_new(x.size());

    for (int it = 0; it < opts.max_iter; ++it) {
        res.iterations = it + 1;
        const Eigen::VectorXd gf = free_gradient(x, g, lower, upper);
        if (gf.lpNorm<Eigen::Infinity>() < opts.gtol) break;

        // Two-loop recursion on the free components.
        Eigen::VectorXd q = gf;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd d = -q;
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            if (gf(i) == 0 && g(i) != 0) d(i) = 0;
        }
        if (d.dot(gf) >= 0) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            d = -gf;
        }
        // First step from steepest descent is scaled to a unit move.
        double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-300)) : 1.0;

        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = f;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = project(x + step * d, lower, upper);
            f_new = objective(x_new, g_new);
            ++res.evaluations;
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        const double f_old = f;
        x = x_new;
        f = f_new;
        g = g_new;
        if (sy > 1e-12 * std::max(1.0, s.squaredNorm())) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        if (std::abs(f_old - f) <= opts.ftol * std::max({1.0, std::abs(f), std::abs(f_old)})) break;
    }
    res.x = x;
    res.f = f;
    return res;
}

}  // namespace dpacq
