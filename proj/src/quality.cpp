#include "dpacq/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dpacq/error.hpp"
#include "dpacq/log.hpp"

namespace dpacq {

void QualitySpec::validate() const {
    if (!(delta > 0)) throw ConfigError("quality delta must be positive");
    if (!(activation_slope > 0)) throw ConfigError("activation slope must be positive");
}

QualityKind parse_quality_kind(const std::string& s) {
    if (s == "none") return QualityKind::none;
    if (s == "stiffness_to_mass") return QualityKind::stiffness_to_mass;
    if (s == "anisotropy") return QualityKind::anisotropy;
    throw ConfigError("unknown quality kind '" + s + "' (none, stiffness_to_mass, anisotropy)");
}

std::string to_string(QualityKind kind) {
    switch (kind) {
        case QualityKind::none: return "none";
        case QualityKind::stiffness_to_mass: return "stiffness_to_mass";
        case QualityKind::anisotropy: return "anisotropy";
    }
    return "none";
}

ActivationDirection parse_direction(const std::string& s) {
    if (s == "increasing") return ActivationDirection::increasing;
    if (s == "decreasing") return ActivationDirection::decreasing;
    throw ConfigError("unknown activation direction '" + s + "' (increasing, decreasing)");
}

std::string to_string(ActivationDirection d) {
    return d == ActivationDirection::increasing ? "increasing" : "decreasing";
}

double q_stiffness_to_mass(double c11, double vf, double delta) {
    return c11 / (vf + delta);
}

double q_anisotropy(double c11, double c22, bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (c11 == 0 && c22 == 0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    const double quarter = std::numbers::pi / 4;
    if (c11 >= 0 && c22 >= 0) {
        // folded onto [0, pi/4] so swapping C11 and C22 is exact
        return (quarter - std::atan2(std::min(c11, c22), std::max(c11, c22))) / quarter;
    }
    return std::abs(std::atan2(c22, c11) - quarter) / quarter;
}

Eigen::VectorXd quality_index(const QualitySpec& spec, const Eigen::VectorXd& c11, const Eigen::VectorXd& c22,
                              const Eigen::VectorXd& vf) {
    const Eigen::Index n = c11.size();
    if (c22.size() != n || vf.size() != n) throw DimensionMismatch("quality inputs differ in length");
    Eigen::VectorXd q = Eigen::VectorXd::Ones(n);
    int degenerate = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = std::max(c11(i), 0.0);
        const double b = std::max(c22(i), 0.0);
        switch (spec.kind) {
            case QualityKind::none: break;
            case QualityKind::stiffness_to_mass: q(i) = q_stiffness_to_mass(a, vf(i), spec.delta); break;
            case QualityKind::anisotropy: {
                bool flag = false;
                q(i) = q_anisotropy(a, b, &flag);
                degenerate += flag;
                break;
            }
        }
    }
    if (degenerate > 0) log::warn(std::to_string(degenerate) + " items have zero C11 and C22; anisotropy set to 0");
    return q;
}

Eigen::VectorXd activate(const Eigen::VectorXd& values, const QualitySpec& spec, std::optional<Standardization> stats) {
    const double sign = spec.direction == ActivationDirection::increasing ? 1.0 : -1.0;
    const double slope = spec.activation_slope;
    auto sigmoid = [&](double x) { return 1.0 / (1.0 + std::exp(-sign * slope * x)); };

    Eigen::VectorXd out(values.size());
    switch (spec.kind) {
        case QualityKind::none:
            out.setOnes();
            break;
        case QualityKind::anisotropy:
            for (Eigen::Index i = 0; i < values.size(); ++i) out(i) = sigmoid(values(i) - 0.5);
            break;
        case QualityKind::stiffness_to_mass: {
            Standardization s;
            if (stats) {
                s = *stats;
            } else if (values.size() > 0) {
                s.mean = values.mean();
                s.std = values.size() > 1
                            ? std::sqrt((values.array() - s.mean).square().sum() / static_cast<double>(values.size() - 1))
                            : 0.0;
            }
            if (!(s.std > 0) || !std::isfinite(s.std)) {
                log::warn("DegenerateStd: quality values have no spread; weights set to 0.5");
                out.setConstant(0.5);
                break;
            }
            for (Eigen::Index i = 0; i < values.size(); ++i) out(i) = sigmoid((values(i) - s.mean) / s.std);
            break;
        }
    }
    return out;
}

}  // namespace dpacq
