#pragma once

#include <optional>
#include <string>

#include <Eigen/Dense>

namespace dpacq {

enum class QualityKind { none, stiffness_to_mass, anisotropy };
enum class ActivationDirection { increasing, decreasing };

struct QualitySpec {
    QualityKind kind = QualityKind::none;
    double delta = 1e-3;
    double activation_slope = 20.0;
    ActivationDirection direction = ActivationDirection::increasing;

    void validate() const;
};

struct Standardization {
    double mean = 0;
    double std = 1;
};

QualityKind parse_quality_kind(const std::string& s);
std::string to_string(QualityKind kind);
ActivationDirection parse_direction(const std::string& s);
std::string to_string(ActivationDirection d);

double q_stiffness_to_mass(double c11, double vf, double delta);

// 0 for isotropic, 1 for fully one-directional stiffness. Both zero returns 0
// and sets *degenerate when given.
double q_anisotropy(double c11, double c22, bool* degenerate = nullptr);

// Raw task index per item; negative stiffness predictions are clamped to zero.
// Returns ones for QualityKind::none.
Eigen::VectorXd quality_index(const QualitySpec& spec, const Eigen::VectorXd& c11, const Eigen::VectorXd& c22,
                              const Eigen::VectorXd& vf);

// Maps raw indices into [0,1] weights. The stiffness-to-mass path standardizes
// with `stats` (or the values' own mean/std); the anisotropy path is centred at 0.5.
Eigen::VectorXd activate(const Eigen::VectorXd& values, const QualitySpec& spec,
                         std::optional<Standardization> stats = std::nullopt);

}  // namespace dpacq
