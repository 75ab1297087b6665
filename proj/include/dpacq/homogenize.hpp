#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dpacq/corpus.hpp"

namespace dpacq {

struct MaterialSpec {
    double E_solid = 1.0;
    double void_ratio = 1e-9;  // ersatz void modulus as a fraction of E_solid
    double nu = 0.3;

    double E_void() const { return void_ratio * E_solid; }
    void validate() const;
};

/// Effective plane-stress stiffness in Voigt order (11, 22, 12) with engineering shear.
struct PropertyVector {
    double C11 = 0, C12 = 0, C22 = 0, C33 = 0;
    Eigen::Matrix3d full = Eigen::Matrix3d::Zero();

    friend bool operator==(const PropertyVector& a, const PropertyVector& b) { return a.full == b.full; }
};

// Constitutive matrix of a homogeneous plane-stress material.
Eigen::Matrix3d plane_stress_matrix(double E, double nu);

// Periodic energy-based homogenization: one bilinear quad per pixel, three unit test
// strains, effective tensor from mutual strain energies.
PropertyVector homogenize(const BinaryShape& shape, const MaterialSpec& mat);

// Order-preserving; `threads` > 1 evaluates shapes concurrently with identical results.
std::vector<PropertyVector> homogenize_batch(std::span<const BinaryShape> shapes, const MaterialSpec& mat,
                                             int threads = 1);

// Property CSV: "id,C11,C12,C22,C33".
void write_properties(const std::filesystem::path& path, std::span<const int> ids,
                      std::span<const PropertyVector> props);
struct PropertyTable {
    std::vector<int> ids;
    std::vector<PropertyVector> props;
};
PropertyTable read_properties(const std::filesystem::path& path);

}  // namespace dpacq
