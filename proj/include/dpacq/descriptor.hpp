#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "dpacq/corpus.hpp"

namespace dpacq {

enum class LatentSource { pca, imported };

/// One standardized descriptor row per shape.
struct LatentMatrix {
    Eigen::MatrixXd z;
    LatentSource source = LatentSource::pca;

    Eigen::Index rows() const { return z.rows(); }
    int dim() const { return static_cast<int>(z.cols()); }
};

/// Linear shape descriptor fitted on flattened SDFs.
struct PcaBasis {
    int rows = 0;
    int cols = 0;
    Eigen::VectorXd mean;                // rows*cols
    Eigen::MatrixXd components;          // dim x (rows*cols), orthonormal rows
    Eigen::VectorXd scales;              // per-component std on the fitting set
    Eigen::VectorXd explained_variance;  // non-increasing
    int requested_dim = 0;

    int dim() const { return static_cast<int>(components.rows()); }
    bool rank_deficient() const { return dim() < requested_dim; }
};

// Top principal directions of the library SDFs. When fewer than `dim` directions carry
// variance the basis is truncated with a warning; zero variance throws RankDeficient.
// `seed` is accepted for interface stability; the eigen solver used is deterministic.
PcaBasis fit_pca(const ShapeLibrary& library, int dim, std::uint64_t seed = 0);
PcaBasis fit_pca(const ShapeLibrary& library, std::span<const int> subset, int dim, std::uint64_t seed = 0);

LatentMatrix transform(const PcaBasis& basis, const ShapeLibrary& library);
Eigen::VectorXd transform_field(const PcaBasis& basis, std::span<const double> field);
Eigen::VectorXd reconstruct(const PcaBasis& basis, const Eigen::VectorXd& latent);

// Latent CSV: header "id,z0,...,z{D-1}", leading '#' comment lines allowed.
LatentMatrix import_latents(const std::filesystem::path& path, Eigen::Index expected_n);
void write_latents(const std::filesystem::path& path, const LatentMatrix& latents,
                   const std::optional<std::string>& comment = std::nullopt);

}  // namespace dpacq
