#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dpacq {

/// Binary unit-cell raster, row-major, 1 = solid.
struct BinaryShape {
    int id = 0;
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> cells;

    BinaryShape() = default;
    BinaryShape(int id_, int rows_, int cols_);

    std::uint8_t at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t solid_count() const;
    bool all_solid() const { return solid_count() == cells.size(); }
    bool all_void() const { return solid_count() == 0; }

    friend bool operator==(const BinaryShape&, const BinaryShape&) = default;
};

/// Signed distance field in pixel units: negative inside solid, positive in void.
struct SdfShape {
    int id = 0;
    int rows = 0;
    int cols = 0;
    std::vector<double> field;
    // All-solid or all-void input; the field is then the constant -/+rows.
    bool degenerate = false;
};

struct ShapeLibrary {
    std::vector<BinaryShape> shapes;
    std::vector<SdfShape> sdfs;
    std::vector<double> vf;

    std::size_t size() const { return shapes.size(); }
    int rows() const { return shapes.empty() ? 0 : shapes.front().rows; }
    int cols() const { return shapes.empty() ? 0 : shapes.front().cols; }
    // Library indices of shapes that are not degenerate.
    std::vector<int> eligible() const;
};

struct LatticeParams {
    // Thickness of the horizontal, vertical, main-diagonal and anti-diagonal bar groups.
    std::array<double, 4> t{};
};

// Discrete SDF: the interface sits halfway between neighbouring opposite-phase
// cell centres, so |phi(c)| = (distance to nearest opposite-phase centre) - 1/2.
SdfShape sdf_from_binary(const BinaryShape& shape);

double volume_fraction(const BinaryShape& shape);

BinaryShape generate_lattice(const LatticeParams& params, int resolution);

// Builds SDFs and volume fractions; shape ids are reassigned to their index.
ShapeLibrary make_library(std::vector<BinaryShape> shapes);

struct SyntheticCorpus {
    ShapeLibrary library;
    std::vector<LatticeParams> params;
};

SyntheticCorpus generate_corpus(int n, std::uint64_t seed, int resolution = 50);

// Shape pack: "SHPB", u32 count, u32 rows, u32 cols, then count*rows*cols bytes.
void write_pack(const std::filesystem::path& path, std::span<const BinaryShape> shapes);
std::vector<BinaryShape> read_pack(const std::filesystem::path& path);

// Binary (P5) PGM images in filename order, thresholded at 128.
std::vector<BinaryShape> read_pgm_dir(const std::filesystem::path& dir);

}  // namespace dpacq
