#include "dpacq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "dpacq/error.hpp"
#include "dpacq/rng.hpp"

namespace dpacq {
namespace {

// Felzenszwalb-Huttenlocher 1-D squared distance transform over `f` in place.
void squared_dt_1d(std::vector<double>& f, std::vector<double>& out, std::vector<int>& v,
                   std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    int first = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] < inf) {
            first = q;
            break;
        }
    }
    if (first < 0) {
        std::fill(out.begin(), out.end(), inf);
        return;
    }
    v[0] = first;
    for (int q = first + 1; q < n; ++q) {
        if (!(f[q] < inf)) continue;
        auto intersect = [&](int p) {
            return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
        };
        double s = intersect(v[k]);
        while (s <= z[k]) {
            --k;
            s = intersect(v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double d = q - v[k];
        out[q] = d * d + f[v[k]];
    }
}

// Squared Euclidean distance from every cell centre to the nearest cell with mask == target.
std::vector<double> squared_distance_to(const BinaryShape& s, std::uint8_t target) {
    const int rows = s.rows;
    const int cols = s.cols;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(static_cast<std::size_t>(rows) * cols);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = s.cells[i] == target ? 0.0 : inf;

    const int len = std::max(rows, cols);
    std::vector<double> f, out;
    std::vector<int> v(len + 1);
    std::vector<double> z(len + 2);

    f.resize(rows);
    out.resize(rows);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) f[r] = grid[static_cast<std::size_t>(r) * cols + c];
        squared_dt_1d(f, out, v, z);
        for (int r = 0; r < rows; ++r) grid[static_cast<std::size_t>(r) * cols + c] = out[r];
    }
    f.resize(cols);
    out.resize(cols);
    for (int r = 0; r < rows; ++r) {
        std::copy_n(grid.begin() + static_cast<std::ptrdiff_t>(r) * cols, cols, f.begin());
        squared_dt_1d(f, out, v, z);
        std::copy_n(out.begin(), cols, grid.begin() + static_cast<std::ptrdiff_t>(r) * cols);
    }
    return grid;
}

double band_distance(double x, double y, double res, bool anti) {
    // Perpendicular distance to the periodic family of lines y = x + j*res (or y = -x + j*res).
    const double u = anti ? (x + y) : (y - x);
    const double wrapped = u - res * std::round(u / res);
    return std::abs(wrapped) / std::numbers::sqrt2;
}

void write_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated shape pack header");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

BinaryShape::BinaryShape(int id_, int rows_, int cols_)
    : id(id_), rows(rows_), cols(cols_), cells(static_cast<std::size_t>(rows_) * cols_, 0) {}

std::size_t BinaryShape::solid_count() const {
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

std::vector<int> ShapeLibrary::eligible() const {
    std::vector<int> out;
    out.reserve(sdfs.size());
    for (std::size_t i = 0; i < sdfs.size(); ++i) {
        if (!sdfs[i].degenerate) out.push_back(static_cast<int>(i));
    }
    return out;
}

SdfShape sdf_from_binary(const BinaryShape& shape) {
    if (shape.rows < 2 || shape.cols < 2) throw DimensionMismatch("shape raster must be at least 2x2");
    SdfShape out;
    out.id = shape.id;
    out.rows = shape.rows;
    out.cols = shape.cols;
    const std::size_t count = shape.cells.size();
    const std::size_t solid = shape.solid_count();
    if (solid == 0 || solid == count) {
        out.degenerate = true;
        const double mag = shape.rows;
        out.field.assign(count, solid == 0 ? mag : -mag);
        return out;
    }
    const auto to_void = squared_distance_to(shape, 0);
    const auto to_solid = squared_distance_to(shape, 1);
    out.field.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.field[i] = shape.cells[i] ? -(std::sqrt(to_void[i]) - 0.5) : (std::sqrt(to_solid[i]) - 0.5);
    }
    return out;
}

double volume_fraction(const BinaryShape& shape) {
    if (shape.cells.empty()) return 0.0;
    return static_cast<double>(shape.solid_count()) / static_cast<double>(shape.cells.size());
}

BinaryShape generate_lattice(const LatticeParams& params, int resolution) {
    if (resolution < 10) throw UsageError("lattice resolution must be at least 10");
    BinaryShape s(0, resolution, resolution);
    std::array<int, 4> thick{};
    for (int g = 0; g < 4; ++g) {
        const double t = std::clamp(params.t[g], 0.0, 1.0);
        thick[g] = static_cast<int>(std::lround(t * resolution / 2.0));
    }
    const double res = resolution;
    // Horizontal and vertical centre bars: `thick` full rows/columns centred in the cell.
    const int h0 = (resolution - thick[0]) / 2;
    const int v0 = (resolution - thick[1]) / 2;
    for (int r = 0; r < resolution; ++r) {
        for (int c = 0; c < resolution; ++c) {
            bool solid = false;
            if (thick[0] > 0 && r >= h0 && r < h0 + thick[0]) solid = true;
            if (thick[1] > 0 && c >= v0 && c < v0 + thick[1]) solid = true;
            const double x = c + 0.5;
            const double y = r + 0.5;
            if (!solid && thick[2] > 0 && band_distance(x, y, res, false) <= thick[2] / 2.0) solid = true;
            if (!solid && thick[3] > 0 && band_distance(x, y, res, true) <= thick[3] / 2.0) solid = true;
            s.at(r, c) = solid ? 1 : 0;
        }
    }
    return s;
}

ShapeLibrary make_library(std::vector<BinaryShape> shapes) {
    ShapeLibrary lib;
    lib.sdfs.reserve(shapes.size());
    lib.vf.reserve(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        auto& s = shapes[i];
        if (i > 0 && (s.rows != shapes.front().rows || s.cols != shapes.front().cols)) {
            throw DimensionMismatch("all shapes in a library must share one raster size");
        }
        s.id = static_cast<int>(i);
        lib.sdfs.push_back(sdf_from_binary(s));
        lib.vf.push_back(volume_fraction(s));
    }
    lib.shapes = std::move(shapes);
    return lib;
}

SyntheticCorpus generate_corpus(int n, std::uint64_t seed, int resolution) {
    if (n < 1) throw UsageError("corpus size must be at least 1");
    Engine rng = make_stream(seed, "corpus");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<BinaryShape> shapes;
    std::vector<LatticeParams> params;
    shapes.reserve(n);
    params.reserve(n);
    while (static_cast<int>(shapes.size()) < n) {
        LatticeParams p;
        for (auto& t : p.t) t = unit(rng);
        BinaryShape s = generate_lattice(p, resolution);
        if (s.all_solid() || s.all_void()) continue;
        shapes.push_back(std::move(s));
        params.push_back(p);
    }
    return {make_library(std::move(shapes)), std::move(params)};
}

void write_pack(const std::filesystem::path& path, std::span<const BinaryShape> shapes) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    const std::uint32_t rows = shapes.empty() ? 0 : shapes.front().rows;
    const std::uint32_t cols = shapes.empty() ? 0 : shapes.front().cols;
    os.write("SHPB", 4);
    write_u32(os, static_cast<std::uint32_t>(shapes.size()));
    write_u32(os, rows);
    write_u32(os, cols);
    for (const auto& s : shapes) {
        if (static_cast<std::uint32_t>(s.rows) != rows || static_cast<std::uint32_t>(s.cols) != cols) {
            throw DimensionMismatch("shape pack entries must share one raster size");
        }
        os.write(reinterpret_cast<const char*>(s.cells.data()), static_cast<std::streamsize>(s.cells.size()));
    }
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<BinaryShape> read_pack(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open shape pack '" + path.string() + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "SHPB") throw FormatError("not a SHPB shape pack");
    const std::uint32_t count = read_u32(is);
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    if (count > 0 && (rows < 2 || cols < 2)) throw FormatError("shape pack raster smaller than 2x2");
    std::vector<BinaryShape> shapes;
    shapes.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        BinaryShape s(static_cast<int>(i), static_cast<int>(rows), static_cast<int>(cols));
        if (!is.read(reinterpret_cast<char*>(s.cells.data()), static_cast<std::streamsize>(s.cells.size()))) {
            throw FormatError("truncated shape pack at entry " + std::to_string(i));
        }
        for (auto c : s.cells) {
            if (c > 1) throw FormatError("shape pack entry " + std::to_string(i) + " has a non-binary cell");
        }
        shapes.push_back(std::move(s));
    }
    return shapes;
}

std::vector<BinaryShape> read_pgm_dir(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<BinaryShape> shapes;
    for (const auto& file : files) {
        std::ifstream is(file, std::ios::binary);
        if (!is) throw IoError("cannot open '" + file.string() + "'");
        auto token = [&is, &file]() {
            std::string tok;
            while (is >> tok) {
                if (tok[0] == '#') {
                    std::string rest;
                    std::getline(is, rest);
                    continue;
                }
                return tok;
            }
            throw FormatError("truncated PGM header in '" + file.string() + "'");
        };
        if (token() != "P5") throw FormatError("'" + file.string() + "' is not a binary (P5) PGM");
        const int width = std::stoi(token());
        const int height = std::stoi(token());
        const int maxval = std::stoi(token());
        if (maxval <= 0 || maxval > 255) throw FormatError("unsupported PGM maxval in '" + file.string() + "'");
        is.get();
        BinaryShape s(static_cast<int>(shapes.size()), height, width);
        std::vector<unsigned char> raw(s.cells.size());
        if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
            throw FormatError("truncated PGM data in '" + file.string() + "'");
        }
        for (std::size_t i = 0; i < raw.size(); ++i) s.cells[i] = raw[i] >= 128 ? 1 : 0;
        shapes.push_back(std::move(s));
    }
    return shapes;
}

}  // namespace dpacq
