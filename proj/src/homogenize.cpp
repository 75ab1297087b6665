#include "dpacq/homogenize.hpp"

#include <array>
#include <exception>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "dpacq/csv.hpp"
#include "dpacq/error.hpp"

namespace dpacq {
namespace {

using Matrix8d = Eigen::Matrix<double, 8, 8>;
using Vector8d = Eigen::Matrix<double, 8, 1>;

// Local node order: (0,0), (1,0), (1,1), (0,1) on the unit square.
constexpr std::array<double, 4> kNodeX{0, 1, 1, 0};
constexpr std::array<double, 4> kNodeY{0, 0, 1, 1};

Matrix8d unit_element_stiffness(double nu) {
    const Eigen::Matrix3d D = plane_stress_matrix(1.0, nu);
    const double g = 1.0 / std::sqrt(3.0);
    Matrix8d k = Matrix8d::Zero();
    for (double xi : {-g, g}) {
        for (double eta : {-g, g}) {
            Eigen::Matrix<double, 3, 8> B = Eigen::Matrix<double, 3, 8>::Zero();
            for (int a = 0; a < 4; ++a) {
                const double xa = 2 * kNodeX[a] - 1;
                const double ya = 2 * kNodeY[a] - 1;
                // d/dx = 2 d/dxi on the unit square
                const double dx = 2 * 0.25 * xa * (1 + eta * ya);
                const double dy = 2 * 0.25 * ya * (1 + xi * xa);
                B(0, 2 * a) = dx;
                B(1, 2 * a + 1) = dy;
                B(2, 2 * a) = dy;
                B(2, 2 * a + 1) = dx;
            }
            k += B.transpose() * D * B * 0.25;  // det J = 1/4, unit weights
        }
    }
    return 0.5 * (k + k.transpose());
}

// Nodal displacements of the uniform macroscopic strain fields on one element.
std::array<Vector8d, 3> unit_strain_fields() {
    std::array<Vector8d, 3> u{};
    for (auto& v : u) v.setZero();
    for (int a = 0; a < 4; ++a) {
        u[0](2 * a) = kNodeX[a];
        u[1](2 * a + 1) = kNodeY[a];
        u[2](2 * a) = 0.5 * kNodeY[a];
        u[2](2 * a + 1) = 0.5 * kNodeX[a];
    }
    return u;
}

}  // namespace

void MaterialSpec::validate() const {
    if (!(E_solid > 0)) throw ConfigError("E_solid must be positive");
    if (!(void_ratio > 0 && void_ratio < 1)) throw ConfigError("void modulus ratio must lie in (0, 1)");
    if (!(nu > -1 && nu < 0.5)) throw ConfigError("Poisson ratio must lie in (-1, 0.5)");
}

Eigen::Matrix3d plane_stress_matrix(double E, double nu) {
    Eigen::Matrix3d D;
    const double f = E / (1 - nu * nu);
    D << f, f * nu, 0, f * nu, f, 0, 0, 0, f * (1 - nu) / 2;
    return D;
}

PropertyVector homogenize(const BinaryShape& shape, const MaterialSpec& mat) {
    mat.validate();
    const int H = shape.rows;
    const int W = shape.cols;
    if (H < 2 || W < 2) throw DimensionMismatch("homogenization needs at least a 2x2 raster");

    const Matrix8d k0 = unit_element_stiffness(mat.nu);
    const auto u0 = unit_strain_fields();
    std::array<Vector8d, 3> f0;
    for (int c = 0; c < 3; ++c) f0[c] = k0 * u0[c];

    // Periodic node numbering; node 0 is pinned to remove rigid translation.
    const int nodes = H * W;
    const int free_dofs = 2 * nodes - 2;
    auto element_dofs = [&](int r, int c) {
        const std::array<int, 4> gi{r + 1, r + 1, r, r};
        const std::array<int, 4> gj{c, c + 1, c + 1, c};
        std::array<int, 8> dofs{};
        for (int a = 0; a < 4; ++a) {
            const int node = (gi[a] % H) * W + (gj[a] % W);
            dofs[2 * a] = 2 * node - 2;
            dofs[2 * a + 1] = 2 * node - 1;
        }
        return dofs;
    };
    auto modulus = [&](int r, int c) { return shape.at(r, c) ? mat.E_solid : mat.E_void(); };

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(H) * W * 64);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(free_dofs, 3);
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const double E = modulus(r, c);
            const auto dofs = element_dofs(r, c);
            for (int a = 0; a < 8; ++a) {
                if (dofs[a] < 0) continue;
                for (int b = 0; b < 8; ++b) {
                    if (dofs[b] < 0) continue;
                    triplets.emplace_back(dofs[a], dofs[b], E * k0(a, b));
                }
                for (int cs = 0; cs < 3; ++cs) rhs(dofs[a], cs) -= E * f0[cs](a);
            }
        }
    }
    Eigen::SparseMatrix<double> K(free_dofs, free_dofs);
    K.setFromTriplets(triplets.begin(), triplets.end());

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(K);
    if (solver.info() != Eigen::Success) throw SolverSingular("stiffness factorization failed");
    const Eigen::MatrixXd w = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !w.allFinite()) throw SolverSingular("stiffness solve failed");

    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    std::array<Vector8d, 3> ue;
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const double E = modulus(r, c);
            const auto dofs = element_dofs(r, c);
            for (int cs = 0; cs < 3; ++cs) {
                ue[cs] = u0[cs];
                for (int a = 0; a < 8; ++a) {
                    if (dofs[a] >= 0) ue[cs](a) += w(dofs[a], cs);
                }
            }
            for (int i = 0; i < 3; ++i) {
                const Vector8d ku = k0 * ue[i];
                for (int j = i; j < 3; ++j) C(i, j) += E * ue[j].dot(ku);
            }
        }
    }
    C /= static_cast<double>(H) * W;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < i; ++j) C(i, j) = C(j, i);
    }

    PropertyVector p;
    p.full = C;
    p.C11 = C(0, 0);
    p.C12 = C(0, 1);
    p.C22 = C(1, 1);
    p.C33 = C(2, 2);
    return p;
}

std::vector<PropertyVector> homogenize_batch(std::span<const BinaryShape> shapes, const MaterialSpec& mat,
                                             int threads) {
    std::vector<PropertyVector> out(shapes.size());
    std::vector<std::exception_ptr> errors(shapes.size());
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < shapes.size(); i += stride) {
            try {
                out[i] = homogenize(shapes[i], mat);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto n_threads = static_cast<std::size_t>(std::max(1, threads));
    if (n_threads == 1 || shapes.size() < 2) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t, n_threads);
    }
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const Error& e) {
            throw Error(e.kind(), e.code(), "batch index " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

void write_properties(const std::filesystem::path& path, std::span<const int> ids,
                      std::span<const PropertyVector> props) {
    if (ids.size() != props.size()) throw DimensionMismatch("ids and properties differ in length");
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << "id,C11,C12,C22,C33\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& p = props[i];
        os << ids[i] << ',' << format_double(p.C11) << ',' << format_double(p.C12) << ','
           << format_double(p.C22) << ',' << format_double(p.C33) << '\n';
    }
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

PropertyTable read_properties(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    std::array<int, 5> col{};
    const std::array<const char*, 5> names{"id", "C11", "C12", "C22", "C33"};
    for (std::size_t j = 0; j < names.size(); ++j) {
        col[j] = t.column(names[j]);
        if (col[j] < 0) throw MissingColumn(std::string("property CSV '") + path.string() + "' lacks column '" + names[j] + "'");
    }
    PropertyTable out;
    for (const auto& row : t.rows) {
        if (row.size() != t.header.size()) throw FormatError("ragged row in '" + path.string() + "'");
        PropertyVector p;
        p.C11 = parse_double(row[col[1]]);
        p.C12 = parse_double(row[col[2]]);
        p.C22 = parse_double(row[col[3]]);
        p.C33 = parse_double(row[col[4]]);
        if (!std::isfinite(p.C11) || !std::isfinite(p.C12) || !std::isfinite(p.C22) || !std::isfinite(p.C33)) {
            throw NonFiniteValue("property CSV id " + row[col[0]]);
        }
        p.full << p.C11, p.C12, 0, p.C12, p.C22, 0, 0, 0, p.C33;
        out.ids.push_back(static_cast<int>(parse_long(row[col[0]])));
        out.props.push_back(p);
    }
    return out;
}

}  // namespace dpacq
