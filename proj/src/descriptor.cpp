#include "dpacq/descriptor.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "dpacq/csv.hpp"
#include "dpacq/error.hpp"
#include "dpacq/linalg.hpp"
#include "dpacq/log.hpp"

namespace dpacq {
namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

PcaBasis fit_pca(const ShapeLibrary& library, int dim, std::uint64_t seed) {
    std::vector<int> all(library.size());
    std::iota(all.begin(), all.end(), 0);
    return fit_pca(library, all, dim, seed);
}

PcaBasis fit_pca(const ShapeLibrary& library, std::span<const int> subset, int dim, std::uint64_t) {
    const auto n = static_cast<Eigen::Index>(subset.size());
    if (dim < 1 || n <= dim) throw UsageError("PCA needs n > dim >= 1");
    const int rows = library.rows();
    const int cols = library.cols();
    const Eigen::Index p = static_cast<Eigen::Index>(rows) * cols;

    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& f = library.sdfs[static_cast<std::size_t>(subset[static_cast<std::size_t>(i)])].field;
        x.row(i) = as_vector(f).transpose();
    }
    PcaBasis basis;
    basis.rows = rows;
    basis.cols = cols;
    basis.requested_dim = dim;
    basis.mean = x.colwise().mean().transpose();
    x.rowwise() -= basis.mean.transpose();

    // Eigen-decompose whichever second-moment matrix is smaller.
    Eigen::VectorXd values;
    Eigen::MatrixXd directions;  // p x dim
    if (n <= p) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
        gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
        TopEigen top = top_eigenpairs(std::move(gram), dim);
        values = top.values;
        directions = x.transpose() * top.vectors;
    } else {
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
        cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
        cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
        TopEigen top = top_eigenpairs(std::move(cov), dim);
        values = top.values;
        directions = top.vectors;
    }

    const double tol = 1e-12 * std::max(values.size() > 0 ? values(0) : 0.0, 1e-300);
    int rank = 0;
    while (rank < values.size() && values(rank) > tol && values(rank) > 1e-300) ++rank;
    if (rank == 0) throw RankDeficient("shape library has no SDF variance");
    if (rank < dim) {
        log::warn("RankDeficient: requested " + std::to_string(dim) + " components, library supports " +
                  std::to_string(rank));
    }

    directions.conservativeResize(Eigen::NoChange, rank);
    // Orthonormalize (the Gram route yields directions only up to rounding).
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(directions);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, rank);
    for (int j = 0; j < rank; ++j) {
        Eigen::Index arg = 0;
        q.col(j).cwiseAbs().maxCoeff(&arg);
        if (q(arg, j) < 0) q.col(j) = -q.col(j);
    }
    basis.components = q.transpose();
    basis.explained_variance = values.head(rank) / static_cast<double>(n);

    const Eigen::MatrixXd proj = x * q;
    basis.scales.resize(rank);
    for (int j = 0; j < rank; ++j) {
        const double mu = proj.col(j).mean();
        basis.scales(j) = std::sqrt((proj.col(j).array() - mu).square().sum() / static_cast<double>(n));
    }
    return basis;
}

Eigen::VectorXd transform_field(const PcaBasis& basis, std::span<const double> field) {
    if (static_cast<Eigen::Index>(field.size()) != basis.mean.size()) {
        throw DimensionMismatch("SDF size does not match the PCA basis");
    }
    return (basis.components * (as_vector(field) - basis.mean)).cwiseQuotient(basis.scales);
}

Eigen::VectorXd reconstruct(const PcaBasis& basis, const Eigen::VectorXd& latent) {
    if (latent.size() != basis.dim()) throw DimensionMismatch("latent size does not match the PCA basis");
    return basis.mean + basis.components.transpose() * latent.cwiseProduct(basis.scales);
}

LatentMatrix transform(const PcaBasis& basis, const ShapeLibrary& library) {
    if (library.rows() != basis.rows || library.cols() != basis.cols) {
        throw DimensionMismatch("library raster size does not match the PCA basis");
    }
    LatentMatrix out;
    out.source = LatentSource::pca;
    out.z.resize(static_cast<Eigen::Index>(library.size()), basis.dim());
    for (std::size_t i = 0; i < library.size(); ++i) {
        out.z.row(static_cast<Eigen::Index>(i)) = transform_field(basis, library.sdfs[i].field).transpose();
    }
    return out;
}

LatentMatrix import_latents(const std::filesystem::path& path, Eigen::Index expected_n) {
    CsvTable table = read_csv(path);
    const auto& header = table.header;
    if (header.size() < 2 || header[0] != "id") throw BadHeader("latent CSV must start with 'id,z0'");
    for (std::size_t j = 1; j < header.size(); ++j) {
        if (header[j] != "z" + std::to_string(j - 1)) {
            throw BadHeader("expected column 'z" + std::to_string(j - 1) + "', found '" + header[j] + "'");
        }
    }
    const auto dim = static_cast<Eigen::Index>(header.size() - 1);
    if (static_cast<Eigen::Index>(table.rows.size()) != expected_n) {
        throw RowCountMismatch("expected " + std::to_string(expected_n) + " latent rows, found " +
                               std::to_string(table.rows.size()));
    }
    LatentMatrix out;
    out.source = LatentSource::imported;
    out.z.resize(expected_n, dim);
    std::vector<bool> seen(static_cast<std::size_t>(expected_n), false);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != header.size()) {
            throw FormatError("latent CSV line " + std::to_string(r + 2) + " has the wrong field count");
        }
        const long id = parse_long(row[0]);
        if (id < 0 || id >= expected_n || seen[static_cast<std::size_t>(id)]) {
            throw FormatError("latent CSV has an invalid or duplicate id " + row[0]);
        }
        seen[static_cast<std::size_t>(id)] = true;
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double v = parse_double(row[static_cast<std::size_t>(j + 1)]);
            if (!std::isfinite(v)) {
                throw NonFiniteValue("latent CSV id " + row[0] + " column z" + std::to_string(j));
            }
            out.z(id, j) = v;
        }
    }

    bool off_scale = false;
    Eigen::RowVectorXd mean = out.z.colwise().mean();
    Eigen::RowVectorXd sd(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        sd(j) = std::sqrt((out.z.col(j).array() - mean(j)).square().sum() / static_cast<double>(expected_n));
        if (std::abs(sd(j) - 1.0) > 0.2) off_scale = true;
    }
    if (off_scale) {
        log::warn("imported latents are not standardized; standardizing columns in place");
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (sd(j) <= 0) throw NonFiniteValue("latent column z" + std::to_string(j) + " is constant");
            out.z.col(j) = (out.z.col(j).array() - mean(j)) / sd(j);
        }
    }
    return out;
}

void write_latents(const std::filesystem::path& path, const LatentMatrix& latents,
                   const std::optional<std::string>& comment) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    if (comment) os << "# " << *comment << '\n';
    os << "id";
    for (int j = 0; j < latents.dim(); ++j) os << ",z" << j;
    os << '\n';
    for (Eigen::Index i = 0; i < latents.rows(); ++i) {
        os << i;
        for (int j = 0; j < latents.dim(); ++j) os << ',' << format_double(latents.z(i, j));
        os << '\n';
    }
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace dpacq
