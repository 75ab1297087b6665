// dpacq command-line driver.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "dpacq/corpus.hpp"
#include "dpacq/csv.hpp"
#include "dpacq/descriptor.hpp"
#include "dpacq/error.hpp"
#include "dpacq/homogenize.hpp"
#include "dpacq/log.hpp"
#include "dpacq/metrics.hpp"
#include "dpacq/pipeline.hpp"
#include "dpacq/run_config.hpp"

namespace fs = std::filesystem;
using namespace dpacq;

namespace {

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Usage: return 2;
        case ErrorKind::Data: return 3;
        case ErrorKind::Numeric: return 4;
    }
    return 1;
}

int env_threads() {
    if (const char* v = std::getenv("DPACQ_THREADS")) {
        try {
            const long t = parse_long(v);
            if (t >= 1) return static_cast<int>(t);
        } catch (const Error&) {
        }
        throw UsageError("DPACQ_THREADS must be a positive integer");
    }
    return 1;
}

void print_resolved(const std::map<std::string, std::string>& kv) {
    std::cout << "# resolved configuration\n";
    for (const auto& [k, v] : kv) std::cout << k << " = " << v << '\n';
}

ShapeLibrary read_library(const std::string& path) {
    if (fs::is_directory(path)) return make_library(read_pgm_dir(path));
    return make_library(read_pack(path));
}

// Selected ids plus (C11, C12, C22) from a manifest CSV.
struct Manifest {
    std::vector<int> ids;
    Eigen::MatrixXd props;
};

Manifest read_manifest(const std::string& path) {
    const CsvTable t = read_csv(path);
    const char* needed[] = {"id", "C11", "C12", "C22"};
    int col[4];
    for (int i = 0; i < 4; ++i) {
        col[i] = t.column(needed[i]);
        if (col[i] < 0) throw MissingColumn("manifest '" + path + "' has no column '" + needed[i] + "'");
    }
    Manifest m;
    m.props.resize(static_cast<Eigen::Index>(t.rows.size()), 3);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        m.ids.push_back(static_cast<int>(parse_long(t.rows[r][static_cast<std::size_t>(col[0])])));
        for (int j = 0; j < 3; ++j) {
            m.props(static_cast<Eigen::Index>(r), j) = parse_double(t.rows[r][static_cast<std::size_t>(col[j + 1])]);
        }
    }
    return m;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dpacq: task-aware sequential data acquisition"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress progress output");

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic lattice corpus");
    int gen_n = 0;
    std::uint64_t gen_seed = 0;
    int gen_res = 50;
    std::string gen_out;
    gen->add_option("-n,--count", gen_n, "number of shapes")->required();
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--resolution", gen_res, "pixels per side");
    gen->add_option("-o,--out", gen_out, "output SHPB pack")->required();

    // descriptor
    auto* desc = app.add_subcommand("descriptor", "fit or import latent descriptors");
    std::string desc_mode;
    std::string desc_pack;
    std::string desc_in;
    std::string desc_out;
    int desc_dim = 10;
    std::uint64_t desc_seed = 0;
    desc->add_option("mode", desc_mode, "pca | import")->required()->check(CLI::IsMember({"pca", "import"}));
    desc->add_option("--pack", desc_pack, "SHPB pack or PGM directory")->required();
    desc->add_option("--latents", desc_in, "latent CSV to import");
    desc->add_option("--dim", desc_dim, "latent dimension for pca");
    desc->add_option("--seed", desc_seed, "seed");
    desc->add_option("-o,--out", desc_out, "output latent CSV")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "homogenize every shape of a pack");
    std::string eval_pack;
    std::string eval_out;
    MaterialSpec mat;
    int eval_threads = 0;
    eval->add_option("--pack", eval_pack, "SHPB pack or PGM directory")->required();
    eval->add_option("-o,--out", eval_out, "output property CSV")->required();
    eval->add_option("--E", mat.E_solid, "solid Young's modulus");
    eval->add_option("--nu", mat.nu, "Poisson ratio");
    eval->add_option("--void-ratio", mat.void_ratio, "void modulus relative to solid");
    eval->add_option("--threads", eval_threads, "worker threads (default DPACQ_THREADS or 1)");

    // run
    auto* run = app.add_subcommand("run", "run an acquisition from a config file");
    std::string run_config_path;
    std::optional<std::uint64_t> run_seed;
    std::string run_outdir;
    int run_threads = 0;
    RunOptions run_opts;
    run->add_option("config", run_config_path, "key = value config file")->required();
    run->add_option("--seed", run_seed, "override master seed");
    run->add_option("--output-dir", run_outdir, "override output_dir");
    run->add_option("--threads", run_threads, "override threads");
    run->add_flag("--resume", run_opts.resume, "continue from <output_dir>/checkpoint.json");
    run->add_option("--stop-after", run_opts.stop_after, "pause after this many iterations");

    // metrics
    auto* met = app.add_subcommand("metrics", "distance gains of a manifest against a population");
    std::string met_manifest;
    std::string met_latents;
    std::string met_props;
    int met_rep = 30;
    std::uint64_t met_seed = 0;
    met->add_option("--manifest", met_manifest, "manifest CSV")->required();
    met->add_option("--latents", met_latents, "population latent CSV")->required();
    met->add_option("--properties", met_props, "population property CSV");
    met->add_option("--n-rep", met_rep, "iid replicates");
    met->add_option("--seed", met_seed, "seed");

    // export
    auto* exp = app.add_subcommand("export", "join a manifest with latents into a dataset CSV");
    std::string exp_manifest;
    std::string exp_latents;
    std::string exp_out;
    exp->add_option("--manifest", exp_manifest, "manifest CSV")->required();
    exp->add_option("--latents", exp_latents, "latent CSV")->required();
    exp->add_option("-o,--out", exp_out, "output dataset CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    log::set_quiet(quiet);

    try {
        if (*gen) {
            print_resolved({{"count", std::to_string(gen_n)},
                            {"seed", std::to_string(gen_seed)},
                            {"resolution", std::to_string(gen_res)},
                            {"out", gen_out}});
            const SyntheticCorpus c = generate_corpus(gen_n, gen_seed, gen_res);
            write_pack(gen_out, c.library.shapes);
            const std::string params_path = gen_out + ".params.csv";
            std::ofstream os(params_path);
            if (!os) throw IoError("cannot write '" + params_path + "'");
            os << "id,t0,t1,t2,t3,vf\n";
            for (std::size_t i = 0; i < c.params.size(); ++i) {
                os << i;
                for (double t : c.params[i].t) os << ',' << format_double(t);
                os << ',' << format_double(c.library.vf[i]) << '\n';
            }
            std::cout << "wrote " << c.library.size() << " shapes to " << gen_out << '\n';
        } else if (*desc) {
            print_resolved({{"mode", desc_mode},
                            {"pack", desc_pack},
                            {"latents", desc_in},
                            {"dim", std::to_string(desc_dim)},
                            {"seed", std::to_string(desc_seed)},
                            {"out", desc_out}});
            const ShapeLibrary lib = read_library(desc_pack);
            if (desc_mode == "pca") {
                const PcaBasis basis = fit_pca(lib, lib.eligible(), desc_dim, desc_seed);
                std::optional<std::string> comment;
                if (basis.rank_deficient()) {
                    comment = "rank_deficient requested_dim=" + std::to_string(basis.requested_dim) +
                              " dim=" + std::to_string(basis.dim());
                }
                write_latents(desc_out, transform(basis, lib), comment);
            } else {
                if (desc_in.empty()) throw UsageError("descriptor import needs --latents");
                write_latents(desc_out, import_latents(desc_in, static_cast<Eigen::Index>(lib.size())));
            }
            std::cout << "wrote latents to " << desc_out << '\n';
        } else if (*eval) {
            const int threads = eval_threads > 0 ? eval_threads : env_threads();
            print_resolved({{"pack", eval_pack},
                            {"out", eval_out},
                            {"E_solid", format_double(mat.E_solid)},
                            {"nu", format_double(mat.nu)},
                            {"void_ratio", format_double(mat.void_ratio)},
                            {"threads", std::to_string(threads)}});
            mat.validate();
            const ShapeLibrary lib = read_library(eval_pack);
            const auto props = homogenize_batch(lib.shapes, mat, threads);
            std::vector<int> ids;
            for (const auto& s : lib.shapes) ids.push_back(s.id);
            write_properties(eval_out, ids, props);
            std::cout << "wrote " << props.size() << " property rows to " << eval_out << '\n';
        } else if (*run) {
            RunConfig cfg = load_run_config(run_config_path);
            if (run_seed) cfg.acq.master_seed = *run_seed;
            if (!run_outdir.empty()) cfg.output_dir = run_outdir;
            if (run_threads > 0) cfg.threads = run_threads;
            else if (std::getenv("DPACQ_THREADS")) cfg.threads = env_threads();
            std::cout << "# resolved configuration\n" << resolved_config(cfg) << std::flush;
            const RunSummary s = run_pipeline(cfg, run_opts);
            std::cout << "status: " << s.stop_reason << "\niterations: " << s.iterations
                      << "\nselected: " << s.selected << "\nfinal stage: " << to_string(s.final_stage)
                      << "\nmanifest: " << s.manifest_path.string() << "\nhistory: " << s.history_path.string()
                      << '\n';
        } else if (*met) {
            print_resolved({{"manifest", met_manifest},
                            {"latents", met_latents},
                            {"properties", met_props},
                            {"n_rep", std::to_string(met_rep)},
                            {"seed", std::to_string(met_seed)}});
            const Manifest m = read_manifest(met_manifest);
            const CsvTable lt = read_csv(met_latents);
            const LatentMatrix lat = import_latents(met_latents, static_cast<Eigen::Index>(lt.rows.size()));
            Eigen::MatrixXd sel_z(static_cast<Eigen::Index>(m.ids.size()), lat.z.cols());
            for (std::size_t i = 0; i < m.ids.size(); ++i) {
                if (m.ids[i] < 0 || m.ids[i] >= lat.rows()) throw FormatError("manifest id outside latent table");
                sel_z.row(static_cast<Eigen::Index>(i)) = lat.z.row(m.ids[i]);
            }
            Engine rng(derive_seed(met_seed, "metrics"));
            const GainReport gs = distance_gain(sel_z, lat.z, met_rep, rng);
            std::cout << "shape_gain = " << format_double(gs.gain) << "\nshape_mean_distance = "
                      << format_double(gs.mean_distance) << '\n';
            if (!met_props.empty()) {
                const PropertyTable pt = read_properties(met_props);
                Eigen::MatrixXd pop(static_cast<Eigen::Index>(pt.props.size()), 3);
                for (std::size_t i = 0; i < pt.props.size(); ++i) {
                    pop.row(static_cast<Eigen::Index>(i)) << pt.props[i].C11, pt.props[i].C12, pt.props[i].C22;
                }
                const Eigen::RowVectorXd mu = pop.colwise().mean();
                Eigen::RowVectorXd sd = ((pop.rowwise() - mu).colwise().squaredNorm() / static_cast<double>(pop.rows())).cwiseSqrt();
                for (Eigen::Index j = 0; j < 3; ++j)
                    if (!(sd(j) > 0)) sd(j) = 1;
                const Eigen::MatrixXd pop_s = (pop.rowwise() - mu).array().rowwise() / sd.array();
                const Eigen::MatrixXd sel_s = (m.props.rowwise() - mu).array().rowwise() / sd.array();
                const GainReport gp = distance_gain(sel_s, pop_s, met_rep, rng);
                std::cout << "property_gain = " << format_double(gp.gain) << "\nproperty_mean_distance = "
                          << format_double(gp.mean_distance) << '\n';
            }
        } else if (*exp) {
            print_resolved({{"manifest", exp_manifest}, {"latents", exp_latents}, {"out", exp_out}});
            const Manifest m = read_manifest(exp_manifest);
            const CsvTable lt = read_csv(exp_latents);
            const LatentMatrix lat = import_latents(exp_latents, static_cast<Eigen::Index>(lt.rows.size()));
            std::ofstream os(exp_out);
            if (!os) throw IoError("cannot write '" + exp_out + "'");
            os << "id";
            for (int d = 0; d < lat.dim(); ++d) os << ",z" << d;
            os << ",C11,C12,C22\n";
            for (std::size_t i = 0; i < m.ids.size(); ++i) {
                if (m.ids[i] < 0 || m.ids[i] >= lat.rows()) throw FormatError("manifest id outside latent table");
                os << m.ids[i];
                for (int d = 0; d < lat.dim(); ++d) os << ',' << format_double(lat.z(m.ids[i], d));
                for (int j = 0; j < 3; ++j) os << ',' << format_double(m.props(static_cast<Eigen::Index>(i), j));
                os << '\n';
            }
            std::cout << "wrote " << m.ids.size() << " rows to " << exp_out << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: IoError: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
