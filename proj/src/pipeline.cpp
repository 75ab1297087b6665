#include "dpacq/pipeline.hpp"

#include <cmath>
#include <fstream>

#include "dpacq/checkpoint.hpp"
#include "dpacq/csv.hpp"
#include "dpacq/error.hpp"
#include "dpacq/homogenize.hpp"
#include "dpacq/log.hpp"

namespace dpacq {
namespace fs = std::filesystem;

ShapeLibrary load_corpus(const RunConfig& cfg) {
    switch (cfg.corpus) {
        case CorpusSource::synthetic:
            return generate_corpus(cfg.corpus_n, cfg.acq.master_seed, cfg.resolution).library;
        case CorpusSource::pack: return make_library(read_pack(cfg.corpus_path));
        case CorpusSource::pgm: return make_library(read_pgm_dir(cfg.corpus_path));
    }
    throw ConfigError("unknown corpus source");
}

LatentMatrix build_latents(const RunConfig& cfg, const ShapeLibrary& library) {
    if (cfg.descriptor == DescriptorSource::import) {
        return import_latents(cfg.latent_path, static_cast<Eigen::Index>(library.size()));
    }
    const std::vector<int> items = library.eligible();
    const PcaBasis basis = fit_pca(library, items, cfg.latent_dim, cfg.acq.master_seed);
    return transform(basis, library);
}

std::string library_key(const ShapeLibrary& library, const MaterialSpec& mat) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ULL;
    };
    mix(library.size());
    for (const auto& s : library.shapes) {
        mix(static_cast<std::uint64_t>(s.rows) << 32 | static_cast<std::uint32_t>(s.cols));
        for (auto c : s.cells) mix(c);
    }
    return std::to_string(h) + " " + format_double(mat.E_solid) + " " + format_double(mat.void_ratio) + " " +
           format_double(mat.nu);
}

Eigen::MatrixXd reference_properties(const RunConfig& cfg, const ShapeLibrary& library, const std::vector<int>& items,
                                     std::vector<PropertyVector>* full) {
    const auto n = static_cast<Eigen::Index>(items.size());
    if (cfg.reference_properties == "none") return {};
    std::vector<PropertyVector> all;
    if (cfg.reference_properties == "evaluate") {
        const fs::path cache = fs::path(cfg.output_dir) / "reference_properties.csv";
        const fs::path key_path = fs::path(cfg.output_dir) / "reference_properties.key";
        const std::string key = library_key(library, cfg.material);
        bool loaded = false;
        if (fs::exists(cache) && fs::exists(key_path)) {
            std::ifstream ks(key_path);
            std::string stored;
            std::getline(ks, stored);
            PropertyTable t = read_properties(cache);
            if (stored == key && t.ids.size() == library.size()) {
                all = std::move(t.props);
                loaded = true;
            }
        }
        if (!loaded) {
            log::info("evaluating " + std::to_string(library.size()) + " reference shapes");
            all = homogenize_batch(library.shapes, cfg.material, cfg.threads);
            std::vector<int> ids(library.size());
            for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = library.shapes[i].id;
            fs::create_directories(cfg.output_dir);
            write_properties(cache, ids, all);
            std::ofstream ks(key_path, std::ios::trunc);
            ks << key << '\n';
        }
    } else {
        PropertyTable t = read_properties(cfg.reference_properties);
        all.assign(library.size(), PropertyVector{});
        std::vector<bool> seen(library.size(), false);
        for (std::size_t i = 0; i < t.ids.size(); ++i) {
            const int id = t.ids[i];
            if (id < 0 || static_cast<std::size_t>(id) >= library.size()) {
                throw FormatError("reference property id " + std::to_string(id) + " outside the library");
            }
            all[static_cast<std::size_t>(id)] = t.props[i];
            seen[static_cast<std::size_t>(id)] = true;
        }
        for (int item : items) {
            if (!seen[static_cast<std::size_t>(item)]) {
                throw RowCountMismatch("reference properties lack shape " + std::to_string(item));
            }
        }
    }
    Eigen::MatrixXd out(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = response_row(all[static_cast<std::size_t>(items[static_cast<std::size_t>(i)])]);
    if (full) *full = std::move(all);
    return out;
}

AcquisitionProblem make_problem(const ShapeLibrary& library, const LatentMatrix& latents,
                                const std::vector<int>& items, Eigen::MatrixXd reference) {
    if (latents.rows() != static_cast<Eigen::Index>(library.size())) {
        throw RowCountMismatch("latent rows do not match the library size");
    }
    AcquisitionProblem p;
    const auto n = static_cast<Eigen::Index>(items.size());
    p.latents.resize(n, latents.z.cols());
    p.vf.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int id = items[static_cast<std::size_t>(i)];
        p.latents.row(i) = latents.z.row(id);
        p.vf(i) = library.vf[static_cast<std::size_t>(id)];
        p.library_ids.push_back(library.shapes[static_cast<std::size_t>(id)].id);
    }
    p.reference_properties = std::move(reference);
    return p;
}

namespace {

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write '" + path.string() + "'");
    return os;
}

}  // namespace

void write_history(const fs::path& path, const std::vector<HistoryRow>& rows) {
    auto os = open_out(path);
    os << "iter,stage,n_selected,residual,gain_shape,gain_property\n";
    for (const auto& r : rows) {
        os << r.iter << ',' << to_string(r.stage) << ',' << r.n_selected << ',' << cell(r.residual) << ','
           << cell(r.gain_shape) << ',' << cell(r.gain_property) << '\n';
    }
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

void write_manifest(const fs::path& path, const Acquisition& acq) {
    auto os = open_out(path);
    const Eigen::VectorXd q = acq.selected_quality();
    os << "rank,id,C11,C12,C22,C33,q\n";
    const auto& sel = acq.state().selected;
    for (std::size_t i = 0; i < sel.size(); ++i) {
        const auto& p = sel[i].props;
        os << (i + 1) << ',' << acq.problem().library_ids[static_cast<std::size_t>(sel[i].item)] << ','
           << format_double(p.C11) << ',' << format_double(p.C12) << ',' << format_double(p.C22) << ','
           << format_double(p.C33) << ',' << format_double(q(static_cast<Eigen::Index>(i))) << '\n';
    }
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

RunSummary run_pipeline(const RunConfig& cfg, const RunOptions& options) {
    cfg.validate();
    const fs::path out(cfg.output_dir);
    fs::create_directories(out);
    RunSummary summary;
    summary.history_path = out / "history.csv";
    summary.manifest_path = out / "manifest.csv";
    summary.checkpoint_path = out / "checkpoint.json";
    {
        auto os = open_out(out / "config.resolved");
        os << resolved_config(cfg);
    }

    const ShapeLibrary library = load_corpus(cfg);
    const std::vector<int> items = library.eligible();
    if (items.size() < library.size()) {
        log::warn(std::to_string(library.size() - items.size()) + " degenerate shapes excluded from acquisition");
    }
    const LatentMatrix latents = build_latents(cfg, library);
    std::vector<PropertyVector> all_props;
    Eigen::MatrixXd reference = reference_properties(cfg, library, items, &all_props);
    const bool lookup = cfg.reference_properties == "evaluate";
    AcquisitionProblem problem = make_problem(library, latents, items, std::move(reference));

    Evaluator evaluator = [&](const std::vector<int>& batch) {
        if (lookup) {
            std::vector<PropertyVector> r;
            for (int item : batch) r.push_back(all_props[static_cast<std::size_t>(items[static_cast<std::size_t>(item)])]);
            return r;
        }
        std::vector<BinaryShape> shapes;
        for (int item : batch) shapes.push_back(library.shapes[static_cast<std::size_t>(items[static_cast<std::size_t>(item)])]);
        return homogenize_batch(shapes, cfg.material, cfg.threads);
    };

    Acquisition acq(std::move(problem), cfg.acq, evaluator);
    const std::string fingerprint = run_fingerprint(cfg);
    if (options.resume) {
        if (!fs::exists(summary.checkpoint_path)) throw IoError("no checkpoint to resume in " + out.string());
        Checkpoint cp = load_checkpoint(summary.checkpoint_path);
        if (cp.fingerprint != fingerprint) throw ConfigError("checkpoint was written by a different configuration");
        acq.restore(std::move(cp.state));
        log::info("resumed at iteration " + std::to_string(acq.state().iteration));
    } else {
        acq.initialize();
    }

    auto persist = [&](const AcquisitionState& s) {
        save_checkpoint(summary.checkpoint_path, Checkpoint{fingerprint, s});
        write_history(summary.history_path, s.history);
        write_manifest(summary.manifest_path, acq);
    };
    acq.run([&](const AcquisitionState& s) {
        const HistoryRow& h = s.history.empty() ? HistoryRow{} : s.history.back();
        log::info("iter " + std::to_string(s.iteration) + " stage " + to_string(h.stage) + " n=" +
                  std::to_string(s.selected.size()) + (std::isfinite(h.residual) ? " r=" + format_double(h.residual) : "") +
                  (std::isfinite(h.gain_shape) ? " gs=" + format_double(h.gain_shape) : "") +
                  (std::isfinite(h.gain_property) ? " gp=" + format_double(h.gain_property) : ""));
        const bool pause = options.stop_after >= 0 && s.iteration >= options.stop_after;
        if (s.finished || pause || s.iteration % cfg.checkpoint_every == 0) persist(s);
        return !pause;
    });
    persist(acq.state());

    const AcquisitionState& s = acq.state();
    summary.finished = s.finished;
    summary.stop_reason = s.finished ? s.stop_reason : "paused";
    summary.iterations = s.iteration;
    summary.selected = static_cast<int>(s.selected.size());
    summary.final_stage = s.stage;
    for (const auto& h : s.history) {
        if (h.stage == Stage::II && !summary.stage2_iteration) summary.stage2_iteration = h.iter;
        if (h.stage == Stage::III && !summary.stage3_iteration) summary.stage3_iteration = h.iter;
    }
    return summary;
}

}  // namespace dpacq
