#include "dpacq/acquire.hpp"

#include <chrono>
#include <cmath>

#include "dpacq/error.hpp"
#include "dpacq/log.hpp"

namespace dpacq {

std::string to_string(Stage s) {
    switch (s) {
        case Stage::I: return "I";
        case Stage::II: return "II";
        case Stage::III: return "III";
    }
    return "?";
}

Eigen::RowVector3d response_row(const PropertyVector& p) { return {p.C11, p.C12, p.C22}; }

void AcquisitionConfig::validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (!(epsilon >= 0 && epsilon <= 1)) throw ConfigError("epsilon must lie in [0, 1]");
    if (!(tau2 < tau1)) throw ConfigError("tau2 must be smaller than tau1");
    if (!(tau2 >= 0)) throw ConfigError("tau2 must be non-negative");
    if (i_tol < 1) throw ConfigError("i_tol must be at least 1");
    if (i_max < 1) throw ConfigError("i_max must be at least 1");
    if (dv < 1) throw ConfigError("dv must be at least 1");
    if (target_size < 1) throw ConfigError("target_size must be at least 1");
    if (!(shape_bandwidth > 0) || !(property_bandwidth > 0)) throw ConfigError("bandwidths must be positive");
    if (refit_every < 1) throw ConfigError("refit_every must be at least 1");
    if (n_rep < 1) throw ConfigError("n_rep must be at least 1");
    if (!(gp.omega_lower < gp.omega_upper)) throw ConfigError("GP roughness bounds are empty");
    if (gp.restarts < 0 || gp.max_iter < 1) throw ConfigError("GP restarts/max_iter out of range");
    if (gp.estimate_nugget && !(gp.nugget_log10_lower < gp.nugget_log10_upper)) throw ConfigError("GP nugget bounds are empty");
    quality.validate();
}

void AcquisitionProblem::validate() const {
    const Eigen::Index n = latents.rows();
    if (vf.size() != n) throw DimensionMismatch("volume fractions do not match latent rows");
    if (static_cast<Eigen::Index>(library_ids.size()) != n) throw DimensionMismatch("library ids do not match latent rows");
    if (reference_properties.size() > 0 && (reference_properties.rows() != n || reference_properties.cols() != 3)) {
        throw DimensionMismatch("reference properties must be n x 3");
    }
    if (!latents.allFinite()) throw NonFiniteValue("latents contain non-finite values");
}

Acquisition::Acquisition(AcquisitionProblem problem, AcquisitionConfig config, Evaluator evaluator)
    : problem_(std::move(problem)), config_(std::move(config)), evaluator_(std::move(evaluator)) {
    problem_.validate();
    config_.validate();
    if (problem_.size() < config_.k) {
        throw UsageError("library of " + std::to_string(problem_.size()) + " items is smaller than k = " +
                         std::to_string(config_.k));
    }
    if (problem_.reference_properties.size() > 0) {
        const Eigen::MatrixXd& r = problem_.reference_properties;
        property_stats_.mean = r.colwise().mean();
        const Eigen::MatrixXd c = r.rowwise() - property_stats_.mean;
        property_stats_.std = (c.colwise().squaredNorm() / static_cast<double>(r.rows())).cwiseSqrt();
        for (Eigen::Index j = 0; j < 3; ++j)
            if (!(property_stats_.std(j) > 0)) property_stats_.std(j) = 1.0;
        standardized_reference_ = c.array().rowwise() / property_stats_.std.array();
    }
    shape_bandwidth_ = config_.shape_bandwidth_median ? median_bandwidth(problem_.latents) : config_.shape_bandwidth;
}

void Acquisition::initialize() {
    const std::uint64_t master = config_.master_seed;
    state_ = AcquisitionState{};
    state_.shape_feature = rff_features(problem_.latents, shape_bandwidth_, config_.dv, derive_seed(master, "shape_rff"));
    state_.shape_feature.keep_basis = false;
    state_.sampling_rng = make_stream(master, "sampling");
    state_.gp_rng = make_stream(master, "gp");
    state_.shape_acc = PairDistanceAccumulator(problem_.latents.cols());
    state_.property_acc = PairDistanceAccumulator(3);
}

int Acquisition::remaining() const {
    return config_.target_size - static_cast<int>(state_.selected.size());
}

Batch Acquisition::draw(const LowRankFeature& feature, int k, BatchTag tag) {
    Batch b;
    b.tag = tag;
    if (k <= 0 || feature.rows() == 0) return b;
    KdppSampler sampler(feature);
    const int kk = std::min(k, sampler.rank());
    if (kk < k) {
        log::warn("RankTooLow: " + std::string(tag == BatchTag::shape ? "shape" : "property") + " feature rank " +
                  std::to_string(sampler.rank()) + " < " + std::to_string(k) + "; drawing " + std::to_string(kk));
    }
    if (kk == 0) return b;
    return sampler.draw(kk, state_.sampling_rng, tag);
}

void Acquisition::condition_shape(const std::vector<int>& items) {
    if (items.empty()) return;
    condition_lowrank_inplace(state_.shape_feature, items);
    state_.shape_conditioning.push_back(items);
}

void Acquisition::evaluate_and_append(const std::vector<Batch>& batches) {
    std::vector<int> items;
    for (const auto& b : batches) items.insert(items.end(), b.indices.begin(), b.indices.end());
    const std::vector<PropertyVector> props = evaluator_(items);
    if (props.size() != items.size()) throw DimensionMismatch("evaluator returned the wrong number of results");
    std::size_t pos = 0;
    Eigen::MatrixXd z(static_cast<Eigen::Index>(items.size()), problem_.latents.cols());
    Eigen::MatrixXd p(static_cast<Eigen::Index>(items.size()), 3);
    for (const auto& b : batches) {
        for (int item : b.indices) {
            state_.selected.push_back({item, props[pos], b.tag, state_.iteration});
            z.row(static_cast<Eigen::Index>(pos)) = problem_.latents.row(item);
            if (standardized_reference_.size() > 0) {
                p.row(static_cast<Eigen::Index>(pos)) =
                    (response_row(props[pos]) - property_stats_.mean).cwiseQuotient(property_stats_.std);
            }
            ++pos;
        }
    }
    state_.shape_acc.add(z);
    if (standardized_reference_.size() > 0) state_.property_acc.add(p);
}

double Acquisition::maybe_fit() {
    const auto n = static_cast<Eigen::Index>(state_.selected.size());
    const Eigen::Index dim = problem_.latents.cols();
    if (n < dim + 2) return std::numeric_limits<double>::quiet_NaN();
    const Eigen::MatrixXd z = selected_latents();
    const Eigen::MatrixXd p = selected_properties();
    std::optional<Eigen::VectorXd> warm;
    std::optional<double> warm_nugget;
    if (!state_.omega_history.empty()) warm = state_.omega_history.back();
    if (state_.gp) warm_nugget = state_.gp->nugget;
    const auto t0 = std::chrono::steady_clock::now();
    GpModel model;
    try {
        model = fit(z, p, warm, config_.gp, state_.gp_rng, warm_nugget);
    } catch (const TooFewPoints&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    last_fit_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state_.gp = std::move(model);
    state_.gp_train_count = static_cast<int>(n);
    state_.omega_history.push_back(state_.gp->omega);
    if (state_.omega_history.size() < 2) return std::numeric_limits<double>::quiet_NaN();

    const double r = roughness_residual(state_.omega_history.back(), state_.omega_history[state_.omega_history.size() - 2]);
    state_.residual_history.push_back(r);
    if (state_.stage == Stage::I) {
        state_.below_tau1 = r < config_.tau1 ? state_.below_tau1 + 1 : 0;
        if (state_.below_tau1 >= config_.i_tol) {
            state_.stage = Stage::II;
            state_.below_tau2 = 0;
            log::info("stage II entered at iteration " + std::to_string(state_.iteration));
        }
    } else if (state_.stage == Stage::II) {
        state_.below_tau2 = r < config_.tau2 ? state_.below_tau2 + 1 : 0;
        if (state_.below_tau2 >= config_.i_tol) {
            state_.stage = Stage::III;
            log::info("stage III entered at iteration " + std::to_string(state_.iteration));
        }
    }
    return r;
}

void Acquisition::record_history(Stage stage, double residual) {
    HistoryRow row;
    row.iter = state_.iteration;
    row.stage = stage;
    row.n_selected = static_cast<int>(state_.selected.size());
    row.residual = residual;
    row.gp_fit_seconds = last_fit_seconds_;
    const Eigen::Index n = state_.shape_acc.count();
    if (config_.track_gains && n >= 2) {
        Engine rng(derive_seed(config_.master_seed, "metrics/" + std::to_string(state_.iteration)));
        const double shape_den = iid_replicate_means(n, problem_.latents, config_.n_rep, rng).mean();
        row.gain_shape = state_.shape_acc.mean() / shape_den;
        if (standardized_reference_.size() > 0) {
            const double prop_den = iid_replicate_means(n, standardized_reference_, config_.n_rep, rng).mean();
            row.gain_property = state_.property_acc.mean() / prop_den;
        }
    }
    state_.history.push_back(row);
}

void Acquisition::finish_check() {
    if (remaining() <= 0) {
        state_.finished = true;
        state_.stop_reason = "target size reached";
    } else if (state_.iteration >= config_.i_max) {
        state_.finished = true;
        state_.stop_reason = "iteration cap reached";
    } else if (state_.shape_feature.rows() == 0) {
        state_.finished = true;
        state_.stop_reason = "library exhausted";
    }
}

void Acquisition::step() {
    if (state_.finished) return;
    switch (state_.stage) {
        case Stage::I: step_stage1(); break;
        case Stage::II: step_stage2(); break;
        case Stage::III: step_stage3(); break;
    }
}

void Acquisition::step_stage1() {
    if (state_.stage != Stage::I) throw UsageError("step_stage1 called outside stage I");
    ++state_.iteration;
    last_fit_seconds_ = 0;
    const int k_eff = std::min(config_.k, remaining());
    Batch b = draw(state_.shape_feature, k_eff, BatchTag::shape);
    if (b.indices.empty()) {
        state_.finished = true;
        state_.stop_reason = "shape feature rank exhausted";
        return;
    }
    condition_shape(b.indices);
    evaluate_and_append({b});
    const double r = maybe_fit();
    record_history(Stage::I, r);
    finish_check();
}

LowRankFeature Acquisition::build_property_feature() {
    if (!state_.gp) throw UsageError("property sampling requires a fitted GP");
    Eigen::MatrixXd pred = predict_mean(*state_.gp, problem_.latents);
    for (const auto& s : state_.selected) pred.row(s.item) = response_row(s.props);

    const Eigen::RowVectorXd mean = pred.colwise().mean();
    Eigen::MatrixXd stdz = pred.rowwise() - mean;
    for (Eigen::Index j = 0; j < stdz.cols(); ++j) {
        const double sd = std::sqrt(stdz.col(j).squaredNorm() / static_cast<double>(stdz.rows()));
        if (sd > 0) stdz.col(j) /= sd;
    }
    LowRankFeature f = rff_features(stdz, config_.property_bandwidth, config_.dv,
                                    derive_seed(config_.master_seed, "property_rff"));
    f.keep_basis = false;
    // Conditioned on the whole selection at once; equal to batch-by-batch conditioning.
    std::vector<int> chosen;
    chosen.reserve(state_.selected.size());
    for (const auto& s : state_.selected) chosen.push_back(s.item);
    condition_lowrank_inplace(f, chosen);

    if (config_.quality.kind != QualityKind::none) {
        const Eigen::VectorXd raw = quality_index(config_.quality, pred.col(0), pred.col(2), problem_.vf);
        const Eigen::VectorXd w = activate(raw, config_.quality);
        Eigen::VectorXd active(f.rows());
        for (Eigen::Index i = 0; i < f.rows(); ++i) active(i) = w(f.items[static_cast<std::size_t>(i)]);
        f = apply_quality(f, active);
    }
    return f;
}

void Acquisition::property_step(bool update_gp) {
    const Stage stage = state_.stage;
    ++state_.iteration;
    last_fit_seconds_ = 0;
    const int k_eff = std::min(config_.k, remaining());
    const int n_prop = std::min(k_eff, static_cast<int>(std::floor(config_.epsilon * k_eff + 1e-9)));

    Batch bp;
    bp.tag = BatchTag::property;
    if (n_prop > 0) {
        const LowRankFeature pf = build_property_feature();
        bp = draw(pf, n_prop, BatchTag::property);
    }
    condition_shape(bp.indices);
    Batch bs = draw(state_.shape_feature, k_eff - static_cast<int>(bp.indices.size()), BatchTag::shape);
    condition_shape(bs.indices);
    if (bp.indices.empty() && bs.indices.empty()) {
        state_.finished = true;
        state_.stop_reason = "feature rank exhausted";
        return;
    }
    evaluate_and_append({bp, bs});
    double r = std::numeric_limits<double>::quiet_NaN();
    if (update_gp && state_.iteration % config_.refit_every == 0) r = maybe_fit();
    record_history(stage, r);
    finish_check();
}

void Acquisition::step_stage2() {
    if (state_.stage != Stage::II) throw UsageError("step_stage2 called outside stage II");
    property_step(true);
}

void Acquisition::step_stage3() {
    if (state_.stage != Stage::III) throw UsageError("step_stage3 called outside stage III");
    property_step(false);
}

void Acquisition::run(const std::function<bool(const AcquisitionState&)>& after_step) {
    finish_check();
    while (!state_.finished) {
        step();
        if (after_step && !after_step(state_)) return;
    }
}

void Acquisition::restore(AcquisitionState restored) {
    initialize();
    for (const auto& set : restored.shape_conditioning) condition_lowrank_inplace(state_.shape_feature, set);
    state_.shape_conditioning = std::move(restored.shape_conditioning);
    state_.stage = restored.stage;
    state_.iteration = restored.iteration;
    state_.selected = std::move(restored.selected);
    state_.omega_history = std::move(restored.omega_history);
    state_.residual_history = std::move(restored.residual_history);
    state_.below_tau1 = restored.below_tau1;
    state_.below_tau2 = restored.below_tau2;
    state_.sampling_rng = restored.sampling_rng;
    state_.gp_rng = restored.gp_rng;
    state_.history = std::move(restored.history);
    state_.finished = restored.finished;
    state_.stop_reason = std::move(restored.stop_reason);
    state_.gp_train_count = restored.gp_train_count;
    const double restored_nugget = restored.gp_nugget;

    for (const auto& s : state_.selected) {
        if (s.item < 0 || s.item >= problem_.size()) throw FormatError("checkpoint item out of range");
    }
    if (!state_.selected.empty()) {
        state_.shape_acc.add(selected_latents());
        if (standardized_reference_.size() > 0) {
            Eigen::MatrixXd p = selected_properties();
            p = (p.rowwise() - property_stats_.mean).array().rowwise() / property_stats_.std.array();
            state_.property_acc.add(p);
        }
    }
    if (state_.gp_train_count > 0) {
        if (state_.omega_history.empty() || state_.gp_train_count > static_cast<int>(state_.selected.size())) {
            throw FormatError("checkpoint GP state is inconsistent");
        }
        const Eigen::MatrixXd z = selected_latents().topRows(state_.gp_train_count);
        const Eigen::MatrixXd p = selected_properties().topRows(state_.gp_train_count);
        const std::vector<int> keep = dedupe_rows(z, config_.gp.dedupe_tol);
        Eigen::MatrixXd zu(static_cast<Eigen::Index>(keep.size()), z.cols());
        Eigen::MatrixXd pu(static_cast<Eigen::Index>(keep.size()), p.cols());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            zu.row(static_cast<Eigen::Index>(i)) = z.row(keep[i]);
            pu.row(static_cast<Eigen::Index>(i)) = p.row(keep[i]);
        }
        state_.gp = assemble_model(zu, pu, state_.omega_history.back(), config_.gp,
                                   restored_nugget > 0 ? std::optional<double>(restored_nugget) : std::nullopt);
        state_.gp->train_rows = keep;
    }
}

Eigen::MatrixXd Acquisition::selected_properties() const {
    Eigen::MatrixXd p(static_cast<Eigen::Index>(state_.selected.size()), 3);
    for (std::size_t i = 0; i < state_.selected.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = response_row(state_.selected[i].props);
    return p;
}

Eigen::MatrixXd Acquisition::selected_latents() const {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(state_.selected.size()), problem_.latents.cols());
    for (std::size_t i = 0; i < state_.selected.size(); ++i) z.row(static_cast<Eigen::Index>(i)) = problem_.latents.row(state_.selected[i].item);
    return z;
}

std::vector<int> Acquisition::selected_items() const {
    std::vector<int> out;
    out.reserve(state_.selected.size());
    for (const auto& s : state_.selected) out.push_back(s.item);
    return out;
}

Eigen::VectorXd Acquisition::selected_quality() const {
    const auto n = static_cast<Eigen::Index>(state_.selected.size());
    Eigen::VectorXd c11(n), c22(n), vf(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = state_.selected[static_cast<std::size_t>(i)];
        c11(i) = s.props.C11;
        c22(i) = s.props.C22;
        vf(i) = problem_.vf(s.item);
    }
    return quality_index(config_.quality, c11, c22, vf);
}

}  // namespace dpacq
