#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpacq/dpp.hpp"
#include "dpacq/gp.hpp"
#include "dpacq/homogenize.hpp"
#include "dpacq/metrics.hpp"
#include "dpacq/quality.hpp"
#include "dpacq/rng.hpp"

namespace dpacq {

enum class Stage { I = 1, II = 2, III = 3 };
std::string to_string(Stage s);

struct AcquisitionConfig {
    int k = 10;
    double epsilon = 0.8;
    double tau1 = 0.02;
    double tau2 = 0.01;
    int i_tol = 5;
    int i_max = 500;
    Eigen::Index dv = 3000;
    int target_size = 3000;
    double shape_bandwidth = 1.0;
    bool shape_bandwidth_median = false;
    double property_bandwidth = 1.0;
    QualitySpec quality;
    std::uint64_t master_seed = 0;
    GpConfig gp;
    int refit_every = 1;    // Stage II refit cadence in iterations
    int n_rep = 30;         // iid replicates per gain
    bool track_gains = true;

    void validate() const;
};

struct AcquisitionProblem {
    Eigen::MatrixXd latents;              // n x D_z, item i = row i
    Eigen::VectorXd vf;                   // volume fraction per item
    std::vector<int> library_ids;         // shape id reported for item i
    Eigen::MatrixXd reference_properties; // n x 3 (C11, C12, C22) for property gains; may be empty

    Eigen::Index size() const { return latents.rows(); }
    void validate() const;
};

// Evaluates the listed items, in order.
using Evaluator = std::function<std::vector<PropertyVector>(const std::vector<int>& items)>;

struct SelectedItem {
    int item = 0;
    PropertyVector props;
    BatchTag tag = BatchTag::shape;
    int iteration = 0;
};

struct HistoryRow {
    int iter = 0;
    Stage stage = Stage::I;
    int n_selected = 0;
    double residual = std::numeric_limits<double>::quiet_NaN();
    double gain_shape = std::numeric_limits<double>::quiet_NaN();
    double gain_property = std::numeric_limits<double>::quiet_NaN();
    double gp_fit_seconds = 0;  // not persisted
};

struct AcquisitionState {
    Stage stage = Stage::I;
    int iteration = 0;
    std::vector<SelectedItem> selected;
    std::vector<Eigen::VectorXd> omega_history;
    std::vector<double> residual_history;
    int below_tau1 = 0;
    int below_tau2 = 0;
    LowRankFeature shape_feature;
    std::vector<std::vector<int>> shape_conditioning;  // every conditioning set applied, in order
    std::optional<GpModel> gp;
    int gp_train_count = 0;    // selected items the current model was fitted on
    double gp_nugget = 0;      // restore-only: nugget of the checkpointed model
    Engine sampling_rng;
    Engine gp_rng;
    std::vector<HistoryRow> history;
    PairDistanceAccumulator shape_acc;
    PairDistanceAccumulator property_acc;
    bool finished = false;
    std::string stop_reason;
};

struct PopulationStats {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd std;
};

class Acquisition {
public:
    Acquisition(AcquisitionProblem problem, AcquisitionConfig config, Evaluator evaluator);

    const AcquisitionConfig& config() const { return config_; }
    const AcquisitionProblem& problem() const { return problem_; }
    AcquisitionState& state() { return state_; }
    const AcquisitionState& state() const { return state_; }

    // Fresh state: shape feature built, stage I, nothing selected.
    void initialize();

    void step();
    void step_stage1();
    void step_stage2();
    void step_stage3();

    // Steps until finished; `after_step` runs after every iteration and may return false to pause.
    void run(const std::function<bool(const AcquisitionState&)>& after_step = {});

    // Rebuilds features, accumulators and the GP from the persisted parts of `restored`.
    void restore(AcquisitionState restored);

    // Property rows (C11, C12, C22) of the selected set, in selection order.
    Eigen::MatrixXd selected_properties() const;
    Eigen::MatrixXd selected_latents() const;
    std::vector<int> selected_items() const;

    // Raw quality index of each selected item from its evaluated properties (1 for none).
    Eigen::VectorXd selected_quality() const;

    double last_gp_fit_seconds() const { return last_fit_seconds_; }

private:
    int remaining() const;
    Batch draw(const LowRankFeature& feature, int k, BatchTag tag);
    void condition_shape(const std::vector<int>& items);
    void evaluate_and_append(const std::vector<Batch>& batches);
    double maybe_fit();
    void record_history(Stage stage, double residual);
    void property_step(bool update_gp);
    LowRankFeature build_property_feature();
    void finish_check();

    AcquisitionProblem problem_;
    AcquisitionConfig config_;
    Evaluator evaluator_;
    AcquisitionState state_;
    PopulationStats property_stats_;
    Eigen::MatrixXd standardized_reference_;
    double shape_bandwidth_ = 1.0;
    double last_fit_seconds_ = 0;
};

// Properties as the GP response rows (C11, C12, C22).
Eigen::RowVector3d response_row(const PropertyVector& p);

}  // namespace dpacq
