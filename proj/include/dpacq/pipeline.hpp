#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpacq/acquire.hpp"
#include "dpacq/corpus.hpp"
#include "dpacq/descriptor.hpp"
#include "dpacq/run_config.hpp"

namespace dpacq {

ShapeLibrary load_corpus(const RunConfig& cfg);

// Standardized latents for every library shape (rows by shape id).
LatentMatrix build_latents(const RunConfig& cfg, const ShapeLibrary& library);

// Content hash of the library and material, used to validate cached reference properties.
std::string library_key(const ShapeLibrary& library, const MaterialSpec& mat);

// Reference properties for the eligible items, or empty when disabled.
// "evaluate" caches the homogenized library in <output_dir>/reference_properties.csv.
Eigen::MatrixXd reference_properties(const RunConfig& cfg, const ShapeLibrary& library, const std::vector<int>& items,
                                     std::vector<PropertyVector>* full = nullptr);

AcquisitionProblem make_problem(const ShapeLibrary& library, const LatentMatrix& latents,
                                const std::vector<int>& items, Eigen::MatrixXd reference);

void write_history(const std::filesystem::path& path, const std::vector<HistoryRow>& rows);

// "rank,id,C11,C12,C22,C33,q", rank 1-based in selection order.
void write_manifest(const std::filesystem::path& path, const Acquisition& acq);

struct RunOptions {
    bool resume = false;
    int stop_after = -1;  // pause once this many iterations have completed
};

struct RunSummary {
    bool finished = false;
    std::string stop_reason;
    int iterations = 0;
    int selected = 0;
    Stage final_stage = Stage::I;
    std::optional<int> stage2_iteration;  // first iteration run in stage II
    std::optional<int> stage3_iteration;
    std::filesystem::path history_path;
    std::filesystem::path manifest_path;
    std::filesystem::path checkpoint_path;
};

RunSummary run_pipeline(const RunConfig& cfg, const RunOptions& options = {});

}  // namespace dpacq
