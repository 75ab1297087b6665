#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dpacq/acquire.hpp"
#include "dpacq/homogenize.hpp"

namespace dpacq {

enum class CorpusSource { synthetic, pack, pgm };
enum class DescriptorSource { pca, import };

// Everything `dpacq run` needs. Parsed from a flat "key = value" file; '#' starts a comment.
struct RunConfig {
    CorpusSource corpus = CorpusSource::synthetic;
    int corpus_n = 5000;
    int resolution = 50;
    std::string corpus_path;

    DescriptorSource descriptor = DescriptorSource::pca;
    int latent_dim = 10;
    std::string latent_path;

    MaterialSpec material;
    AcquisitionConfig acq;

    // "evaluate" homogenizes the whole library once for property gains,
    // "none" disables property gains, anything else is a property CSV path.
    std::string reference_properties = "evaluate";

    std::string output_dir = "run";
    int checkpoint_every = 1;
    int threads = 1;

    void validate() const;
};

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every key with its effective value, in file syntax.
std::string resolved_config(const RunConfig& cfg);

// Resolved keys that influence results (excludes output location, threads, checkpoint cadence).
std::string run_fingerprint(const RunConfig& cfg);

}  // namespace dpacq
