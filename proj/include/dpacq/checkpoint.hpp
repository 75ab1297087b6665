#pragma once

#include <filesystem>
#include <string>

#include "dpacq/acquire.hpp"

namespace dpacq {

// Persisted portion of an acquisition run. Features, accumulators and the GP
// factorization are rebuilt by Acquisition::restore.
struct Checkpoint {
    std::string fingerprint;  // resolved configuration the state belongs to
    AcquisitionState state;
};

std::string checkpoint_to_string(const Checkpoint& cp);
Checkpoint checkpoint_from_string(const std::string& text);

// Written to a temporary file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dpacq
