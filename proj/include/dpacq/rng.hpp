#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace dpacq {

using Engine = std::mt19937_64;

// Seed for a named subsystem stream ("corpus", "sampling", "gp", "metrics", ...).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

inline Engine make_stream(std::uint64_t master, std::string_view label) {
    return Engine(derive_seed(master, label));
}

// Text round-trip of the full engine state, used by checkpoints.
std::string save_engine(const Engine& engine);
void load_engine(Engine& engine, const std::string& state);

}  // namespace dpacq
