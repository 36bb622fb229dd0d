#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ekdaa/layers.hpp"
#include "ekdaa/optimizer.hpp"

namespace ekdaa {

// Binary checkpoint: magic "EKDA", format version, an architecture
// descriptor, raw RNG seed/counter words, then a tensor table of
// (name length, name, rank, dims) entries with little-endian float32
// payloads. Holds every W, E, bias and velocity buffer.
struct Checkpoint {
    Network<float> network;
    OptimState<float> optim;
    std::vector<std::uint64_t> rng_words;  // [seed, completed epochs]
};

void save_checkpoint(const Network<float>& net, const OptimState<float>& optim,
                     const std::vector<std::uint64_t>& rng_words, const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

// Human-readable header + tensor table, for the inspect-checkpoint verb.
std::string inspect_checkpoint(const std::string& path);

}  // namespace ekdaa
