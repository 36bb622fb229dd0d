#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ekdaa/tensor.hpp"

namespace ekdaa {

struct Dataset {
    std::vector<FeatureStack<float>> samples;
    std::vector<int> labels;
    int class_count = 0;
    std::string name;

    std::size_t size() const { return samples.size(); }
};

// IDX images + labels (raw or gzip). Pixels scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 channel-planar
// pixels. Pixels scaled to [0,1].
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Seeded synthetic dataset: class-dependent oriented bar patterns plus noise.
// Single channel, size x size. Conv-separable by construction.
Dataset synth_blobs(std::uint64_t seed, int n, int classes, int size);

// Keeps the first `n` samples after a seeded shuffle.
Dataset subset(const Dataset& d, std::uint64_t seed, std::size_t n);

// Deterministic batching: (seed, epoch) fully determines the permutation.
struct BatchPlan {
    std::uint64_t seed = 0;
    std::size_t batch_size = 0;
};

// Ordered batches of sample indices for one epoch; the final short batch is
// kept.
std::vector<std::vector<std::size_t>> batches(std::size_t n, const BatchPlan& plan, int epoch);

// Writers for the on-disk formats, used for fixtures and round-trip tests.
void write_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path);
void write_cifar10(const Dataset& d, const std::string& path);

}  // namespace ekdaa
