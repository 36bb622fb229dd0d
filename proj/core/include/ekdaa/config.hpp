#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ekdaa/credit_rules.hpp"
#include "ekdaa/layers.hpp"

namespace ekdaa {

struct LayerSpec {
    enum class Kind { Conv, Dense, Softmax } kind;
    int units = 0;        // filters / units / classes
    int kernel = 0;       // conv only
    bool pool = false;    // conv only
};

// Declarative experiment description. Parsed from a flat key-value file with
// [section] headers; unknown keys are hard errors so sweep typos surface
// immediately.
struct RunConfig {
    // [dataset]
    std::string dataset_name = "synth";  // synth | idx | fmnist | cifar10
    std::string train_images, train_labels, test_images, test_labels;
    std::vector<std::string> train_batches, test_batches;  // cifar10
    int synth_train = 2000, synth_test = 500, synth_classes = 10, synth_size = 28;
    std::size_t subset_train = 0, subset_test = 0;  // 0 = full split

    // [network]
    int input_channels = 1, input_h = 28, input_w = 28;
    std::vector<LayerSpec> layers;
    Activation activation = Activation::Tanh;
    bool bias = true;
    float dropout_conv = 0.0f, dropout_dense = 0.0f;

    // [training]
    Rule rule = Rule::Ekdaa;
    float beta = 0.1f, gamma = 1.0f;
    float learning_rate = 5e-4f, momentum = 0.9f, clip_threshold = 5.0f;
    std::size_t batch_size = 50;
    int epochs = 5;
    std::uint64_t seed = 1;
    int checkpoint_every = 0;       // epochs; 0 = only at end
    bool record_timing = true;      // false writes 0.000000 seconds for byte-stable CSVs

    // [output]
    std::string output_dir = "runs/out";
};

RunConfig parse_config(const std::string& path);

// Applies one "section.key=value" override on top of file values.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Consistency checks (rule/activation compatibility, ranges, referenced
// files). Throws FormatError with the offending key.
void validate(const RunConfig& cfg);

// Builds the network (seeded Glorot init on W and E) described by the config.
Network<float> build_network(const RunConfig& cfg);

Activation parse_activation(const std::string& s);
Rule parse_rule(const std::string& s);
std::vector<LayerSpec> parse_layers(const std::string& s);

}  // namespace ekdaa
