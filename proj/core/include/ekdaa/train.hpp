#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ekdaa/config.hpp"
#include "ekdaa/data.hpp"
#include "ekdaa/layers.hpp"

namespace ekdaa {

struct MetricsRow {
    int epoch = 0;
    std::string split;  // "train" | "test"
    double loss = 0;
    double accuracy = 0;  // percent
    double seconds = 0;
};

struct TrainResult {
    std::vector<MetricsRow> metrics;
    std::string metrics_path;
    std::string checkpoint_path;
};

Dataset load_train_dataset(const RunConfig& cfg);
Dataset load_test_dataset(const RunConfig& cfg);

// Relative output dirs are rooted at $EKDAA_OUTPUT_ROOT when set.
std::string resolve_output_dir(const RunConfig& cfg);

// Mean cross-entropy and accuracy (%) over a dataset.
std::pair<double, double> evaluate(const Network<float>& net, const Dataset& data);

// Full train/eval loop. Writes metrics.csv and a final checkpoint under the
// config's output directory; `resume_path` continues from a saved checkpoint.
TrainResult run_training(const RunConfig& cfg, const std::string& resume_path = "",
                         std::ostream* log = nullptr);

// One CSV row per sample: label followed by the final hidden-layer
// activation vector.
void export_embeddings(const Network<float>& net, const Dataset& data, const std::string& path);

std::string format_metrics_row(const MetricsRow& row);

}  // namespace ekdaa
