// Command-line front end: train/eval networks from a run-config file, export
// embeddings, run the verification suite, and inspect checkpoints.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "ekdaa/checkpoint.hpp"
#include "ekdaa/config.hpp"
#include "ekdaa/train.hpp"
#include "ekdaa/verify.hpp"

namespace {

ekdaa::RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    ekdaa::RunConfig cfg = ekdaa::parse_config(path);
    for (const auto& o : overrides) ekdaa::apply_override(cfg, o);
    return cfg;
}

int run_verify(std::uint64_t seed, int samples, int trials, const std::string& out_dir) {
    using namespace ekdaa;
    bool all_pass = true;

    // Toy differentiable net for the finite-difference check.
    RunConfig toy;
    toy.dataset_name = "synth";
    toy.input_channels = 1;
    toy.input_h = 8;
    toy.input_w = 8;
    toy.layers = parse_layers("conv 4 3 pool; conv 8 3 pool; dense 16; softmax 10");
    toy.activation = Activation::Tanh;
    toy.seed = seed;
    Network<double> toy_net = build_network(toy).cast<double>();
    Dataset toy_data = synth_blobs(seed, 1, 10, 8);
    FeatureStack<double> sample(1, 8, 8);
    for (std::size_t i = 0; i < sample.size(); ++i)
        sample.data[i] = static_cast<double>(toy_data.samples[0].data[i]);

    const auto grad = verify::finite_diff_check(toy_net, sample, toy_data.labels[0]);
    std::cout << verify::summary(grad) << "\n";
    all_pass = all_pass && grad.pass;

    const auto ident = verify::conv_identity_check(trials, seed);
    std::cout << verify::summary(ident, "conv identity check") << "\n";
    all_pass = all_pass && ident.pass();

    const auto adj = verify::adjointness_check(trials, seed);
    std::cout << verify::summary(adj, "adjointness check") << "\n";
    all_pass = all_pass && adj.pass();

    // Angle survey on the 28x28 three-conv architecture with tanh.
    RunConfig arch;
    arch.input_channels = 1;
    arch.input_h = 28;
    arch.input_w = 28;
    arch.layers = parse_layers("conv 32 3 pool; conv 64 3 pool; conv 128 3; dense 128; softmax 10");
    arch.activation = Activation::Tanh;
    arch.seed = seed;
    Network<double> net = build_network(arch).cast<double>();
    Dataset data = synth_blobs(mix_seed(seed, 2), samples, 10, 28);
    std::vector<FeatureStack<double>> dsamples;
    for (const auto& s : data.samples) {
        FeatureStack<double> d(s.channels, s.height, s.width);
        for (std::size_t i = 0; i < s.size(); ++i) d.data[i] = static_cast<double>(s.data[i]);
        dsamples.push_back(std::move(d));
    }
    const auto angles = verify::angle_survey(net, dsamples, data.labels, RuleParams<double>{});
    std::cout << verify::summary(angles);
    for (const auto& row : angles.rows) all_pass = all_pass && row.mean_deg < 90.0;

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "gradcheck.csv") << verify::to_csv(grad);
        std::ofstream(std::filesystem::path(out_dir) / "angles.csv") << verify::to_csv(angles);
        std::cout << "reports written to " << out_dir << "\n";
    }
    std::cout << (all_pass ? "verify: PASS" : "verify: FAIL") << "\n";
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EKDAA training engine"};
    app.require_subcommand(1);

    std::string config_path, resume_path, checkpoint_path, out_path, split = "test", out_dir;
    std::vector<std::string> overrides;
    std::uint64_t seed = 1;
    int samples = 100, trials = 100;

    auto* train = app.add_subcommand("train", "Train a network from a run config");
    train->add_option("--config", config_path, "Run config file")->required();
    train->add_option("--set", overrides, "Override a config value (section.key=value)");
    train->add_option("--resume", resume_path, "Resume from a checkpoint");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a config's dataset");
    eval->add_option("--config", config_path, "Run config file (dataset section)")->required();
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint to evaluate")->required();
    eval->add_option("--set", overrides, "Override a config value");
    eval->add_option("--split", split, "Split to evaluate: train|test|both");

    auto* exp = app.add_subcommand("export-embeddings",
                                   "Write label + final hidden activation per sample as CSV");
    exp->add_option("--config", config_path, "Run config file (dataset section)")->required();
    exp->add_option("--checkpoint", checkpoint_path, "Checkpoint to load")->required();
    exp->add_option("--set", overrides, "Override a config value");
    exp->add_option("--split", split, "Split to export: train|test");
    exp->add_option("--out", out_path, "Output CSV path")->required();

    auto* verify_cmd = app.add_subcommand("verify", "Run gradient/identity/angle verification");
    verify_cmd->add_option("--seed", seed, "RNG seed");
    verify_cmd->add_option("--samples", samples, "Samples for the angle survey");
    verify_cmd->add_option("--trials", trials, "Trials for identity/adjointness checks");
    verify_cmd->add_option("--out", out_dir, "Directory for CSV reports");

    auto* inspect = app.add_subcommand("inspect-checkpoint", "Print a checkpoint's tensor table");
    inspect->add_option("path", checkpoint_path, "Checkpoint file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            auto cfg = load_config(config_path, overrides);
            const auto result = ekdaa::run_training(cfg, resume_path, &std::cout);
            std::cout << "metrics: " << result.metrics_path << "\n";
            std::cout << "checkpoint: " << result.checkpoint_path << "\n";
        } else if (eval->parsed()) {
            auto cfg = load_config(config_path, overrides);
            ekdaa::validate(cfg);
            const auto ck = ekdaa::load_checkpoint(checkpoint_path);
            if (split == "train" || split == "both") {
                const auto data = ekdaa::load_train_dataset(cfg);
                auto [loss, acc] = ekdaa::evaluate(ck.network, data);
                std::cout << "train: loss=" << loss << " acc=" << acc << "%\n";
            }
            if (split == "test" || split == "both") {
                const auto data = ekdaa::load_test_dataset(cfg);
                auto [loss, acc] = ekdaa::evaluate(ck.network, data);
                std::cout << "test: loss=" << loss << " acc=" << acc << "%\n";
            }
        } else if (exp->parsed()) {
            auto cfg = load_config(config_path, overrides);
            ekdaa::validate(cfg);
            const auto ck = ekdaa::load_checkpoint(checkpoint_path);
            const auto data = split == "train" ? ekdaa::load_train_dataset(cfg)
                                               : ekdaa::load_test_dataset(cfg);
            ekdaa::export_embeddings(ck.network, data, out_path);
            std::cout << "wrote " << data.size() << " rows to " << out_path << "\n";
        } else if (verify_cmd->parsed()) {
            return run_verify(seed, samples, trials, out_dir);
        } else if (inspect->parsed()) {
            std::cout << ekdaa::inspect_checkpoint(checkpoint_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
