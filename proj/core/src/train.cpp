#include "ekdaa/train.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ekdaa/checkpoint.hpp"
#include "ekdaa/credit_rules.hpp"
#include "ekdaa/errors.hpp"
#include "ekdaa/optimizer.hpp"
#include "ekdaa/rng.hpp"

namespace ekdaa {

namespace {

// Samples are processed in fixed-size chunks: each chunk accumulates its
// updates in sample order and chunks are reduced in chunk order, so results
// do not depend on how many threads ran.
constexpr std::size_t kChunk = 8;

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct RuleContext {
    Rule rule;
    RuleParams<float> params;
    FaFeedback<float> fa;
    DfaProjections<float> dfa;
};

void sample_updates_acc(const Network<float>& net, const LayerTrace<float>& tr,
                        const Vector<float>& y, const RuleContext& ctx, UpdateSet<float>& acc) {
    switch (ctx.rule) {
        case Rule::Ekdaa: ekdaa_updates_acc(net, tr, y, ctx.params, acc); return;
        case Rule::Backprop: backprop_updates_acc(net, tr, y, acc); return;
        case Rule::Fa: fa_updates_acc(net, tr, y, ctx.fa, acc); return;
        case Rule::Dfa: dfa_updates_acc(net, tr, y, ctx.dfa, acc); return;
    }
    throw UnsupportedRuleError("unknown rule");
}

}  // namespace

Dataset load_train_dataset(const RunConfig& cfg) {
    Dataset d;
    if (cfg.dataset_name == "synth") {
        d = synth_blobs(cfg.seed, cfg.synth_train, cfg.synth_classes, cfg.synth_size);
    } else if (cfg.dataset_name == "cifar10") {
        d = load_cifar10(cfg.train_batches);
    } else {
        d = load_idx(cfg.train_images, cfg.train_labels);
    }
    if (cfg.subset_train > 0) d = subset(d, cfg.seed, cfg.subset_train);
    return d;
}

Dataset load_test_dataset(const RunConfig& cfg) {
    Dataset d;
    if (cfg.dataset_name == "synth") {
        // Disjoint seed stream from the train split.
        d = synth_blobs(mix_seed(cfg.seed, 0x7e57), cfg.synth_test, cfg.synth_classes,
                        cfg.synth_size);
    } else if (cfg.dataset_name == "cifar10") {
        d = load_cifar10(cfg.test_batches);
    } else {
        d = load_idx(cfg.test_images, cfg.test_labels);
    }
    if (cfg.subset_test > 0) d = subset(d, mix_seed(cfg.seed, 0x7e57), cfg.subset_test);
    return d;
}

std::string resolve_output_dir(const RunConfig& cfg) {
    std::filesystem::path p(cfg.output_dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("EKDAA_OUTPUT_ROOT")) p = std::filesystem::path(root) / p;
    }
    return p.string();
}

std::pair<double, double> evaluate(const Network<float>& net, const Dataset& data) {
    const std::size_t n = data.size();
    if (n == 0) return {0.0, 0.0};
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> loss(chunks, 0.0);
    std::vector<std::size_t> correct(chunks, 0);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t end = std::min(n, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
            const auto tr = infer(net, data.samples[i]);
            loss[c] += cross_entropy(tr.head_post, data.labels[i]);
            int best = 0;
            for (std::size_t k = 1; k < tr.head_post.size(); ++k)
                if (tr.head_post[k] > tr.head_post[best]) best = static_cast<int>(k);
            if (best == data.labels[i]) ++correct[c];
        }
    }
    double total_loss = 0;
    std::size_t total_correct = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        total_loss += loss[c];
        total_correct += correct[c];
    }
    return {total_loss / static_cast<double>(n),
            100.0 * static_cast<double>(total_correct) / static_cast<double>(n)};
}

std::string format_metrics_row(const MetricsRow& row) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f", row.epoch, row.split.c_str(),
                  row.loss, row.accuracy, row.seconds);
    return buf;
}

TrainResult run_training(const RunConfig& cfg, const std::string& resume_path, std::ostream* log) {
    validate(cfg);
    const Dataset train = load_train_dataset(cfg);
    const Dataset test = load_test_dataset(cfg);
    if (train.size() == 0) throw FormatError("run_training: empty training set");
    if (cfg.batch_size > train.size())
        throw FormatError("run_training: batch_size exceeds training-set size");

    Network<float> net;
    OptimState<float> optim;
    int start_epoch = 0;  // completed epochs
    if (!resume_path.empty()) {
        Checkpoint ck = load_checkpoint(resume_path);
        net = std::move(ck.network);
        optim = std::move(ck.optim);
        if (ck.rng_words.size() >= 2) {
            if (ck.rng_words[0] != cfg.seed)
                throw FormatError("run_training: checkpoint seed " + std::to_string(ck.rng_words[0]) +
                                  " != config seed " + std::to_string(cfg.seed));
            start_epoch = static_cast<int>(ck.rng_words[1]);
        }
    } else {
        net = build_network(cfg);
        optim = OptimState<float>::init(net, cfg.learning_rate, cfg.momentum, cfg.clip_threshold);
    }

    RuleContext ctx{cfg.rule, {cfg.beta, cfg.gamma}, {}, {}};
    // Feedback/projection seeds are derived from the run seed only, so a
    // resumed run rebuilds identical frozen tensors.
    if (cfg.rule == Rule::Fa) ctx.fa = make_fa_feedback(net, cfg.seed);
    if (cfg.rule == Rule::Dfa) ctx.dfa = make_dfa_projections(net, cfg.seed);

    const std::string out_dir = resolve_output_dir(cfg);
    std::filesystem::create_directories(out_dir);
    TrainResult result;
    result.metrics_path = (std::filesystem::path(out_dir) / "metrics.csv").string();
    result.checkpoint_path = (std::filesystem::path(out_dir) / "checkpoint.ekda").string();

    std::ofstream csv(result.metrics_path,
                      resume_path.empty() ? std::ios::trunc : std::ios::app);
    if (!csv) throw FormatError("run_training: cannot write " + result.metrics_path);
    if (resume_path.empty()) csv << "epoch,split,loss,accuracy,seconds\n";

    auto emit = [&](int epoch, const std::string& split, double loss, double acc, double secs) {
        MetricsRow row{epoch, split, loss, acc, cfg.record_timing ? secs : 0.0};
        csv << format_metrics_row(row) << "\n";
        csv.flush();
        result.metrics.push_back(row);
        if (log)
            *log << "epoch " << epoch << " " << split << ": loss=" << loss << " acc=" << acc
                 << "%\n";
    };

    if (start_epoch == 0) {
        const double t0 = now_seconds();
        auto [ltr, atr] = evaluate(net, train);
        auto [lte, ate] = evaluate(net, test);
        const double dt = now_seconds() - t0;
        emit(0, "train", ltr, atr, dt);
        emit(0, "test", lte, ate, dt);
    }

    const BatchPlan plan{cfg.seed, cfg.batch_size};
    for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        const double t0 = now_seconds();
        int batch_index = 0;
        for (const auto& batch : batches(train.size(), plan, epoch)) {
            const std::size_t bs = batch.size();
            const std::size_t chunks = (bs + kChunk - 1) / kChunk;
            std::vector<UpdateSet<float>> acc(
                chunks, UpdateSet<float>::zeros_like(net, cfg.rule == Rule::Ekdaa));
            std::string failure;
#pragma omp parallel for schedule(dynamic)
            for (std::size_t c = 0; c < chunks; ++c) {
                try {
                    const std::size_t end = std::min(bs, (c + 1) * kChunk);
                    for (std::size_t i = c * kChunk; i < end; ++i) {
                        const std::size_t s = batch[i];
                        DropoutSampler<float> drop(
                            mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch), s));
                        const bool use_drop = net.dropout_conv > 0 || net.dropout_dense > 0;
                        const auto tr = infer(net, train.samples[s], use_drop ? &drop : nullptr);
                        const auto y = one_hot<float>(train.labels[s], train.class_count);
                        sample_updates_acc(net, tr, y, ctx, acc[c]);
                    }
                } catch (const std::exception& e) {
#pragma omp critical
                    if (failure.empty()) failure = e.what();
                }
            }
            if (!failure.empty())
                throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(batch_index) + ": " + failure);
            UpdateSet<float> total = std::move(acc[0]);
            for (std::size_t c = 1; c < chunks; ++c) total.add(acc[c]);
            total.scale(1.0f / static_cast<float>(bs));
            total.check_finite();
            step(net, total, optim);
            ++batch_index;
        }

        auto [ltr, atr] = evaluate(net, train);
        auto [lte, ate] = evaluate(net, test);
        const double dt = now_seconds() - t0;
        emit(epoch, "train", ltr, atr, dt);
        emit(epoch, "test", lte, ate, dt);

        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch < cfg.epochs) {
            const auto path = (std::filesystem::path(out_dir) /
                               ("checkpoint_epoch" + std::to_string(epoch) + ".ekda"))
                                  .string();
            save_checkpoint(net, optim, {cfg.seed, static_cast<std::uint64_t>(epoch)}, path);
        }
    }

    save_checkpoint(net, optim, {cfg.seed, static_cast<std::uint64_t>(cfg.epochs)},
                    result.checkpoint_path);

    if (log) {
        *log << "done: rule=" << to_string(cfg.rule) << " epochs=" << cfg.epochs;
        if (!result.metrics.empty()) {
            const auto& last = result.metrics.back();
            *log << " final " << last.split << " acc=" << last.accuracy << "%";
        }
        *log << "\n";
    }
    return result;
}

void export_embeddings(const Network<float>& net, const Dataset& data, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw FormatError("export_embeddings: cannot write " + path);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto tr = infer(net, data.samples[i]);
        const Vector<float>& emb =
            !tr.dense.empty() ? tr.dense.back().post
                              : flatten(tr.conv.empty() ? tr.input : tr.conv.back().post);
        f << data.labels[i];
        char buf[32];
        for (float v : emb) {
            std::snprintf(buf, sizeof(buf), ",%.6f", static_cast<double>(v));
            f << buf;
        }
        f << "\n";
    }
    if (!f) throw FormatError("export_embeddings: write failed for " + path);
}

}  // namespace ekdaa
