#include "ekdaa/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ekdaa/errors.hpp"
#include "ekdaa/rng.hpp"

namespace ekdaa {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw FormatError("config: bad boolean for " + key + ": '" + v + "'");
}

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
    std::stringstream ss(v);
    T out;
    ss >> out;
    if (ss.fail() || !trim(v.substr(static_cast<std::size_t>(ss.tellg()) == std::string::npos
                                        ? v.size()
                                        : static_cast<std::size_t>(ss.tellg()))).empty())
        throw FormatError("config: bad numeric value for " + key + ": '" + v + "'");
    return out;
}

void set_key(RunConfig& c, const std::string& section, const std::string& key,
             const std::string& value) {
    const std::string full = section + "." + key;
    if (section == "dataset") {
        if (key == "name") c.dataset_name = value;
        else if (key == "train_images") c.train_images = value;
        else if (key == "train_labels") c.train_labels = value;
        else if (key == "test_images") c.test_images = value;
        else if (key == "test_labels") c.test_labels = value;
        else if (key == "train_batches") c.train_batches = split(value, ',');
        else if (key == "test_batches") c.test_batches = split(value, ',');
        else if (key == "synth_train") c.synth_train = parse_num<int>(value, full);
        else if (key == "synth_test") c.synth_test = parse_num<int>(value, full);
        else if (key == "synth_classes") c.synth_classes = parse_num<int>(value, full);
        else if (key == "synth_size") c.synth_size = parse_num<int>(value, full);
        else if (key == "subset_train") c.subset_train = parse_num<std::size_t>(value, full);
        else if (key == "subset_test") c.subset_test = parse_num<std::size_t>(value, full);
        else throw FormatError("config: unknown key " + full);
    } else if (section == "network") {
        if (key == "input") {
            auto parts = split(value, 'x');
            if (parts.size() != 3) throw FormatError("config: network.input must be CxHxW");
            c.input_channels = parse_num<int>(parts[0], full);
            c.input_h = parse_num<int>(parts[1], full);
            c.input_w = parse_num<int>(parts[2], full);
        } else if (key == "layers") c.layers = parse_layers(value);
        else if (key == "activation") c.activation = parse_activation(value);
        else if (key == "bias") c.bias = parse_bool(value, full);
        else if (key == "dropout_conv") c.dropout_conv = parse_num<float>(value, full);
        else if (key == "dropout_dense") c.dropout_dense = parse_num<float>(value, full);
        else throw FormatError("config: unknown key " + full);
    } else if (section == "training") {
        if (key == "rule") c.rule = parse_rule(value);
        else if (key == "beta") c.beta = parse_num<float>(value, full);
        else if (key == "gamma") c.gamma = parse_num<float>(value, full);
        else if (key == "learning_rate") c.learning_rate = parse_num<float>(value, full);
        else if (key == "momentum") c.momentum = parse_num<float>(value, full);
        else if (key == "clip_threshold") c.clip_threshold = parse_num<float>(value, full);
        else if (key == "batch_size") c.batch_size = parse_num<std::size_t>(value, full);
        else if (key == "epochs") c.epochs = parse_num<int>(value, full);
        else if (key == "seed") c.seed = parse_num<std::uint64_t>(value, full);
        else if (key == "checkpoint_every") c.checkpoint_every = parse_num<int>(value, full);
        else if (key == "record_timing") c.record_timing = parse_bool(value, full);
        else throw FormatError("config: unknown key " + full);
    } else if (section == "output") {
        if (key == "dir") c.output_dir = value;
        else throw FormatError("config: unknown key " + full);
    } else {
        throw FormatError("config: unknown section [" + section + "]");
    }
}

}  // namespace

Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "signum") return Activation::Signum;
    throw FormatError("config: unknown activation '" + s + "'");
}

Rule parse_rule(const std::string& s) {
    if (s == "ekdaa") return Rule::Ekdaa;
    if (s == "bp") return Rule::Backprop;
    if (s == "fa") return Rule::Fa;
    if (s == "dfa") return Rule::Dfa;
    throw FormatError("config: unknown rule '" + s + "'");
}

// "conv 32 3 pool; conv 64 3; dense 128; softmax 10"
std::vector<LayerSpec> parse_layers(const std::string& s) {
    std::vector<LayerSpec> out;
    for (const auto& item : split(s, ';')) {
        auto tok = split(item, ' ');
        if (tok.empty()) continue;
        LayerSpec l{};
        if (tok[0] == "conv") {
            if (tok.size() < 3 || tok.size() > 4)
                throw FormatError("config: conv layer needs '<filters> <kernel> [pool]': '" + item + "'");
            l.kind = LayerSpec::Kind::Conv;
            l.units = parse_num<int>(tok[1], "network.layers conv filters");
            l.kernel = parse_num<int>(tok[2], "network.layers conv kernel");
            if (tok.size() == 4) {
                if (tok[3] != "pool")
                    throw FormatError("config: unexpected conv modifier '" + tok[3] + "'");
                l.pool = true;
            }
        } else if (tok[0] == "dense") {
            if (tok.size() != 2) throw FormatError("config: dense layer needs '<units>': '" + item + "'");
            l.kind = LayerSpec::Kind::Dense;
            l.units = parse_num<int>(tok[1], "network.layers dense units");
        } else if (tok[0] == "softmax") {
            if (tok.size() != 2) throw FormatError("config: softmax needs '<classes>': '" + item + "'");
            l.kind = LayerSpec::Kind::Softmax;
            l.units = parse_num<int>(tok[1], "network.layers softmax classes");
        } else {
            throw FormatError("config: unknown layer kind '" + tok[0] + "'");
        }
        out.push_back(l);
    }
    return out;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open config file " + path);
    RunConfig c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw FormatError(path + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected key = value");
        if (section.empty())
            throw FormatError(path + ":" + std::to_string(lineno) + ": key outside any section");
        set_key(c, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw FormatError("override must be section.key=value: '" + assignment + "'");
    const std::string lhs = trim(assignment.substr(0, eq));
    const auto dot = lhs.find('.');
    if (dot == std::string::npos)
        throw FormatError("override must be section.key=value: '" + assignment + "'");
    set_key(cfg, lhs.substr(0, dot), lhs.substr(dot + 1), trim(assignment.substr(eq + 1)));
}

void validate(const RunConfig& cfg) {
    if (cfg.layers.empty()) throw FormatError("config: network.layers is empty");
    if (cfg.layers.back().kind != LayerSpec::Kind::Softmax)
        throw FormatError("config: last layer must be a softmax head");
    bool seen_dense = false, seen_softmax = false;
    for (const auto& l : cfg.layers) {
        if (seen_softmax) throw FormatError("config: layers after the softmax head");
        switch (l.kind) {
            case LayerSpec::Kind::Conv:
                if (seen_dense) throw FormatError("config: conv layer after a dense layer");
                if (l.kernel % 2 == 0 || l.kernel < 1)
                    throw FormatError("config: conv kernel must be odd and positive");
                if (l.units < 1) throw FormatError("config: conv filters must be positive");
                break;
            case LayerSpec::Kind::Dense:
                seen_dense = true;
                if (l.units < 1) throw FormatError("config: dense units must be positive");
                break;
            case LayerSpec::Kind::Softmax:
                seen_softmax = true;
                if (l.units < 2) throw FormatError("config: need at least 2 classes");
                break;
        }
    }
    if ((cfg.rule == Rule::Backprop || cfg.rule == Rule::Fa || cfg.rule == Rule::Dfa) &&
        cfg.activation == Activation::Signum)
        throw FormatError("config: rule '" + to_string(cfg.rule) +
                          "' requires a differentiable activation, got signum");
    if (cfg.beta <= 0) throw FormatError("config: training.beta must be > 0");
    if (cfg.gamma < 0) throw FormatError("config: training.gamma must be >= 0");
    if (cfg.learning_rate <= 0) throw FormatError("config: training.learning_rate must be > 0");
    if (cfg.momentum < 0 || cfg.momentum >= 1)
        throw FormatError("config: training.momentum must be in [0,1)");
    if (cfg.clip_threshold <= 0) throw FormatError("config: training.clip_threshold must be > 0");
    if (cfg.batch_size == 0) throw FormatError("config: training.batch_size must be > 0");
    if (cfg.epochs < 0) throw FormatError("config: training.epochs must be >= 0");
    if (cfg.dropout_conv < 0 || cfg.dropout_conv >= 1 || cfg.dropout_dense < 0 ||
        cfg.dropout_dense >= 1)
        throw FormatError("config: dropout rates must be in [0,1)");

    auto must_exist = [](const std::string& p, const std::string& key) {
        if (p.empty()) throw FormatError("config: dataset." + key + " is required");
        std::ifstream f(p);
        if (!f) throw FormatError("config: dataset." + key + " file not found: " + p);
    };
    if (cfg.dataset_name == "idx" || cfg.dataset_name == "fmnist") {
        must_exist(cfg.train_images, "train_images");
        must_exist(cfg.train_labels, "train_labels");
        must_exist(cfg.test_images, "test_images");
        must_exist(cfg.test_labels, "test_labels");
    } else if (cfg.dataset_name == "cifar10") {
        if (cfg.train_batches.empty() || cfg.test_batches.empty())
            throw FormatError("config: cifar10 needs dataset.train_batches and dataset.test_batches");
        for (const auto& p : cfg.train_batches) must_exist(p, "train_batches");
        for (const auto& p : cfg.test_batches) must_exist(p, "test_batches");
    } else if (cfg.dataset_name != "synth") {
        throw FormatError("config: unknown dataset '" + cfg.dataset_name + "'");
    }
}

Network<float> build_network(const RunConfig& cfg) {
    Network<float> net;
    net.input_channels = cfg.input_channels;
    net.input_h = cfg.input_h;
    net.input_w = cfg.input_w;
    net.dropout_conv = cfg.dropout_conv;
    net.dropout_dense = cfg.dropout_dense;

    int channels = cfg.input_channels;
    int h = cfg.input_h, w = cfg.input_w;
    int flat = 0;
    bool flattened = false;
    for (const auto& l : cfg.layers) {
        switch (l.kind) {
            case LayerSpec::Kind::Conv: {
                net.conv.emplace_back(l.units, channels, l.kernel, cfg.activation, l.pool, cfg.bias);
                channels = l.units;
                if (l.pool) {
                    if (h % 2 != 0 || w % 2 != 0)
                        throw FormatError("config: pooling an odd-sized map " +
                                          std::to_string(h) + "x" + std::to_string(w));
                    h /= 2;
                    w /= 2;
                }
                break;
            }
            case LayerSpec::Kind::Dense: {
                if (!flattened) { flat = channels * h * w; flattened = true; }
                net.dense.emplace_back(l.units, flat, cfg.activation, cfg.bias);
                flat = l.units;
                break;
            }
            case LayerSpec::Kind::Softmax: {
                if (!flattened) { flat = channels * h * w; flattened = true; }
                net.head = SoftmaxHead<float>(l.units, flat);
                break;
            }
        }
    }
    Rng rng(mix_seed(cfg.seed, 0x1417));
    init_glorot(net, rng);
    return net;
}

}  // namespace ekdaa
