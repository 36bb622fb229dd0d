#include "ekdaa/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "ekdaa/config.hpp"
#include "ekdaa/errors.hpp"

namespace ekdaa {

namespace {

constexpr char kMagic[4] = {'E', 'K', 'D', 'A'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::uint32_t v, std::ostream& os) {
    const std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8),
                               std::uint8_t(v >> 16), std::uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::uint64_t v, std::ostream& os) {
    put_u32(static_cast<std::uint32_t>(v), os);
    put_u32(static_cast<std::uint32_t>(v >> 32), os);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    std::uint8_t b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw FormatError("checkpoint: truncated while reading " + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is, const std::string& what) {
    const std::uint64_t lo = get_u32(is, what);
    const std::uint64_t hi = get_u32(is, what);
    return lo | (hi << 32);
}

void put_tensor(const std::string& name, const std::vector<std::uint32_t>& dims,
                const std::vector<float>& data, std::ostream& os) {
    put_u32(static_cast<std::uint32_t>(name.size()), os);
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(static_cast<std::uint32_t>(dims.size()), os);
    std::size_t n = 1;
    for (auto d : dims) {
        put_u32(d, os);
        n *= d;
    }
    if (n != data.size())
        throw FormatError("checkpoint: tensor " + name + " dims do not match data length");
    for (float f : data) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(bits, os);
    }
}

struct RawTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

RawTensor get_tensor(std::istream& is) {
    RawTensor t;
    const std::uint32_t name_len = get_u32(is, "tensor name length");
    if (name_len > 4096) throw FormatError("checkpoint: implausible tensor name length");
    t.name.resize(name_len);
    if (!is.read(t.name.data(), name_len))
        throw FormatError("checkpoint: truncated tensor name");
    const std::uint32_t rank = get_u32(is, "tensor rank");
    if (rank > 4) throw FormatError("checkpoint: tensor " + t.name + " has rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        t.dims.push_back(get_u32(is, "tensor dims"));
        n *= t.dims.back();
    }
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32(is, "tensor " + t.name + " payload");
        std::memcpy(&t.data[i], &bits, 4);
    }
    return t;
}

std::string arch_descriptor(const Network<float>& net) {
    std::ostringstream ss;
    ss << "input=" << net.input_channels << "x" << net.input_h << "x" << net.input_w << "\n";
    ss << "layers=";
    bool first = true;
    Activation act = Activation::Tanh;
    bool bias = false;
    for (const auto& cl : net.conv) {
        if (!first) ss << "; ";
        ss << "conv " << cl.weights.out_channels << " " << cl.weights.kernel_h
           << (cl.has_pool ? " pool" : "");
        act = cl.activation;
        bias = !cl.bias.empty();
        first = false;
    }
    for (const auto& dl : net.dense) {
        if (!first) ss << "; ";
        ss << "dense " << dl.weights.rows;
        act = dl.activation;
        bias = !dl.bias.empty();
        first = false;
    }
    if (!first) ss << "; ";
    ss << "softmax " << net.head.weights.rows << "\n";
    ss << "activation=" << to_string(act) << "\n";
    ss << "bias=" << (bias ? "true" : "false") << "\n";
    ss << "dropout_conv=" << static_cast<double>(net.dropout_conv) << "\n";
    ss << "dropout_dense=" << static_cast<double>(net.dropout_dense) << "\n";
    return ss.str();
}

Network<float> network_from_descriptor(const std::string& desc) {
    int ic = 0, ih = 0, iw = 0;
    std::vector<LayerSpec> layers;
    Activation act = Activation::Tanh;
    bool bias = false;
    float dc = 0, dd = 0;
    std::istringstream ss(desc);
    std::string line;
    while (std::getline(ss, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "input") {
            if (std::sscanf(val.c_str(), "%dx%dx%d", &ic, &ih, &iw) != 3)
                throw FormatError("checkpoint: bad input descriptor '" + val + "'");
        } else if (key == "layers") layers = parse_layers(val);
        else if (key == "activation") act = parse_activation(val);
        else if (key == "bias") bias = (val == "true");
        else if (key == "dropout_conv") dc = std::stof(val);
        else if (key == "dropout_dense") dd = std::stof(val);
    }
    if (layers.empty() || ic == 0)
        throw FormatError("checkpoint: incomplete architecture descriptor");
    RunConfig cfg;
    cfg.input_channels = ic;
    cfg.input_h = ih;
    cfg.input_w = iw;
    cfg.layers = layers;
    cfg.activation = act;
    cfg.bias = bias;
    cfg.dropout_conv = dc;
    cfg.dropout_dense = dd;
    return build_network(cfg);
}

template <typename Fn>
void for_each_tensor(const Network<float>& net, const OptimState<float>& optim, Fn&& fn) {
    auto dims4 = [](const Tensor4<float>& t) {
        return std::vector<std::uint32_t>{
            static_cast<std::uint32_t>(t.out_channels), static_cast<std::uint32_t>(t.in_channels),
            static_cast<std::uint32_t>(t.kernel_h), static_cast<std::uint32_t>(t.kernel_w)};
    };
    auto dims2 = [](const Matrix<float>& m) {
        return std::vector<std::uint32_t>{static_cast<std::uint32_t>(m.rows),
                                          static_cast<std::uint32_t>(m.cols)};
    };
    auto dims1 = [](const std::vector<float>& v) {
        return std::vector<std::uint32_t>{static_cast<std::uint32_t>(v.size())};
    };
    for (std::size_t l = 0; l < net.conv.size(); ++l) {
        const std::string p = "conv" + std::to_string(l);
        const auto& cl = net.conv[l];
        const auto& vel = optim.velocity.conv[l];
        fn(p + ".W", dims4(cl.weights), cl.weights.data);
        fn(p + ".E", dims4(cl.error_kernels), cl.error_kernels.data);
        fn(p + ".vW", dims4(vel.w), vel.w.data);
        fn(p + ".vE", dims4(vel.e), vel.e.data);
        if (!cl.bias.empty()) {
            fn(p + ".b", dims1(cl.bias), cl.bias);
            fn(p + ".vb", dims1(vel.bias), vel.bias);
        }
    }
    for (std::size_t l = 0; l < net.dense.size(); ++l) {
        const std::string p = "dense" + std::to_string(l);
        const auto& dl = net.dense[l];
        const auto& vel = optim.velocity.dense[l];
        fn(p + ".W", dims2(dl.weights), dl.weights.v);
        fn(p + ".E", dims2(dl.error_weights), dl.error_weights.v);
        fn(p + ".vW", dims2(vel.w), vel.w.v);
        fn(p + ".vE", dims2(vel.e), vel.e.v);
        if (!dl.bias.empty()) {
            fn(p + ".b", dims1(dl.bias), dl.bias);
            fn(p + ".vb", dims1(vel.bias), vel.bias);
        }
    }
    fn("head.W", dims2(net.head.weights), net.head.weights.v);
    fn("head.E", dims2(net.head.error_weights), net.head.error_weights.v);
    fn("head.vW", dims2(optim.velocity.head_w), optim.velocity.head_w.v);
    fn("head.vE", dims2(optim.velocity.head_e), optim.velocity.head_e.v);
}

}  // namespace

void save_checkpoint(const Network<float>& net, const OptimState<float>& optim,
                     const std::vector<std::uint64_t>& rng_words, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot write " + path);
    f.write(kMagic, 4);
    put_u32(kVersion, f);

    const std::string arch = arch_descriptor(net);
    put_u32(static_cast<std::uint32_t>(arch.size()), f);
    f.write(arch.data(), static_cast<std::streamsize>(arch.size()));

    float hyper[3] = {optim.learning_rate, optim.momentum, optim.clip_threshold};
    for (float h : hyper) {
        std::uint32_t bits;
        std::memcpy(&bits, &h, 4);
        put_u32(bits, f);
    }

    put_u32(static_cast<std::uint32_t>(rng_words.size()), f);
    for (auto w : rng_words) put_u64(w, f);

    std::uint32_t count = 0;
    for_each_tensor(net, optim, [&](const std::string&, const std::vector<std::uint32_t>&,
                                    const std::vector<float>&) { ++count; });
    put_u32(count, f);
    for_each_tensor(net, optim,
                    [&](const std::string& name, const std::vector<std::uint32_t>& dims,
                        const std::vector<float>& data) { put_tensor(name, dims, data, f); });
    if (!f) throw FormatError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const std::uint32_t version = get_u32(f, "version");
    if (version != kVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));

    const std::uint32_t arch_len = get_u32(f, "descriptor length");
    if (arch_len > 1 << 20) throw FormatError("checkpoint: implausible descriptor length");
    std::string arch(arch_len, '\0');
    if (!f.read(arch.data(), arch_len)) throw FormatError("checkpoint: truncated descriptor");

    Checkpoint ck;
    ck.network = network_from_descriptor(arch);

    float hyper[3];
    for (float& h : hyper) {
        const std::uint32_t bits = get_u32(f, "hyperparameters");
        std::memcpy(&h, &bits, 4);
    }
    ck.optim = OptimState<float>::init(ck.network, hyper[0], hyper[1], hyper[2]);

    const std::uint32_t rng_count = get_u32(f, "rng word count");
    if (rng_count > 64) throw FormatError("checkpoint: implausible rng word count");
    for (std::uint32_t i = 0; i < rng_count; ++i)
        ck.rng_words.push_back(get_u64(f, "rng words"));

    const std::uint32_t count = get_u32(f, "tensor count");
    std::vector<RawTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(get_tensor(f));

    std::size_t next = 0;
    for_each_tensor(ck.network, ck.optim,
                    [&](const std::string& name, const std::vector<std::uint32_t>& dims,
                        const std::vector<float>& data) {
                        if (next >= tensors.size())
                            throw FormatError("checkpoint: missing tensor " + name);
                        const RawTensor& t = tensors[next++];
                        if (t.name != name)
                            throw FormatError("checkpoint: expected tensor " + name + ", found " + t.name);
                        if (t.dims != dims || t.data.size() != data.size())
                            throw FormatError("checkpoint: shape mismatch for " + name);
                        // const_cast is confined to this loader; for_each_tensor
                        // walks the same storage we are filling.
                        const_cast<std::vector<float>&>(data) = t.data;
                    });
    if (next != tensors.size())
        throw FormatError("checkpoint: " + std::to_string(tensors.size() - next) +
                          " unexpected trailing tensors");
    return ck;
}

std::string inspect_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("checkpoint: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const std::uint32_t version = get_u32(f, "version");
    const std::uint32_t arch_len = get_u32(f, "descriptor length");
    std::string arch(arch_len, '\0');
    if (!f.read(arch.data(), arch_len)) throw FormatError("checkpoint: truncated descriptor");
    float hyper[3];
    for (float& h : hyper) {
        const std::uint32_t bits = get_u32(f, "hyperparameters");
        std::memcpy(&h, &bits, 4);
    }
    const std::uint32_t rng_count = get_u32(f, "rng word count");
    std::vector<std::uint64_t> rng;
    for (std::uint32_t i = 0; i < rng_count; ++i) rng.push_back(get_u64(f, "rng words"));
    const std::uint32_t count = get_u32(f, "tensor count");

    std::ostringstream out;
    out << "format version " << version << "\n";
    out << "architecture:\n";
    std::istringstream as(arch);
    std::string line;
    while (std::getline(as, line)) out << "  " << line << "\n";
    out << "optimizer: lr=" << hyper[0] << " momentum=" << hyper[1] << " clip=" << hyper[2] << "\n";
    out << "rng words:";
    for (auto w : rng) out << " " << w;
    out << "\ntensors (" << count << "):\n";
    for (std::uint32_t i = 0; i < count; ++i) {
        const RawTensor t = get_tensor(f);
        out << "  " << t.name << " [";
        for (std::size_t j = 0; j < t.dims.size(); ++j) out << (j ? "," : "") << t.dims[j];
        out << "] " << t.data.size() << " floats\n";
    }
    return out.str();
}

}  // namespace ekdaa
