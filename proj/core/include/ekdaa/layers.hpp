#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ekdaa/errors.hpp"
#include "ekdaa/rng.hpp"
#include "ekdaa/tensor.hpp"

namespace ekdaa {

enum class Activation { Tanh, Relu, Signum };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Signum: return "signum";
    }
    return "?";
}

template <typename T>
T activate_scalar(Activation a, T x) {
    switch (a) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > T(0) ? x : T(0);
        case Activation::Signum: return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
    }
    return T(0);
}

// Derivative at the pre-activation. Signum has no usable derivative; callers
// that need one must reject signum networks before getting here.
template <typename T>
T activation_deriv(Activation a, T pre) {
    switch (a) {
        case Activation::Tanh: {
            const T t = std::tanh(pre);
            return T(1) - t * t;
        }
        case Activation::Relu: return pre > T(0) ? T(1) : T(0);
        case Activation::Signum:
            throw UnsupportedRuleError("signum has no derivative");
    }
    return T(0);
}

template <typename T>
Vector<T> activate(Activation a, const Vector<T>& h) {
    Vector<T> z(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) z[i] = activate_scalar(a, h[i]);
    return z;
}

template <typename T>
FeatureStack<T> activate(Activation a, const FeatureStack<T>& h) {
    FeatureStack<T> z(h.channels, h.height, h.width);
    for (std::size_t i = 0; i < h.data.size(); ++i) z.data[i] = activate_scalar(a, h.data[i]);
    return z;
}

// Numerically stable softmax (max-subtracted).
template <typename T>
Vector<T> softmax(const Vector<T>& h) {
    T m = h[0];
    for (T v : h)
        if (v > m) m = v;
    Vector<T> z(h.size());
    T sum = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        z[i] = std::exp(h[i] - m);
        sum += z[i];
    }
    for (auto& v : z) v /= sum;
    return z;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
struct ConvLayer {
    Tensor4<T> weights;        // W: out_ch x in_ch x k x k
    Tensor4<T> error_kernels;  // E: same shape as W
    Vector<T> bias;            // per output channel; empty when biases disabled
    Activation activation = Activation::Tanh;
    bool has_pool = false;

    ConvLayer() = default;
    ConvLayer(int out_ch, int in_ch, int k, Activation act, bool pool, bool with_bias)
        : weights(out_ch, in_ch, k, k), error_kernels(out_ch, in_ch, k, k),
          activation(act), has_pool(pool) {
        if (k % 2 == 0) throw DimensionError("ConvLayer: kernel size must be odd");
        if (with_bias) bias.assign(out_ch, T(0));
    }
};

template <typename T>
struct DenseLayer {
    Matrix<T> weights;        // W: out x in
    Matrix<T> error_weights;  // E: in x out (shape of W^T)
    Vector<T> bias;
    Activation activation = Activation::Tanh;

    DenseLayer() = default;
    DenseLayer(int out, int in, Activation act, bool with_bias)
        : weights(out, in), error_weights(in, out), activation(act) {
        if (with_bias) bias.assign(out, T(0));
    }
};

template <typename T>
struct SoftmaxHead {
    Matrix<T> weights;        // W_y: classes x features
    Matrix<T> error_weights;  // E_y: features x classes

    SoftmaxHead() = default;
    SoftmaxHead(int classes, int features)
        : weights(classes, features), error_weights(features, classes) {}
};

template <typename T>
struct Network {
    int input_channels = 0;
    int input_h = 0;
    int input_w = 0;
    std::vector<ConvLayer<T>> conv;
    std::vector<DenseLayer<T>> dense;
    SoftmaxHead<T> head;
    // Inverted-dropout keep rates are (1 - rate); rates live here so infer()
    // can apply them during training. Zero disables.
    T dropout_conv = T(0);
    T dropout_dense = T(0);

    int class_count() const { return head.weights.rows; }

    // Spatial size of conv layer l's output before / after its pool.
    std::pair<int, int> conv_out_size(int l) const {
        int h = input_h, w = input_w;
        for (int i = 0; i <= l; ++i)
            if (conv[static_cast<std::size_t>(i)].has_pool) { h /= 2; w /= 2; }
        return {h, w};
    }

    // Flattened dimension feeding the first dense layer.
    int flat_dim() const {
        int h = input_h, w = input_w, c = input_channels;
        for (const auto& cl : conv) {
            c = cl.weights.out_channels;
            if (cl.has_pool) { h /= 2; w /= 2; }
        }
        return c * h * w;
    }

    template <typename U>
    Network<U> cast() const {
        Network<U> o;
        o.input_channels = input_channels;
        o.input_h = input_h;
        o.input_w = input_w;
        o.dropout_conv = static_cast<U>(dropout_conv);
        o.dropout_dense = static_cast<U>(dropout_dense);
        for (const auto& cl : conv) {
            ConvLayer<U> c(cl.weights.out_channels, cl.weights.in_channels, cl.weights.kernel_h,
                           cl.activation, cl.has_pool, !cl.bias.empty());
            for (std::size_t i = 0; i < cl.weights.data.size(); ++i)
                c.weights.data[i] = static_cast<U>(cl.weights.data[i]);
            for (std::size_t i = 0; i < cl.error_kernels.data.size(); ++i)
                c.error_kernels.data[i] = static_cast<U>(cl.error_kernels.data[i]);
            for (std::size_t i = 0; i < cl.bias.size(); ++i) c.bias[i] = static_cast<U>(cl.bias[i]);
            o.conv.push_back(std::move(c));
        }
        for (const auto& dl : dense) {
            DenseLayer<U> d(dl.weights.rows, dl.weights.cols, dl.activation, !dl.bias.empty());
            for (std::size_t i = 0; i < dl.weights.v.size(); ++i)
                d.weights.v[i] = static_cast<U>(dl.weights.v[i]);
            for (std::size_t i = 0; i < dl.error_weights.v.size(); ++i)
                d.error_weights.v[i] = static_cast<U>(dl.error_weights.v[i]);
            for (std::size_t i = 0; i < dl.bias.size(); ++i) d.bias[i] = static_cast<U>(dl.bias[i]);
            o.dense.push_back(std::move(d));
        }
        o.head = SoftmaxHead<U>(head.weights.rows, head.weights.cols);
        for (std::size_t i = 0; i < head.weights.v.size(); ++i)
            o.head.weights.v[i] = static_cast<U>(head.weights.v[i]);
        for (std::size_t i = 0; i < head.error_weights.v.size(); ++i)
            o.head.error_weights.v[i] = static_cast<U>(head.error_weights.v[i]);
        return o;
    }
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

template <typename T>
void glorot_uniform_fill(T* p, std::size_t n, int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < n; ++i)
        p[i] = static_cast<T>(rng.next_uniform(-limit, limit));
}

// Glorot uniform on every W and E (error kernels/matrices use the same
// scheme). Biases start at zero.
template <typename T>
void init_glorot(Network<T>& net, Rng& rng) {
    for (auto& cl : net.conv) {
        const int k2 = cl.weights.kernel_h * cl.weights.kernel_w;
        const int fi = cl.weights.in_channels * k2;
        const int fo = cl.weights.out_channels * k2;
        glorot_uniform_fill(cl.weights.data.data(), cl.weights.data.size(), fi, fo, rng);
        glorot_uniform_fill(cl.error_kernels.data.data(), cl.error_kernels.data.size(), fi, fo, rng);
    }
    for (auto& dl : net.dense) {
        glorot_uniform_fill(dl.weights.v.data(), dl.weights.v.size(), dl.weights.cols, dl.weights.rows, rng);
        glorot_uniform_fill(dl.error_weights.v.data(), dl.error_weights.v.size(), dl.weights.cols, dl.weights.rows, rng);
    }
    glorot_uniform_fill(net.head.weights.v.data(), net.head.weights.v.size(),
                        net.head.weights.cols, net.head.weights.rows, rng);
    glorot_uniform_fill(net.head.error_weights.v.data(), net.head.error_weights.v.size(),
                        net.head.weights.cols, net.head.weights.rows, rng);
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

template <typename T>
struct ConvTrace {
    FeatureStack<T> pre;          // h^l
    FeatureStack<T> post_prepool; // z~^l: activated, before pooling/dropout
    FeatureStack<T> post;         // z^l: value fed forward (pooled, dropout applied)
    std::vector<PoolProvenance> pool; // per channel; empty when no pool
    FeatureStack<T> drop_mask;    // inverted-dropout mask at post resolution; empty when off
};

template <typename T>
struct DenseTrace {
    Vector<T> pre;
    Vector<T> post;       // value fed forward (dropout applied)
    Vector<T> drop_mask;  // empty when off
};

template <typename T>
struct LayerTrace {
    FeatureStack<T> input;  // z^0
    std::vector<ConvTrace<T>> conv;
    std::vector<DenseTrace<T>> dense;
    Vector<T> head_pre;   // h_y
    Vector<T> head_post;  // z_y
};

// Per-sample dropout stream; present only during training.
template <typename T>
struct DropoutSampler {
    Rng rng;
    explicit DropoutSampler(std::uint64_t seed) : rng(seed) {}

    // Inverted dropout: kept units scaled by 1/keep so eval needs no rescale.
    void fill_mask(T rate, T* mask, std::size_t n) {
        const double keep = 1.0 - static_cast<double>(rate);
        for (std::size_t i = 0; i < n; ++i)
            mask[i] = rng.next_unit() < keep ? static_cast<T>(1.0 / keep) : T(0);
    }
};

// Full feed-forward pass; records everything the update pass needs.
template <typename T>
LayerTrace<T> infer(const Network<T>& net, const FeatureStack<T>& x,
                    DropoutSampler<T>* drop = nullptr) {
    if (x.channels != net.input_channels || x.height != net.input_h || x.width != net.input_w)
        throw DimensionError("infer: input " + x.shape_str() + " does not match network input " +
                             std::to_string(net.input_channels) + "x" + std::to_string(net.input_h) +
                             "x" + std::to_string(net.input_w));
    LayerTrace<T> tr;
    tr.input = x;
    const FeatureStack<T>* z_prev = &tr.input;

    for (std::size_t l = 0; l < net.conv.size(); ++l) {
        const auto& cl = net.conv[l];
        if (z_prev->channels != cl.weights.in_channels)
            throw DimensionError("infer: conv layer " + std::to_string(l) + " expects " +
                                 std::to_string(cl.weights.in_channels) + " input channels, got " +
                                 std::to_string(z_prev->channels));
        ConvTrace<T> ct;
        const int h = z_prev->height, w = z_prev->width;
        ct.pre = FeatureStack<T>(cl.weights.out_channels, h, w);
        for (int m = 0; m < cl.weights.out_channels; ++m) {
            T* acc = ct.pre.channel(m);
            for (int n = 0; n < cl.weights.in_channels; ++n)
                conv2d_same_acc(z_prev->channel(n), h, w,
                                cl.weights.kernel(m, n), cl.weights.kernel_h, cl.weights.kernel_w,
                                acc);
            if (!cl.bias.empty()) {
                const T b = cl.bias[m];
                for (std::size_t i = 0; i < ct.pre.plane(); ++i) acc[i] += b;
            }
        }
        ct.post_prepool = activate(cl.activation, ct.pre);
        if (cl.has_pool) {
            if (h % 2 != 0 || w % 2 != 0)
                throw DimensionError("infer: conv layer " + std::to_string(l) +
                                     " pools an odd-sized map " + detail::shape2(h, w));
            ct.post = FeatureStack<T>(ct.post_prepool.channels, h / 2, w / 2);
            ct.pool.resize(ct.post_prepool.channels);
            for (int m = 0; m < ct.post_prepool.channels; ++m) {
                ct.pool[m].resize(ct.post.plane());
                maxpool2_into(ct.post_prepool.channel(m), h, w, ct.post.channel(m), ct.pool[m].data());
            }
        } else {
            ct.post = ct.post_prepool;
        }
        if (drop && net.dropout_conv > T(0)) {
            ct.drop_mask = FeatureStack<T>(ct.post.channels, ct.post.height, ct.post.width);
            drop->fill_mask(net.dropout_conv, ct.drop_mask.data.data(), ct.drop_mask.size());
            for (std::size_t i = 0; i < ct.post.size(); ++i) ct.post.data[i] *= ct.drop_mask.data[i];
        }
        tr.conv.push_back(std::move(ct));
        z_prev = &tr.conv.back().post;
    }

    Vector<T> z = flatten(*z_prev);
    for (std::size_t l = 0; l < net.dense.size(); ++l) {
        const auto& dl = net.dense[l];
        if (static_cast<std::size_t>(dl.weights.cols) != z.size())
            throw DimensionError("infer: dense layer " + std::to_string(l) + " expects input " +
                                 std::to_string(dl.weights.cols) + ", got " + std::to_string(z.size()));
        DenseTrace<T> dt;
        dt.pre = matvec(dl.weights, z);
        if (!dl.bias.empty())
            for (std::size_t i = 0; i < dt.pre.size(); ++i) dt.pre[i] += dl.bias[i];
        dt.post = activate(dl.activation, dt.pre);
        if (drop && net.dropout_dense > T(0)) {
            dt.drop_mask.resize(dt.post.size());
            drop->fill_mask(net.dropout_dense, dt.drop_mask.data(), dt.drop_mask.size());
            for (std::size_t i = 0; i < dt.post.size(); ++i) dt.post[i] *= dt.drop_mask[i];
        }
        z = dt.post;
        tr.dense.push_back(std::move(dt));
    }

    if (static_cast<std::size_t>(net.head.weights.cols) != z.size())
        throw DimensionError("infer: softmax head expects input " +
                             std::to_string(net.head.weights.cols) + ", got " + std::to_string(z.size()));
    tr.head_pre = matvec(net.head.weights, z);
    tr.head_post = softmax(tr.head_pre);
    assert_finite(tr.head_post, "softmax output");
    return tr;
}

// Cross-entropy against a one-hot label.
template <typename T>
double cross_entropy(const Vector<T>& probs, int label) {
    const double p = std::max(static_cast<double>(probs[static_cast<std::size_t>(label)]), 1e-30);
    return -std::log(p);
}

template <typename T>
Vector<T> one_hot(int label, int classes) {
    Vector<T> y(static_cast<std::size_t>(classes), T(0));
    y[static_cast<std::size_t>(label)] = T(1);
    return y;
}

}  // namespace ekdaa
