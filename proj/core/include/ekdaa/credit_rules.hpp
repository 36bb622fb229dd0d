#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ekdaa/errors.hpp"
#include "ekdaa/layers.hpp"
#include "ekdaa/rng.hpp"
#include "ekdaa/tensor.hpp"

namespace ekdaa {

enum class Rule { Ekdaa, Backprop, Fa, Dfa };

inline std::string to_string(Rule r) {
    switch (r) {
        case Rule::Ekdaa: return "ekdaa";
        case Rule::Backprop: return "bp";
        case Rule::Fa: return "fa";
        case Rule::Dfa: return "dfa";
    }
    return "?";
}

// Step scalars for target construction (beta) and error-kernel updates (gamma).
template <typename T>
struct RuleParams {
    T beta = T(0.1);
    T gamma = T(1.0);
};

// ---------------------------------------------------------------------------
// UpdateSet
// ---------------------------------------------------------------------------

template <typename T>
struct ConvUpdate {
    Tensor4<T> w;
    Tensor4<T> e;  // empty (size 0) for rules without error-kernel updates
    Vector<T> bias;
};

template <typename T>
struct DenseUpdate {
    Matrix<T> w;
    Matrix<T> e;
    Vector<T> bias;
};

template <typename T>
struct UpdateSet {
    std::vector<ConvUpdate<T>> conv;
    std::vector<DenseUpdate<T>> dense;
    Matrix<T> head_w;
    Matrix<T> head_e;
    bool has_error_updates = false;

    static UpdateSet zeros_like(const Network<T>& net, bool with_error_updates) {
        UpdateSet u;
        u.has_error_updates = with_error_updates;
        for (const auto& cl : net.conv) {
            ConvUpdate<T> cu;
            cu.w = Tensor4<T>(cl.weights.out_channels, cl.weights.in_channels,
                              cl.weights.kernel_h, cl.weights.kernel_w);
            if (with_error_updates) cu.e = cu.w;
            if (!cl.bias.empty()) cu.bias.assign(cl.bias.size(), T(0));
            u.conv.push_back(std::move(cu));
        }
        for (const auto& dl : net.dense) {
            DenseUpdate<T> du;
            du.w = Matrix<T>(dl.weights.rows, dl.weights.cols);
            if (with_error_updates) du.e = Matrix<T>(dl.error_weights.rows, dl.error_weights.cols);
            if (!dl.bias.empty()) du.bias.assign(dl.bias.size(), T(0));
            u.dense.push_back(std::move(du));
        }
        u.head_w = Matrix<T>(net.head.weights.rows, net.head.weights.cols);
        if (with_error_updates)
            u.head_e = Matrix<T>(net.head.error_weights.rows, net.head.error_weights.cols);
        return u;
    }

    void add(const UpdateSet& o) {
        auto acc = [](std::vector<T>& a, const std::vector<T>& b) {
            if (a.size() != b.size()) {
                if (b.empty()) return;  // other set carries no error-parameter updates
                throw DimensionError("UpdateSet::add: size mismatch");
            }
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        };
        for (std::size_t l = 0; l < conv.size(); ++l) {
            acc(conv[l].w.data, o.conv[l].w.data);
            acc(conv[l].e.data, o.conv[l].e.data);
            acc(conv[l].bias, o.conv[l].bias);
        }
        for (std::size_t l = 0; l < dense.size(); ++l) {
            acc(dense[l].w.v, o.dense[l].w.v);
            acc(dense[l].e.v, o.dense[l].e.v);
            acc(dense[l].bias, o.dense[l].bias);
        }
        acc(head_w.v, o.head_w.v);
        acc(head_e.v, o.head_e.v);
    }

    void scale(T s) {
        auto sc = [s](std::vector<T>& a) {
            for (auto& v : a) v *= s;
        };
        for (auto& c : conv) { sc(c.w.data); sc(c.e.data); sc(c.bias); }
        for (auto& d : dense) { sc(d.w.v); sc(d.e.v); sc(d.bias); }
        sc(head_w.v);
        sc(head_e.v);
    }

    void check_finite() const {
        for (std::size_t l = 0; l < conv.size(); ++l) {
            assert_finite(conv[l].w.data, "conv update " + std::to_string(l));
            assert_finite(conv[l].e.data, "conv error-kernel update " + std::to_string(l));
        }
        for (std::size_t l = 0; l < dense.size(); ++l) {
            assert_finite(dense[l].w.v, "dense update " + std::to_string(l));
            assert_finite(dense[l].e.v, "dense error-matrix update " + std::to_string(l));
        }
        assert_finite(head_w.v, "head update");
        assert_finite(head_e.v, "head error-matrix update");
    }
};

namespace detail {

// kernel^T for an h x w grid stored flat.
template <typename T>
void transpose_kernel(const T* in, int h, int w, T* out) {
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out[j * h + i] = in[i * w + j];
}

template <typename T>
const Vector<T>& head_input(const Network<T>& net, const LayerTrace<T>& tr, Vector<T>& scratch) {
    if (!tr.dense.empty()) return tr.dense.back().post;
    scratch = flatten(tr.conv.empty() ? tr.input : tr.conv.back().post);
    return scratch;
}

template <typename T>
void reject_signum(const Network<T>& net, const char* rule) {
    for (const auto& cl : net.conv)
        if (cl.activation == Activation::Signum)
            throw UnsupportedRuleError(std::string(rule) + " cannot train signum activations");
    for (const auto& dl : net.dense)
        if (dl.activation == Activation::Signum)
            throw UnsupportedRuleError(std::string(rule) + " cannot train signum activations");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// EKDAA
// ---------------------------------------------------------------------------
//
// Head error e_y = -(y - z_y) drives everything. Dense layers receive targets
// y^l = phi(h^l - beta E^{l+1} e^{l+1}); their error is the gap to the actual
// post-activation. At the conv boundary the dense-projected signal is
// unflattened (and up-sampled through the last pool if present). Conv errors
// live at pre-pool resolution against the pre-pool post-activation; error
// kernels deconvolve them downward, and kernel updates correlate the layer
// input with the error map. Error parameters get -gamma * (dW)^T.
template <typename T>
void ekdaa_updates_acc(const Network<T>& net, const LayerTrace<T>& tr,
                       const Vector<T>& y, const RuleParams<T>& params, UpdateSet<T>& u) {
    if (y.size() != tr.head_post.size())
        throw DimensionError("ekdaa_updates: label size " + std::to_string(y.size()) +
                             " != class count " + std::to_string(tr.head_post.size()));
    if (!u.has_error_updates)
        throw DimensionError("ekdaa_updates: accumulator lacks error-parameter slots");
    const T gamma = params.gamma;
    const T beta = params.beta;

    // out[r,:] += s * a[r] * b, row-sequential on both sides.
    auto outer_acc = [](Matrix<T>& out, const Vector<T>& a, const Vector<T>& b, T s) {
        for (std::size_t r = 0; r < a.size(); ++r) {
            T* row = out.v.data() + r * b.size();
            const T ar = s * a[r];
            for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
        }
    };

    // Head: e_y = -(y - z_y); dW_y = e_y z^T; dE_y = -gamma dW_y^T = -gamma z e_y^T.
    Vector<T> e_y(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) e_y[i] = tr.head_post[i] - y[i];
    Vector<T> scratch;
    const Vector<T>& z_head_in = detail::head_input(net, tr, scratch);
    outer_acc(u.head_w, e_y, z_head_in, T(1));
    outer_acc(u.head_e, z_head_in, e_y, -gamma);

    // Projected target offset for the layer below the head.
    Vector<T> d = matvec(net.head.error_weights, e_y);

    // Dense chain, top down.
    for (int l = static_cast<int>(net.dense.size()) - 1; l >= 0; --l) {
        const auto& dl = net.dense[static_cast<std::size_t>(l)];
        const auto& dt = tr.dense[static_cast<std::size_t>(l)];
        Vector<T> target(dt.pre.size());
        for (std::size_t i = 0; i < target.size(); ++i)
            target[i] = activate_scalar(dl.activation, dt.pre[i] - beta * d[i]);
        Vector<T> e(dt.post.size());
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = dt.post[i] - target[i];

        const Vector<T>* z_prev;
        Vector<T> prev_scratch;
        if (l > 0) {
            z_prev = &tr.dense[static_cast<std::size_t>(l - 1)].post;
        } else {
            prev_scratch = flatten(net.conv.empty() ? tr.input : tr.conv.back().post);
            z_prev = &prev_scratch;
        }
        auto& du = u.dense[static_cast<std::size_t>(l)];
        outer_acc(du.w, e, *z_prev, T(1));
        outer_acc(du.e, *z_prev, e, -gamma);
        if (!du.bias.empty())
            for (std::size_t i = 0; i < e.size(); ++i) du.bias[i] += e[i];

        d = matvec(dl.error_weights, e);
    }

    if (net.conv.empty()) return;

    // Boundary: unflatten the projection at the last conv layer's pooled
    // resolution, up-sample through its pool if present, then form the target
    // against the pre-pool pre-activation.
    const int lc = static_cast<int>(net.conv.size());
    FeatureStack<T> target_stack;
    {
        const auto& last = tr.conv.back();
        FeatureStack<T> dstack =
            unflatten(d, last.post.channels, last.post.height, last.post.width);
        const auto& cl = net.conv.back();
        target_stack = FeatureStack<T>(last.pre.channels, last.pre.height, last.pre.width);
        for (int m = 0; m < dstack.channels; ++m) {
            std::vector<T> up;
            const T* dm = dstack.channel(m);
            if (cl.has_pool) {
                up.resize(last.pre.plane());
                upsample2_into(dm, dstack.height, dstack.width, up.data());
                dm = up.data();
            }
            const T* hm = last.pre.channel(m);
            T* tm = target_stack.channel(m);
            for (std::size_t i = 0; i < last.pre.plane(); ++i)
                tm[i] = activate_scalar(cl.activation, hm[i] - beta * dm[i]);
        }
    }

    // Conv chain, top down. Error maps at pre-pool resolution.
    for (int l = lc - 1; l >= 0; --l) {
        const auto& cl = net.conv[static_cast<std::size_t>(l)];
        const auto& ct = tr.conv[static_cast<std::size_t>(l)];
        const int eh = ct.post_prepool.height, ew = ct.post_prepool.width;

        FeatureStack<T> e(ct.post_prepool.channels, eh, ew);
        for (std::size_t i = 0; i < e.size(); ++i)
            e.data[i] = ct.post_prepool.data[i] - target_stack.data[i];

        const FeatureStack<T>& z_prev =
            l > 0 ? tr.conv[static_cast<std::size_t>(l - 1)].post : tr.input;
        auto& cu = u.conv[static_cast<std::size_t>(l)];
        const int kh = cl.weights.kernel_h, kw = cl.weights.kernel_w;
        std::vector<T> tmp(cl.weights.kernel_size());
        for (int m = 0; m < cl.weights.out_channels; ++m) {
            for (int n = 0; n < cl.weights.in_channels; ++n) {
                std::fill(tmp.begin(), tmp.end(), T(0));
                weight_grad_conv_acc(z_prev.channel(n), z_prev.height, z_prev.width,
                                     e.channel(m), eh, ew, kh, kw, tmp.data());
                T* dw = cu.w.kernel(m, n);
                T* de = cu.e.kernel(m, n);
                for (int i = 0; i < kh; ++i)
                    for (int j = 0; j < kw; ++j) {
                        dw[i * kw + j] += tmp[static_cast<std::size_t>(i) * kw + j];
                        de[j * kh + i] += -gamma * tmp[static_cast<std::size_t>(i) * kw + j];
                    }
            }
            if (!cu.bias.empty()) {
                T s = 0;
                const T* em = e.channel(m);
                for (std::size_t i = 0; i < e.plane(); ++i) s += em[i];
                cu.bias[static_cast<std::size_t>(m)] += s / static_cast<T>(e.plane());
            }
        }

        if (l > 0) {
            const auto& below = net.conv[static_cast<std::size_t>(l - 1)];
            const auto& below_tr = tr.conv[static_cast<std::size_t>(l - 1)];
            // d^{l-1}_n = sum_m E^l_{m,n} deconvolved with e^l_m
            FeatureStack<T> dstack(cl.weights.in_channels, eh, ew);
            for (int n = 0; n < cl.weights.in_channels; ++n) {
                T* dn = dstack.channel(n);
                for (int m = 0; m < cl.weights.out_channels; ++m)
                    deconv2d_same_acc(cl.error_kernels.kernel(m, n),
                                      cl.error_kernels.kernel_h, cl.error_kernels.kernel_w,
                                      e.channel(m), eh, ew, dn);
            }
            target_stack = FeatureStack<T>(below_tr.pre.channels, below_tr.pre.height,
                                           below_tr.pre.width);
            for (int n = 0; n < dstack.channels; ++n) {
                std::vector<T> up;
                const T* dn = dstack.channel(n);
                if (below.has_pool) {
                    up.resize(below_tr.pre.plane());
                    upsample2_into(dn, dstack.height, dstack.width, up.data());
                    dn = up.data();
                }
                const T* hn = below_tr.pre.channel(n);
                T* tn = target_stack.channel(n);
                for (std::size_t i = 0; i < below_tr.pre.plane(); ++i)
                    tn[i] = activate_scalar(below.activation, hn[i] - beta * dn[i]);
            }
        }
    }
}

template <typename T>
UpdateSet<T> ekdaa_updates(const Network<T>& net, const LayerTrace<T>& tr,
                           const Vector<T>& y, const RuleParams<T>& params) {
    UpdateSet<T> u = UpdateSet<T>::zeros_like(net, /*with_error_updates=*/true);
    ekdaa_updates_acc(net, tr, y, params, u);
    u.check_finite();
    return u;
}

// ---------------------------------------------------------------------------
// Backprop reference (and the FA variant, which swaps backward weights)
// ---------------------------------------------------------------------------

// Fixed random tensors standing in for the transposed forward weights in the
// backward pass. Shapes mirror the forward parameters they replace.
template <typename T>
struct FaFeedback {
    std::vector<Tensor4<T>> conv;
    std::vector<Matrix<T>> dense;
    Matrix<T> head;
};

template <typename T>
FaFeedback<T> make_fa_feedback(const Network<T>& net, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x0fa0));
    FaFeedback<T> fb;
    for (const auto& cl : net.conv) {
        Tensor4<T> k(cl.weights.out_channels, cl.weights.in_channels,
                     cl.weights.kernel_h, cl.weights.kernel_w);
        const int k2 = k.kernel_h * k.kernel_w;
        glorot_uniform_fill(k.data.data(), k.data.size(), k.in_channels * k2, k.out_channels * k2, rng);
        fb.conv.push_back(std::move(k));
    }
    for (const auto& dl : net.dense) {
        Matrix<T> m(dl.weights.rows, dl.weights.cols);
        glorot_uniform_fill(m.v.data(), m.v.size(), m.cols, m.rows, rng);
        fb.dense.push_back(std::move(m));
    }
    fb.head = Matrix<T>(net.head.weights.rows, net.head.weights.cols);
    glorot_uniform_fill(fb.head.v.data(), fb.head.v.size(), fb.head.cols, fb.head.rows, rng);
    return fb;
}

namespace detail {

// Shared BP/FA backward pass. `feedback == nullptr` means true backprop
// (backward weights are the forward weights).
template <typename T>
void outer_into(Matrix<T>& out, const Vector<T>& a, const Vector<T>& b) {
    for (std::size_t r = 0; r < a.size(); ++r) {
        T* row = out.v.data() + r * b.size();
        const T ar = a[r];
        for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
    }
}

template <typename T>
void bp_like_updates_acc(const Network<T>& net, const LayerTrace<T>& tr,
                         const Vector<T>& y, const FaFeedback<T>* feedback,
                         const char* rule_name, UpdateSet<T>& u) {
    reject_signum(net, rule_name);
    if (y.size() != tr.head_post.size())
        throw DimensionError(std::string(rule_name) + ": label size mismatch");

    Vector<T> delta_y(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) delta_y[i] = tr.head_post[i] - y[i];
    Vector<T> scratch;
    const Vector<T>& z_head_in = head_input(net, tr, scratch);
    outer_into(u.head_w, delta_y, z_head_in);

    const Matrix<T>& head_back = feedback ? feedback->head : net.head.weights;
    Vector<T> g = matvec_transposed(head_back, delta_y);  // dL/dz at layer below head

    for (int l = static_cast<int>(net.dense.size()) - 1; l >= 0; --l) {
        const auto& dl = net.dense[static_cast<std::size_t>(l)];
        const auto& dt = tr.dense[static_cast<std::size_t>(l)];
        if (!dt.drop_mask.empty())
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= dt.drop_mask[i];
        Vector<T> delta(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
            delta[i] = g[i] * activation_deriv(dl.activation, dt.pre[i]);

        const Vector<T>* z_prev;
        Vector<T> prev_scratch;
        if (l > 0) {
            z_prev = &tr.dense[static_cast<std::size_t>(l - 1)].post;
        } else {
            prev_scratch = flatten(net.conv.empty() ? tr.input : tr.conv.back().post);
            z_prev = &prev_scratch;
        }
        auto& du = u.dense[static_cast<std::size_t>(l)];
        outer_into(du.w, delta, *z_prev);
        if (!du.bias.empty())
            for (std::size_t i = 0; i < delta.size(); ++i) du.bias[i] += delta[i];

        const Matrix<T>& back = feedback ? feedback->dense[static_cast<std::size_t>(l)] : dl.weights;
        g = matvec_transposed(back, delta);
    }

    if (net.conv.empty()) return;

    // Unflatten into the last conv layer's pooled output shape.
    const auto& last = tr.conv.back();
    FeatureStack<T> gstack = unflatten(g, last.post.channels, last.post.height, last.post.width);

    for (int l = static_cast<int>(net.conv.size()) - 1; l >= 0; --l) {
        const auto& cl = net.conv[static_cast<std::size_t>(l)];
        const auto& ct = tr.conv[static_cast<std::size_t>(l)];
        if (!ct.drop_mask.empty())
            for (std::size_t i = 0; i < gstack.size(); ++i)
                gstack.data[i] *= ct.drop_mask.data[i];

        // Route through max-pool provenance back to pre-pool resolution.
        FeatureStack<T> gpre;
        if (cl.has_pool) {
            gpre = FeatureStack<T>(ct.post_prepool.channels, ct.post_prepool.height,
                                   ct.post_prepool.width);
            const int oh = gstack.height, ow = gstack.width;
            for (int m = 0; m < gstack.channels; ++m) {
                const T* gm = gstack.channel(m);
                T* pm = gpre.channel(m);
                const auto& prov = ct.pool[static_cast<std::size_t>(m)];
                for (int y2 = 0; y2 < oh; ++y2)
                    for (int x2 = 0; x2 < ow; ++x2) {
                        const std::uint8_t a = prov[static_cast<std::size_t>(y2) * ow + x2];
                        const int yy = 2 * y2 + a / 2, xx = 2 * x2 + a % 2;
                        pm[yy * gpre.width + xx] += gm[y2 * ow + x2];
                    }
            }
        } else {
            gpre = std::move(gstack);
        }

        FeatureStack<T> delta(gpre.channels, gpre.height, gpre.width);
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta.data[i] = gpre.data[i] * activation_deriv(cl.activation, ct.pre.data[i]);

        const FeatureStack<T>& z_prev =
            l > 0 ? tr.conv[static_cast<std::size_t>(l - 1)].post : tr.input;
        auto& cu = u.conv[static_cast<std::size_t>(l)];
        for (int m = 0; m < cl.weights.out_channels; ++m) {
            for (int n = 0; n < cl.weights.in_channels; ++n)
                weight_grad_conv_acc(z_prev.channel(n), z_prev.height, z_prev.width,
                                     delta.channel(m), delta.height, delta.width,
                                     cl.weights.kernel_h, cl.weights.kernel_w, cu.w.kernel(m, n));
            if (!cu.bias.empty()) {
                T s = 0;
                const T* dm = delta.channel(m);
                for (std::size_t i = 0; i < delta.plane(); ++i) s += dm[i];
                cu.bias[static_cast<std::size_t>(m)] += s;
            }
        }

        if (l > 0) {
            // Input gradient: delta correlated with the flipped backward kernel.
            const Tensor4<T>& back =
                feedback ? feedback->conv[static_cast<std::size_t>(l)] : cl.weights;
            gstack = FeatureStack<T>(cl.weights.in_channels, delta.height, delta.width);
            for (int n = 0; n < cl.weights.in_channels; ++n) {
                T* gn = gstack.channel(n);
                for (int m = 0; m < cl.weights.out_channels; ++m)
                    deconv2d_same_acc(back.kernel(m, n), back.kernel_h, back.kernel_w,
                                      delta.channel(m), delta.height, delta.width, gn);
            }
        }
    }
}

}  // namespace detail

template <typename T>
void backprop_updates_acc(const Network<T>& net, const LayerTrace<T>& tr, const Vector<T>& y,
                          UpdateSet<T>& u) {
    detail::bp_like_updates_acc<T>(net, tr, y, nullptr, "backprop", u);
}

template <typename T>
UpdateSet<T> backprop_updates(const Network<T>& net, const LayerTrace<T>& tr, const Vector<T>& y) {
    UpdateSet<T> u = UpdateSet<T>::zeros_like(net, /*with_error_updates=*/false);
    detail::bp_like_updates_acc<T>(net, tr, y, nullptr, "backprop", u);
    return u;
}

template <typename T>
void fa_updates_acc(const Network<T>& net, const LayerTrace<T>& tr, const Vector<T>& y,
                    const FaFeedback<T>& feedback, UpdateSet<T>& u) {
    detail::bp_like_updates_acc<T>(net, tr, y, &feedback, "feedback alignment", u);
}

template <typename T>
UpdateSet<T> fa_updates(const Network<T>& net, const LayerTrace<T>& tr, const Vector<T>& y,
                        const FaFeedback<T>& feedback) {
    UpdateSet<T> u = UpdateSet<T>::zeros_like(net, /*with_error_updates=*/false);
    detail::bp_like_updates_acc<T>(net, tr, y, &feedback, "feedback alignment", u);
    return u;
}

// ---------------------------------------------------------------------------
// DFA
// ---------------------------------------------------------------------------

// One fixed random projection from the class-error dimension to each hidden
// layer's flattened (pre-pool, for conv) dimension.
template <typename T>
struct DfaProjections {
    std::vector<Matrix<T>> conv;   // rows = out_ch * preH * preW, cols = classes
    std::vector<Matrix<T>> dense;  // rows = layer width, cols = classes
};

template <typename T>
DfaProjections<T> make_dfa_projections(const Network<T>& net, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xdfa0));
    DfaProjections<T> pr;
    const int classes = net.class_count();
    int h = net.input_h, w = net.input_w;
    for (const auto& cl : net.conv) {
        const int dim = cl.weights.out_channels * h * w;  // pre-pool resolution
        Matrix<T> b(dim, classes);
        glorot_uniform_fill(b.v.data(), b.v.size(), classes, dim, rng);
        pr.conv.push_back(std::move(b));
        if (cl.has_pool) { h /= 2; w /= 2; }
    }
    for (const auto& dl : net.dense) {
        Matrix<T> b(dl.weights.rows, classes);
        glorot_uniform_fill(b.v.data(), b.v.size(), classes, dl.weights.rows, rng);
        pr.dense.push_back(std::move(b));
    }
    return pr;
}

template <typename T>
void dfa_updates_acc(const Network<T>& net, const LayerTrace<T>& tr, const Vector<T>& y,
                     const DfaProjections<T>& proj, UpdateSet<T>& u) {
    detail::reject_signum(net, "direct feedback alignment");

    Vector<T> e_y(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) e_y[i] = tr.head_post[i] - y[i];
    Vector<T> scratch;
    detail::outer_into(u.head_w, e_y, detail::head_input(net, tr, scratch));

    for (std::size_t l = 0; l < net.dense.size(); ++l) {
        const auto& dl = net.dense[l];
        const auto& dt = tr.dense[l];
        Vector<T> a = matvec(proj.dense[l], e_y);
        if (!dt.drop_mask.empty())
            for (std::size_t i = 0; i < a.size(); ++i) a[i] *= dt.drop_mask[i];
        Vector<T> delta(a.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            delta[i] = a[i] * activation_deriv(dl.activation, dt.pre[i]);

        const Vector<T>* z_prev;
        Vector<T> prev_scratch;
        if (l > 0) {
            z_prev = &tr.dense[l - 1].post;
        } else {
            prev_scratch = flatten(net.conv.empty() ? tr.input : tr.conv.back().post);
            z_prev = &prev_scratch;
        }
        detail::outer_into(u.dense[l].w, delta, *z_prev);
        if (!u.dense[l].bias.empty())
            for (std::size_t i = 0; i < delta.size(); ++i) u.dense[l].bias[i] += delta[i];
    }

    for (std::size_t l = 0; l < net.conv.size(); ++l) {
        const auto& cl = net.conv[l];
        const auto& ct = tr.conv[l];
        Vector<T> a = matvec(proj.conv[l], e_y);
        FeatureStack<T> delta =
            unflatten(a, ct.pre.channels, ct.pre.height, ct.pre.width);
        for (std::size_t i = 0; i < delta.size(); ++i)
            delta.data[i] *= activation_deriv(cl.activation, ct.pre.data[i]);

        const FeatureStack<T>& z_prev = l > 0 ? tr.conv[l - 1].post : tr.input;
        auto& cu = u.conv[l];
        for (int m = 0; m < cl.weights.out_channels; ++m) {
            for (int n = 0; n < cl.weights.in_channels; ++n)
                weight_grad_conv_acc(z_prev.channel(n), z_prev.height, z_prev.width,
                                     delta.channel(m), delta.height, delta.width,
                                     cl.weights.kernel_h, cl.weights.kernel_w, cu.w.kernel(m, n));
            if (!cu.bias.empty()) {
                T s = 0;
                const T* dm = delta.channel(m);
                for (std::size_t i = 0; i < delta.plane(); ++i) s += dm[i];
                cu.bias[static_cast<std::size_t>(m)] += s;
            }
        }
    }
}

template <typename T>
UpdateSet<T> dfa_updates(const Network<T>& net, const LayerTrace<T>& tr, const Vector<T>& y,
                         const DfaProjections<T>& proj) {
    UpdateSet<T> u = UpdateSet<T>::zeros_like(net, /*with_error_updates=*/false);
    dfa_updates_acc(net, tr, y, proj, u);
    return u;
}

// ---------------------------------------------------------------------------
// Angle between update directions
// ---------------------------------------------------------------------------

// arccos of cosine similarity between two flattened tensors, in degrees.
template <typename T>
double gradient_angle(const std::vector<T>& a, const std::vector<T>& b) {
    if (a.size() != b.size())
        throw DimensionError("gradient_angle: size mismatch");
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    if (na == 0.0 || nb == 0.0)
        throw NumericError("gradient_angle: undefined for a zero tensor");
    double c = dot / (std::sqrt(na) * std::sqrt(nb));
    c = std::max(-1.0, std::min(1.0, c));
    return std::acos(c) * 180.0 / 3.14159265358979323846;
}

}  // namespace ekdaa
