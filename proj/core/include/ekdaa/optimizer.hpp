#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ekdaa/credit_rules.hpp"
#include "ekdaa/errors.hpp"
#include "ekdaa/layers.hpp"

namespace ekdaa {

// Norm-clips an update to `threshold` without changing its direction.
template <typename T>
void pascanu_rescale(std::vector<T>& update, T threshold) {
    double norm2 = 0;
    for (T v : update) norm2 += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::sqrt(norm2);
    if (norm <= static_cast<double>(threshold) || norm == 0.0) return;
    const T s = static_cast<T>(static_cast<double>(threshold) / norm);
    for (auto& v : update) v *= s;
}

// SGD with momentum: v <- mu v + rescale(delta); theta <- theta - lambda v.
// Velocity buffers mirror every parameter tensor, including error kernels.
template <typename T>
struct OptimState {
    T learning_rate = T(5e-4);
    T momentum = T(0.9);
    T clip_threshold = T(5.0);
    UpdateSet<T> velocity;

    static OptimState init(const Network<T>& net, T lr, T mu, T clip) {
        OptimState s;
        s.learning_rate = lr;
        s.momentum = mu;
        s.clip_threshold = clip;
        s.velocity = UpdateSet<T>::zeros_like(net, /*with_error_updates=*/true);
        return s;
    }
};

namespace detail {

template <typename T>
void step_tensor(std::vector<T>& param, std::vector<T> update, std::vector<T>& vel,
                 T lr, T mu, T clip, const std::string& name) {
    pascanu_rescale(update, clip);
    for (std::size_t i = 0; i < param.size(); ++i) {
        vel[i] = mu * vel[i] + update[i];
        param[i] -= lr * vel[i];
        if (!std::isfinite(static_cast<double>(param[i])))
            throw NumericError("non-finite parameter after step: " + name);
    }
}

}  // namespace detail

// Applies one optimizer step to every parameter present in the UpdateSet.
// Error parameters are stepped with the same learning rate as forward ones.
template <typename T>
void step(Network<T>& net, const UpdateSet<T>& updates, OptimState<T>& state) {
    const T lr = state.learning_rate, mu = state.momentum, clip = state.clip_threshold;
    for (std::size_t l = 0; l < net.conv.size(); ++l) {
        auto& cl = net.conv[l];
        const auto& cu = updates.conv[l];
        auto& vel = state.velocity.conv[l];
        detail::step_tensor(cl.weights.data, cu.w.data, vel.w.data, lr, mu, clip,
                            "conv" + std::to_string(l) + ".W");
        if (updates.has_error_updates)
            detail::step_tensor(cl.error_kernels.data, cu.e.data, vel.e.data, lr, mu, clip,
                                "conv" + std::to_string(l) + ".E");
        if (!cl.bias.empty())
            detail::step_tensor(cl.bias, cu.bias, vel.bias, lr, mu, clip,
                                "conv" + std::to_string(l) + ".b");
    }
    for (std::size_t l = 0; l < net.dense.size(); ++l) {
        auto& dl = net.dense[l];
        const auto& du = updates.dense[l];
        auto& vel = state.velocity.dense[l];
        detail::step_tensor(dl.weights.v, du.w.v, vel.w.v, lr, mu, clip,
                            "dense" + std::to_string(l) + ".W");
        if (updates.has_error_updates)
            detail::step_tensor(dl.error_weights.v, du.e.v, vel.e.v, lr, mu, clip,
                                "dense" + std::to_string(l) + ".E");
        if (!dl.bias.empty())
            detail::step_tensor(dl.bias, du.bias, vel.bias, lr, mu, clip,
                                "dense" + std::to_string(l) + ".b");
    }
    detail::step_tensor(net.head.weights.v, updates.head_w.v, state.velocity.head_w.v,
                        lr, mu, clip, "head.W");
    if (updates.has_error_updates)
        detail::step_tensor(net.head.error_weights.v, updates.head_e.v, state.velocity.head_e.v,
                            lr, mu, clip, "head.E");
}

}  // namespace ekdaa
