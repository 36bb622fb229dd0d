#include <benchmark/benchmark.h>

#include <vector>

#include "ekdaa/credit_rules.hpp"
#include "ekdaa/layers.hpp"
#include "ekdaa/rng.hpp"
#include "ekdaa/tensor.hpp"

using namespace ekdaa;

namespace {

Grid<float> random_grid(int r, int c, Rng& rng) {
    Grid<float> g(r, c);
    for (auto& v : g.v) v = static_cast<float>(rng.next_uniform(-1, 1));
    return g;
}

Network<float> desk_net() {
    Network<float> net;
    net.input_channels = 1;
    net.input_h = 28;
    net.input_w = 28;
    net.conv.emplace_back(32, 1, 3, Activation::Tanh, true, true);
    net.conv.emplace_back(64, 32, 3, Activation::Tanh, true, true);
    net.conv.emplace_back(128, 64, 3, Activation::Tanh, false, true);
    net.dense.emplace_back(128, 128 * 7 * 7, Activation::Tanh, true);
    net.head = SoftmaxHead<float>(10, 128);
    Rng rng(1);
    init_glorot(net, rng);
    return net;
}

FeatureStack<float> desk_input() {
    FeatureStack<float> x(1, 28, 28);
    Rng rng(2);
    for (auto& v : x.data) v = static_cast<float>(rng.next_uniform(0, 1));
    return x;
}

}  // namespace

static void BM_Conv2dSame28x28k3(benchmark::State& state) {
    Rng rng(3);
    Grid<float> in = random_grid(28, 28, rng);
    Grid<float> k = random_grid(3, 3, rng);
    Grid<float> out(28, 28);
    for (auto _ : state) {
        conv2d_same_acc(in.data(), 28, 28, k.data(), 3, 3, out.data());
        benchmark::DoNotOptimize(out.v.data());
    }
}
BENCHMARK(BM_Conv2dSame28x28k3);

static void BM_Deconv2dSame28x28k3(benchmark::State& state) {
    Rng rng(4);
    Grid<float> e = random_grid(28, 28, rng);
    Grid<float> k = random_grid(3, 3, rng);
    Grid<float> out(28, 28);
    for (auto _ : state) {
        deconv2d_same_acc(k.data(), 3, 3, e.data(), 28, 28, out.data());
        benchmark::DoNotOptimize(out.v.data());
    }
}
BENCHMARK(BM_Deconv2dSame28x28k3);

static void BM_WeightGrad28x28k3(benchmark::State& state) {
    Rng rng(5);
    Grid<float> in = random_grid(28, 28, rng);
    Grid<float> e = random_grid(28, 28, rng);
    Grid<float> out(3, 3);
    for (auto _ : state) {
        weight_grad_conv_acc(in.data(), 28, 28, e.data(), 28, 28, 3, 3, out.data());
        benchmark::DoNotOptimize(out.v.data());
    }
}
BENCHMARK(BM_WeightGrad28x28k3);

static void BM_InferDeskNet(benchmark::State& state) {
    Network<float> net = desk_net();
    FeatureStack<float> x = desk_input();
    for (auto _ : state) {
        LayerTrace<float> tr = infer(net, x);
        benchmark::DoNotOptimize(tr.head_post.data());
    }
}
BENCHMARK(BM_InferDeskNet);

static void BM_EkdaaUpdateDeskNet(benchmark::State& state) {
    Network<float> net = desk_net();
    FeatureStack<float> x = desk_input();
    LayerTrace<float> tr = infer(net, x);
    Vector<float> y = one_hot<float>(3, 10);
    RuleParams<float> params;
    UpdateSet<float> u = UpdateSet<float>::zeros_like(net, true);
    for (auto _ : state) {
        ekdaa_updates_acc(net, tr, y, params, u);
        benchmark::DoNotOptimize(u.head_w.v.data());
    }
}
BENCHMARK(BM_EkdaaUpdateDeskNet);

static void BM_BackpropUpdateDeskNet(benchmark::State& state) {
    Network<float> net = desk_net();
    FeatureStack<float> x = desk_input();
    LayerTrace<float> tr = infer(net, x);
    Vector<float> y = one_hot<float>(3, 10);
    UpdateSet<float> u = UpdateSet<float>::zeros_like(net, false);
    for (auto _ : state) {
        backprop_updates_acc(net, tr, y, u);
        benchmark::DoNotOptimize(u.head_w.v.data());
    }
}
BENCHMARK(BM_BackpropUpdateDeskNet);

BENCHMARK_MAIN();
