#include <benchmark/benchmark.h>

#include <random>

#include "aquinv/net/loss.hpp"
#include "aquinv/net/network.hpp"

using namespace aquinv::net;

namespace {

Tensor4<float> random_input(int n, int c, int h, int w) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> gauss;
  Tensor4<float> t(n, c, h, w);
  for (auto& v : t.data) v = gauss(rng);
  return t;
}

}  // namespace

static void ConvForward(benchmark::State& state) {
  Conv2d<float> conv(72, 16, 3, 1, 1);
  std::mt19937_64 rng(2);
  conv.init_kaiming(rng);
  Tensor4<float> x = random_input(static_cast<int>(state.range(0)), 72, 11, 21);
  for (auto _ : state) {
    Tensor4<float> y = conv.forward(x, true);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(ConvForward)->Arg(16)->Arg(64);

static void DeskNetForward(benchmark::State& state) {
  EncoderDecoder<float> net(desk_network_spec(3, 2), 1);
  Tensor4<float> x = random_input(static_cast<int>(state.range(0)), 3, 21, 41);
  for (auto _ : state) {
    Tensor4<float> y = net.forward(x, true);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(DeskNetForward)->Arg(8)->Arg(64);

static void DeskNetTrainStep(benchmark::State& state) {
  EncoderDecoder<float> net(desk_network_spec(3, 2), 1);
  const int batch = static_cast<int>(state.range(0));
  Tensor4<float> x = random_input(batch, 3, 21, 41);
  Tensor4<float> target = random_input(batch, 2, 21, 41);
  auto params = net.params();
  for (auto _ : state) {
    net.zero_grad();
    Tensor4<float> pred = net.forward(x, true);
    auto loss = weighted_l1_loss(pred, target, {}, 0.0, 5e-5, params);
    net.backward(loss.grad);
    benchmark::DoNotOptimize(loss.value);
  }
}
BENCHMARK(DeskNetTrainStep)->Arg(16)->Arg(64);

static void PaperNetForward(benchmark::State& state) {
  EncoderDecoder<float> net(paper_network_spec(3, 2), 1);
  Tensor4<float> x = random_input(1, 3, 41, 81);
  for (auto _ : state) {
    Tensor4<float> y = net.forward(x, false);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(PaperNetForward);
