#include <benchmark/benchmark.h>

#include "dfcnn/ops.hpp"
#include "dfcnn/training.hpp"

using namespace dfcnn;

namespace {

TensorF random_tensor(Shape shape, Rng& rng) {
  TensorF t(shape);
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// args: spatial size, channels, kernel, dilation
void BM_Conv2dForward(benchmark::State& state) {
  const auto s = state.range(0);
  const auto c = state.range(1);
  const int k = static_cast<int>(state.range(2));
  const int d = static_cast<int>(state.range(3));
  Rng rng(1);
  const TensorF x = random_tensor({2, s, s, c}, rng);
  const TensorF w = random_tensor(conv_weight_shape(k, c, c), rng);
  const TensorF b = random_tensor(bias_shape(c), rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, d));
  state.SetItemsProcessed(state.iterations() * 2 * s * s * c * c * k * k);
}
BENCHMARK(BM_Conv2dForward)
    ->Args({64, 8, 3, 1})
    ->Args({64, 8, 5, 2})
    ->Args({32, 16, 3, 1})
    ->Args({16, 32, 1, 1})
    ->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto s = state.range(0);
  const auto c = state.range(1);
  const int k = static_cast<int>(state.range(2));
  Rng rng(2);
  const TensorF x = random_tensor({2, s, s, c}, rng);
  const TensorF w = random_tensor(conv_weight_shape(k, c, c), rng);
  const TensorF dy = random_tensor({2, s, s, c}, rng);
  TensorF dx;
  TensorF dw;
  TensorF db;
  for (auto _ : state) {
    conv2d_backward(x, w, 1, dy, &dx, &dw, &db);
    benchmark::DoNotOptimize(dx.data().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 8, 3})->Args({32, 16, 3})->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const auto size = static_cast<int>(state.range(0));
  const auto net = build_network<float>(NetworkConfig::scaled({8, 12, 16}, size), 3);
  Rng rng(4);
  const TensorF batch = random_tensor({2, size, size, 3}, rng);
  const std::vector<float> labels = {0.0f, 1.0f};
  std::vector<TensorF> grads;
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(net, batch, labels, grads));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
