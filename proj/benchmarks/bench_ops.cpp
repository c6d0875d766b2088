#include <benchmark/benchmark.h>

#include <random>

#include "wavedef/ops.hpp"
#include "wavedef/wavelet.hpp"

namespace {

using namespace wavedef;

void BM_Matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  std::mt19937_64 rng(1);
  Tensor a = Tensor::randn({n, n}, rng);
  Tensor b = Tensor::randn({n, n}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b).data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_PointwiseConv(benchmark::State& state) {
  std::mt19937_64 rng(2);
  Tensor x = Tensor::randn({8, 48, 32, 32}, rng);
  Tensor w = Tensor::randn({144, 48, 1, 1}, rng);
  Tensor b = Tensor::randn({144}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, w, b, 1, 0, 1).data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * 8 * 144 * 48 * 32 * 32);
}
BENCHMARK(BM_PointwiseConv);

void BM_DepthwiseConv(benchmark::State& state) {
  std::mt19937_64 rng(3);
  Tensor x = Tensor::randn({8, 144, 32, 32}, rng);
  Tensor w = Tensor::randn({144, 1, 3, 3}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, w, Tensor(), 1, 1, 144).data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * 8 * 144 * 9 * 32 * 32);
}
BENCHMARK(BM_DepthwiseConv);

void BM_DenseConv3x3(benchmark::State& state) {
  std::mt19937_64 rng(4);
  Tensor x = Tensor::randn({8, 16, 32, 32}, rng);
  Tensor w = Tensor::randn({16, 16, 3, 3}, rng);
  Tensor b = Tensor::randn({16}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, w, b, 1, 1, 1).data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * 8 * 16 * 16 * 9 * 32 * 32);
}
BENCHMARK(BM_DenseConv3x3);

void BM_Dwt2(benchmark::State& state) {
  std::mt19937_64 rng(5);
  Tensor x = Tensor::randn({8, 1, 32, 32}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dwt2(x).ll.data());
  }
}
BENCHMARK(BM_Dwt2);

void BM_Gelu(benchmark::State& state) {
  std::mt19937_64 rng(6);
  Tensor x = Tensor::randn({8, 96, 32, 32}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gelu(x).data());
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Gelu);

}  // namespace

BENCHMARK_MAIN();
