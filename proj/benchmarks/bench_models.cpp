#include <benchmark/benchmark.h>

#include <random>

#include "wavedef/attacks.hpp"
#include "wavedef/classifier.hpp"
#include "wavedef/denoiser.hpp"
#include "wavedef/losses.hpp"

namespace {

using namespace wavedef;

void BM_DenoiserForward(benchmark::State& state) {
  const int64_t batch = state.range(0);
  DenoiserConfig config;
  Denoiser model = Denoiser::init(config, 1);
  std::mt19937_64 rng(7);
  Tensor x = Tensor::uniform({batch, 1, 32, 32}, 0.0, 1.0, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x).data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserForward)->Arg(1)->Arg(8);

void BM_DenoiserTrainStep(benchmark::State& state) {
  const int64_t batch = state.range(0);
  DenoiserConfig config;
  Denoiser model = Denoiser::init(config, 1);
  auto params = model.parameters();
  std::mt19937_64 rng(8);
  Tensor x = Tensor::uniform({batch, 1, 32, 32}, 0.0, 1.0, rng);
  Tensor target = Tensor::uniform({batch, 1, 32, 32}, 0.0, 1.0, rng);
  for (auto _ : state) {
    Tape tape;
    Tensor loss = charbonnier_loss(model.forward(x), target, 1e-3);
    tape.backward(loss);
    for (auto& p : params) p.zero_grad();
    benchmark::DoNotOptimize(loss.item());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserTrainStep)->Arg(4)->Arg(8);

void BM_ClassifierForward(benchmark::State& state) {
  Classifier model = Classifier::init(1, 9);
  std::mt19937_64 rng(10);
  Tensor x = Tensor::uniform({32, 1, 32, 32}, 0.0, 1.0, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(x).data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_ClassifierForward);

void BM_FgsmBatch(benchmark::State& state) {
  Classifier model = Classifier::init(1, 11);
  std::mt19937_64 rng(12);
  Tensor x = Tensor::uniform({32, 1, 32, 32}, 0.0, 1.0, rng);
  std::vector<int> labels(32, 3);
  AttackSpec spec;
  spec.family = AttackFamily::Fgsm;
  spec.epsilon = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_attack(x, labels, model, spec).data());
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_FgsmBatch);

}  // namespace
