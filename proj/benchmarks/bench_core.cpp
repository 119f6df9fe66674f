#include <benchmark/benchmark.h>

#include "addm/anodetect.hpp"
#include "addm/diffusion.hpp"
#include "addm/metrics.hpp"
#include "addm/nets.hpp"
#include "addm/phantoms.hpp"
#include "addm/rng.hpp"
#include "addm/training.hpp"

namespace {

using namespace addm;

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.T = 100;
  cfg.batch_size = 8;
  return cfg;
}

void BM_DenoiserForward(benchmark::State& state) {
  DenoiserConfig cfg;
  cfg.base_width = static_cast<int>(state.range(0));
  DenoiserParams dp = init_denoiser(cfg, 1);
  GaussianRng rng(2);
  Tensor x = rng.normal({8, 1, 16, 16});
  std::vector<int> ts(8, 50);
  for (auto _ : state) {
    Tensor y = denoiser_forward(dp, x, ts);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_DenoiserForward)->Arg(16)->Arg(32)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg = desk_config();
  cfg.denoiser.base_width = static_cast<int>(state.range(0));
  PhantomSpec spec;
  spec.seed = 3;
  Tensor batch({8, 1, 16, 16});
  for (int i = 0; i < 8; ++i) {
    Tensor img = generate_normal(spec, i);
    std::copy(img.data(), img.data() + img.numel(), batch.data() + i * img.numel());
  }
  TrainState ts = init_train_state(cfg);
  for (auto _ : state) {
    LossBreakdown bd = train_step(ts, batch, cfg);
    benchmark::DoNotOptimize(bd.l_total);
  }
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(32);

void BM_ReverseChainStep(benchmark::State& state) {
  DenoiserConfig cfg;
  DenoiserParams dp = init_denoiser(cfg, 4);
  NoiseSchedule s = make_linear_schedule(300, 1e-4, 0.02);
  GaussianRng rng(5);
  Tensor x = rng.normal({1, 1, 16, 16});
  Tensor z = rng.normal({1, 1, 16, 16});
  std::vector<int> ts{150};
  for (auto _ : state) {
    Tensor eps = denoiser_forward(dp, x, ts);
    Tensor y = reverse_step(x, 150, eps, z, s, SigmaMode::kBeta);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_ReverseChainStep);

void BM_PartialReconstruct(benchmark::State& state) {
  DenoiserConfig cfg;
  DenoiserParams dp = init_denoiser(cfg, 6);
  NoiseSchedule s = make_linear_schedule(300, 1e-4, 0.02);
  PhantomSpec spec;
  spec.seed = 7;
  Tensor img = generate_normal(spec, 0);
  for (auto _ : state) {
    Tensor y = partial_reconstruct(dp, s, SigmaMode::kBeta, img, 75, 8);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_PartialReconstruct)->Unit(benchmark::kMillisecond);

void BM_PhantomGeneration(benchmark::State& state) {
  PhantomSpec spec;
  spec.size = static_cast<int>(state.range(0));
  spec.seed = 9;
  int index = 0;
  for (auto _ : state) {
    Tensor img = generate_normal(spec, index++);
    benchmark::DoNotOptimize(img.data());
  }
}
BENCHMARK(BM_PhantomGeneration)->Arg(16)->Arg(32);

void BM_PixelAuc(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  Pcg32 rng(10);
  std::vector<double> scores(n);
  std::vector<uint8_t> labels(n);
  for (size_t i = 0; i < n; ++i) {
    scores[i] = rng.next_double();
    labels[i] = static_cast<uint8_t>(rng.next_below(2));
  }
  labels[0] = 1;
  labels[1] = 0;
  for (auto _ : state) {
    double auc = pixel_auc(scores, labels);
    benchmark::DoNotOptimize(auc);
  }
}
BENCHMARK(BM_PixelAuc)->Arg(1 << 10)->Arg(1 << 16);

}  // namespace

BENCHMARK_MAIN();
