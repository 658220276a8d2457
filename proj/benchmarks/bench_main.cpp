// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <benchmark/benchmark.h>

#include "eras/loss_graph.hpp"
#include "eras/masknet.hpp"
#include "eras/relative_rir.hpp"
#include "eras/rng.hpp"
#include "eras/scene.hpp"
#include "eras/stft.hpp"
#include "eras/trainer.hpp"

using namespace eras;

namespace {

std::vector<double> random_signal(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = rng.normal();
  return out;
}

void BM_StftRoundTrip(benchmark::State& state) {
  const StftConfig cfg;
  const auto x = random_signal(1, 16000);
  for (auto _ : state) {
    const Spectrogram s = stft(x, cfg);
    benchmark::DoNotOptimize(istft(s, cfg, 16000));
  }
}
BENCHMARK(BM_StftRoundTrip);

void BM_FcpMap(benchmark::State& state) {
  const StftConfig cfg;
  const auto a = random_signal(2, 16000);
  const auto b = random_signal(3, 16000);
  const Spectrogram est = stft(a, cfg);
  const Spectrogram target = stft(b, cfg);
  const LambdaWeights lambda = compute_lambda({target}, 1e-4);
  FcpConfig fcp;
  fcp.k_past = static_cast<int>(state.range(0));
  fcp.k_future = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fcp_map(est, target, lambda, fcp));
  }
}
BENCHMARK(BM_FcpMap)->Arg(4)->Arg(19);

void BM_WienerMap(benchmark::State& state) {
  const Waveform est(random_signal(4, 16000), 8000);
  const Waveform target(random_signal(5, 16000), 8000);
  WienerConfig cfg;
  cfg.filter_length = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(wiener_map(est, target, cfg));
  }
}
BENCHMARK(BM_WienerMap)->Arg(128)->Arg(512);

void BM_TrainStep(benchmark::State& state) {
  DatasetConfig dc;
  dc.train_scenes = 2;
  dc.val_scenes = 1;
  dc.seed = 6;
  const SceneDataset data = make_toy_dataset(dc, 0);
  TrainConfig cfg;
  cfg.threads = 1;
  cfg.batch_scenes = 1;
  TrainerState st = TrainerState::fresh(cfg);
  LossWeights w;
  w.beta = 0.3;
  w.gamma = state.range(0) ? 0.1 : 0.0;
  const std::vector<const MixtureScene*> batch{&data.train[0]};
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(st, cfg, batch, w, cfg.lr));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
