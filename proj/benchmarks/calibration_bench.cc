#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "daca/align.h"
#include "daca/metrics.h"
#include "daca/synthetic.h"

namespace {

daca::Dataset Mixture(std::size_t n, std::size_t k) {
  daca::MixtureConfig cfg;
  cfg.n = n;
  cfg.k = k;
  cfg.seed = 1;
  cfg.acc_f_agree = cfg.acc_g_agree = 0.7;
  cfg.acc_f_dis = 0.35;
  cfg.acc_g_dis = 0.55;
  return daca::GenerateMixture(cfg);
}

void BM_Softmax(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> z(state.range(0));
  for (auto& x : z) x = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(daca::Softmax(z, 1.7));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Softmax)->Arg(4)->Arg(32)->Arg(1024);

void BM_Ece(benchmark::State& state) {
  const auto ds = Mixture(state.range(0), 4);
  const auto samples = daca::MakeEvalSamples(ds, daca::ScalingParams::Scalar(1.0));
  for (auto _ : state) {
    const auto p = daca::Partition(samples, daca::BinScheme::kEqualWidth, 10);
    benchmark::DoNotOptimize(daca::Ece(samples, p));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Ece)->Arg(1000)->Arg(100000);

void BM_Aece(benchmark::State& state) {
  const auto ds = Mixture(state.range(0), 4);
  const auto samples = daca::MakeEvalSamples(ds, daca::ScalingParams::Scalar(1.0));
  for (auto _ : state) benchmark::DoNotOptimize(daca::Aece(samples, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Aece)->Arg(1000)->Arg(100000);

void BM_BatchGradient(benchmark::State& state) {
  const auto kind = static_cast<daca::ScalingKind>(state.range(0));
  const auto ds = Mixture(256, 10);
  const auto records = daca::SelectTrainingRecords(ds, daca::Objective::kDaca);
  const auto params = daca::ScalingParams::Identity(kind, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        daca::BatchLossAndGradient(records, daca::Objective::kDaca, params));
  }
  state.SetItemsProcessed(state.iterations() * records.size());
}
BENCHMARK(BM_BatchGradient)
    ->Arg(static_cast<int>(daca::ScalingKind::kScalar))
    ->Arg(static_cast<int>(daca::ScalingKind::kVector))
    ->Arg(static_cast<int>(daca::ScalingKind::kMatrix));

void BM_OptimizeScalar(benchmark::State& state) {
  const auto ds = Mixture(state.range(0), 4);
  daca::OptimizerConfig cfg;
  cfg.epochs = 10;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        daca::Optimize(ds, daca::Objective::kDaca, daca::ScalingKind::kScalar, cfg));
  }
}
BENCHMARK(BM_OptimizeScalar)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_GridSearch(benchmark::State& state) {
  const auto ds = Mixture(2000, 4).AgreementSubset();
  const daca::TemperatureGrid grid{0.05, 100.0, static_cast<int>(state.range(0)), true};
  for (auto _ : state) {
    benchmark::DoNotOptimize(daca::GridSearchTemperature(ds, daca::Objective::kNaive, grid));
  }
}
BENCHMARK(BM_GridSearch)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
