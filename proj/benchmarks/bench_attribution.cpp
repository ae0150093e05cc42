#include <benchmark/benchmark.h>

#include <random>

#include "harsanyi/cnn.hpp"
#include "harsanyi/estimators.hpp"
#include "harsanyi/game.hpp"
#include "harsanyi/mlp.hpp"
#include "harsanyi/rng.hpp"
#include "harsanyi/training.hpp"

namespace harsanyi {
namespace {

HarsanyiMlp mlp(int n, int units) {
  ModelConfig cfg;
  cfg.input_dim = n;
  cfg.units = {units, units, units};
  HarsanyiMlp m(cfg);
  init_params(m, {InitKind::kMlpFixedFanin, std::min(n, 10), 0.01}, 1);
  return m;
}

Sample sample(int n) {
  auto rng = make_rng(2, Stream::kSynthetic);
  Sample s;
  for (int i = 0; i < n; ++i) s.x.push_back(std::normal_distribution<double>(0, 1)(rng));
  return s;
}

void BM_ExactShapley(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto m = mlp(n, 100);
  const auto s = sample(n);
  for (auto _ : state) benchmark::DoNotOptimize(exact_shapley(m, s, 1, AndMode::kSoft));
}
BENCHMARK(BM_ExactShapley)->Arg(8)->Arg(12);

void BM_BruteForceShapley(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto m = mlp(n, 100);
  const auto s = sample(n);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_shapley(model_game(m, s, 1, AndMode::kSoft), n));
}
BENCHMARK(BM_BruteForceShapley)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_HarsanyiTransform(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  auto rng = make_rng(3, Stream::kSynthetic);
  GameTable g(n, GameKind::kReward);
  for (std::uint32_t b = 1; b < g.size(); ++b) g[b] = std::uniform_real_distribution<double>(-1, 1)(rng);
  for (auto _ : state) benchmark::DoNotOptimize(harsanyi_transform(g));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_HarsanyiTransform)->DenseRange(8, 20, 4);

void BM_MlpForward(benchmark::State& state) {
  const auto m = mlp(12, static_cast<int>(state.range(0)));
  const auto s = sample(12);
  const auto mode = state.range(1) ? AndMode::kSoft : AndMode::kHard;
  for (auto _ : state) benchmark::DoNotOptimize(model_output(m, s, PlayerSet::full(12), mode));
}
BENCHMARK(BM_MlpForward)->Args({100, 0})->Args({100, 1})->Args({300, 1});

void BM_CnnForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  CnnConfig cfg;
  cfg.stem = {1, side, side, 3, 8, 1};
  HarsanyiCnn m(cfg);
  init_params(m, {InitKind::kCnnGaussian, 0, 0.01}, 4);
  auto rng = make_rng(5, Stream::kSynthetic);
  std::vector<double> img(cfg.image_size());
  for (double& v : img) v = std::uniform_real_distribution<double>(0, 1)(rng);
  const FieldSet all = ~FieldSet(m.locations(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(cnn_output(m, cnn_forward(m, img, all, AndMode::kSoft)));
}
BENCHMARK(BM_CnnForward)->Arg(8)->Arg(16);

void BM_Estimator(benchmark::State& state) {
  const auto kind = static_cast<EstimatorKind>(state.range(0));
  const auto m = mlp(12, 100);
  const auto s = sample(12);
  const auto game = model_game(m, s, 1, AndMode::kSoft);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_estimator(kind, game, 12, {208, ++seed}));
  state.SetLabel(std::string(estimator_name(kind)));
}
BENCHMARK(BM_Estimator)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace harsanyi

BENCHMARK_MAIN();
