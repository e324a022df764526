#include <benchmark/benchmark.h>

#include "gradorth/matrix.hpp"
#include "gradorth/rng.hpp"
#include "gradorth/scorer.hpp"
#include "gradorth/subspace.hpp"
#include "gradorth/svd.hpp"
#include "gradorth/synth.hpp"
#include "gradorth/trainer.hpp"

using namespace gradorth;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = gaussian(n, n, 1);
  const Matrix b = gaussian(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity(benchmark::oNCubed);

void BM_SvdThin(benchmark::State& state) {
  const Matrix a = gaussian(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(svd_thin(a));
}
BENCHMARK(BM_SvdThin)->Args({16, 10})->Args({32, 30})->Args({64, 32})->Args({65, 200});

void BM_ScoreBatch(benchmark::State& state) {
  PlantedParams p;
  p.n_ood = 1000;
  const SplitSet data = gen_planted_subspace(p, 0);
  const Network net = train_sgd(Network({LayerSpec::dense(16, 2, Activation::identity, false)}, Loss::cross_entropy, 0),
                                data.train, TrainOptions{0.5, 20, 16, 0});
  std::vector<Subspace> subs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) subs.push_back(build_subspace(net, data.train, 0, 5, 0.97, seed));
  ScoreConfig cfg;
  cfg.threads = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(score_batch(net, subs, data.ood_test, cfg));
  state.SetItemsProcessed(state.iterations() * 1000 * 5);
}
BENCHMARK(BM_ScoreBatch)->Arg(1)->Arg(4)->UseRealTime();

}  // namespace
BENCHMARK_MAIN();
