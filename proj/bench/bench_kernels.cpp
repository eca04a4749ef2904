// Serial reference kernels against their OpenMP counterparts.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "hsal/data.hpp"
#include "hsal/eval.hpp"
#include "hsal/experiment.hpp"
#include "hsal/kernels.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = hsal::unit_uniform(rng) - 0.5;
  return v;
}

template <auto Kernel>
void BM_gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

BENCHMARK(BM_gemm<hsal::kernels::serial::gemm>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<hsal::kernels::parallel::gemm>)->Name("gemm/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<hsal::kernels::serial::gemm_nt>)->Name("gemm_nt/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<hsal::kernels::parallel::gemm_nt>)->Name("gemm_nt/parallel")->Arg(64)->Arg(256);

// Ranking over a 5000-item vocabulary with precomputed scores.
template <bool Parallel>
void BM_evaluate(benchmark::State& state) {
  const std::size_t users = 2000, items = 5000;
  std::vector<hsal::EvalCase> cases;
  for (std::size_t u = 0; u < users; ++u) {
    cases.push_back({static_cast<hsal::UserId>(u), static_cast<hsal::ItemId>(u % items), 1, {}});
  }
  hsal::Scorer scorer = [&](const hsal::EvalCase& c) {
    return random_values(items, c.user);
  };
  hsal::EvalConfig cfg;
  for (auto _ : state) {
    auto r = Parallel ? hsal::evaluate_parallel(cases, scorer, cfg)
                      : hsal::evaluate_serial(cases, scorer, cfg);
    benchmark::DoNotOptimize(r.hit.data());
  }
}

BENCHMARK(BM_evaluate<false>)->Name("evaluate/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_evaluate<true>)->Name("evaluate/parallel")->Unit(benchmark::kMillisecond);

// One 50-example batch of loss gradients on a small sequential dataset.
template <bool Parallel>
void BM_batch_gradient(benchmark::State& state) {
  hsal::SyntheticConfig syn;
  syn.mode = hsal::SyntheticMode::Sequential;
  syn.n_users = 200;
  syn.n_items = 60;
  syn.n_sequential_items = 60;
  syn.n_series_min = syn.n_series_max = 10;
  static const auto data = hsal::prepare(hsal::generate_synthetic(syn));
  hsal::ModelConfig mc;
  mc.n_users = data.n_users;
  mc.n_items = data.n_items;
  mc.dim = 16;
  mc.layers = 2;
  auto params = hsal::ModelParams::init(mc, 1);
  hsal::SamplingConfig sampling;
  sampling.m = 2;
  hsal::GradientBuffer grads(params.tensors());
  auto batch = std::span<const hsal::TrainingExample>(data.examples).first(50);
  const auto threads = static_cast<std::size_t>(omp_get_max_threads());
  for (auto _ : state) {
    grads.zero();
    auto r = Parallel ? hsal::batch_gradient_parallel(params, data.train_graph, batch, sampling,
                                                      grads, threads)
                      : hsal::batch_gradient_serial(params, data.train_graph, batch, sampling, grads);
    benchmark::DoNotOptimize(r.loss_sum);
  }
}

BENCHMARK(BM_batch_gradient<false>)->Name("batch_gradient/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch_gradient<true>)->Name("batch_gradient/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
