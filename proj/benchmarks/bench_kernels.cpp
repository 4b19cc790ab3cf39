#include <benchmark/benchmark.h>

#include <memory>

#include "pqspectra/descent.hpp"
#include "pqspectra/functionals.hpp"
#include "pqspectra/problem.hpp"
#include "pqspectra/threshold.hpp"

using namespace pqspectra;

namespace {

// range(0) = 1 for intervals with range(1) elements, 2 for an n x n square.
ProblemSpec fixture(const benchmark::State& state) {
  const int n = static_cast<int>(state.range(1));
  auto mesh = state.range(0) == 1 ? std::make_shared<const Mesh>(build_interval_mesh(n, 0.0, 1.0))
                                  : std::make_shared<const Mesh>(build_rectangle_mesh(n, n, {0.0, 1.0, 0.0, 1.0}));
  return make_problem(mesh, 1.5, 3.0, ConstantWeight{1.0}, ConstantWeight{0.0});
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int n : {256, 4096}) b->Args({1, n});
  for (int n : {32, 128}) b->Args({2, n});
}

void BM_Functionals(benchmark::State& state) {
  const auto spec = fixture(state);
  const auto u = random_smooth_field(spec.domain(), 7);
  for (auto _ : state) benchmark::DoNotOptimize(terms::evaluate(spec, u.values()));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(u.size()));
}
BENCHMARK(BM_Functionals)->Apply(sizes);

void BM_Gradients(benchmark::State& state) {
  const auto spec = fixture(state);
  const auto u = random_smooth_field(spec.domain(), 7);
  terms::Gradients d;
  for (auto _ : state) {
    terms::gradients(spec, u.values(), d);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(u.size()));
}
BENCHMARK(BM_Gradients)->Apply(sizes);

void BM_WeakResidual(benchmark::State& state) {
  const auto spec = fixture(state);
  const auto u = project_to_cone(spec, random_smooth_field(spec.domain(), 7)).field;
  for (auto _ : state) benchmark::DoNotOptimize(weak_residual_norm(spec, 50.0, u));
}
BENCHMARK(BM_WeakResidual)->Apply(sizes);

void BM_ConeProjection(benchmark::State& state) {
  const auto spec = fixture(state);
  const auto u = random_smooth_field(spec.domain(), 7);
  for (auto _ : state) benchmark::DoNotOptimize(project_to_cone(spec, u));
}
BENCHMARK(BM_ConeProjection)->Apply(sizes);

void BM_Preconditioner(benchmark::State& state) {
  const auto spec = fixture(state);
  const H1Preconditioner preconditioner(spec.domain());
  const auto u = random_smooth_field(spec.domain(), 7);
  std::vector<double> out(u.size());
  for (auto _ : state) {
    preconditioner.apply(u.values(), out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Preconditioner)->Apply(sizes);

void BM_Lambda1(benchmark::State& state) {
  const auto spec = fixture(state);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lambda1(spec).lambda1);
}
BENCHMARK(BM_Lambda1)->Args({1, 256})->Args({2, 32})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
