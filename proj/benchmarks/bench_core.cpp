// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "gdu/bptt.hpp"

namespace {

using namespace gdu;

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Matrix a(n, n), b(n, n);
  for (auto& v : a.data) v = rng.uniform(-1, 1);
  for (auto& v : b.data) v = rng.uniform(-1, 1);
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

Model bench_model(CellKind kind, std::size_t k) {
  CellConfig cfg;
  cfg.kind = kind;
  cfg.input_size = 2;
  cfg.state_size = k;
  if (kind == CellKind::gdu) cfg.groups = GroupSpec::uniform(10, k / 10, 1.0);
  Rng rng(7);
  return init_model(cfg, 1, rng);
}

void BM_CellStep(benchmark::State& state) {
  const auto kind = static_cast<CellKind>(state.range(0));
  Model m = bench_model(kind, 100);
  Rng rng(3);
  Matrix x(20, 2), s(20, 100), h;
  for (auto& v : x.data) v = rng.uniform(-1, 1);
  if (kind == CellKind::lstm) h = Matrix(20, 100, 0.0);
  for (auto _ : state) {
    step_batch(m.config, m.cell, x, s, h);
    benchmark::DoNotOptimize(s.data.data());
  }
}
BENCHMARK(BM_CellStep)
    ->Arg(static_cast<int>(CellKind::srn))
    ->Arg(static_cast<int>(CellKind::lstm))
    ->Arg(static_cast<int>(CellKind::gru))
    ->Arg(static_cast<int>(CellKind::gdu));

void BM_ForwardBackward(benchmark::State& state) {
  const std::size_t t_len = static_cast<std::size_t>(state.range(0));
  Model m = bench_model(CellKind::gdu, 100);
  Rng rng(5);
  Batch batch;
  batch.loss = LossKind::mse_final;
  batch.inputs.assign(t_len, Matrix(20, 2));
  for (auto& xm : batch.inputs)
    for (auto& v : xm.data) v = rng.uniform(0, 1);
  batch.final_targets = Matrix(20, 1, 1.0);
  for (auto _ : state) {
    UnrollTape tape;
    forward(m, batch, &tape);
    Gradients g = backward(m, batch, tape);
    benchmark::DoNotOptimize(g.out.b.data());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
