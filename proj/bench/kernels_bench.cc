#include <benchmark/benchmark.h>

#include "hoigen/kernels.h"
#include "hoigen/rng.h"

namespace hoigen {
namespace {

Matrix Random(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.Normal();
  return m;
}

template <void (*Kernel)(const Matrix&, const Matrix&, Matrix*)>
void BM_MatMulNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = Random(n, 512, 1), b = Random(n, 512, 2);
  Matrix c;
  for (auto _ : state) {
    Kernel(a, b, &c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * 512);
}

template <void (*Kernel)(const Matrix&, const Matrix&, const Matrix&, Matrix*)>
void BM_BankScores(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix q = Random(256, 512, 3), k = Random(n, 512, 4), v = Random(n, 600, 5);
  Matrix s;
  for (auto _ : state) {
    Kernel(q, k, v, &s);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(state.iterations() * 256 * n * (512 + 600));
}

BENCHMARK(BM_MatMulNT<kernels::serial::MatMulNT>)->Name("MatMulNT/serial")->Arg(128)->Arg(512);
BENCHMARK(BM_MatMulNT<kernels::parallel::MatMulNT>)->Name("MatMulNT/parallel")->Arg(128)->Arg(512)->UseRealTime();
BENCHMARK(BM_BankScores<kernels::serial::BankScores>)->Name("BankScores/serial")->Arg(1200)->Arg(4800);
BENCHMARK(BM_BankScores<kernels::parallel::BankScores>)
    ->Name("BankScores/parallel")
    ->Arg(1200)
    ->Arg(4800)
    ->UseRealTime();

}  // namespace
}  // namespace hoigen

BENCHMARK_MAIN();
