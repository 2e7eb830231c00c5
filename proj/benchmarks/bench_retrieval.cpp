#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "memsam/memory_bank.hpp"

namespace memsam {
namespace {

MemoryBank random_bank(std::size_t size, std::uint32_t dim) {
  std::mt19937_64 rng(3);
  std::vector<ExemplarInput> inputs;
  for (std::size_t k = 0; k < size; ++k) {
    FeatureGrid g = bench::random_grid(rng, 2, 2, dim);
    inputs.push_back({"e" + std::to_string(k), "e.png", BinaryMask(32, 32), std::move(g)});
  }
  return build_bank(std::move(inputs));
}

// Args: bank size, descriptor dim.
void BM_Retrieve(benchmark::State& state) {
  const auto size = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::uint32_t>(state.range(1));
  const MemoryBank bank = random_bank(size, dim);
  std::mt19937_64 rng(4);
  const auto query = global_descriptor(bench::random_grid(rng, 4, 4, dim));
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieve(query, bank, 1));
  }
  state.SetItemsProcessed(state.iterations() * size);
}
BENCHMARK(BM_Retrieve)->Args({100, 1024})->Args({1000, 1024})->Args({5000, 768});

void BM_Dedup(benchmark::State& state) {
  const MemoryBank bank = random_bank(static_cast<std::size_t>(state.range(0)), 256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dedup(bank, 0.995));
  }
}
BENCHMARK(BM_Dedup)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace memsam
