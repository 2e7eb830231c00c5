#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "memsam/correspondence.hpp"

namespace memsam {
namespace {

// Args: grid side, embedding dim.
void BM_MatchConstrained(benchmark::State& state) {
  const auto side = static_cast<std::uint32_t>(state.range(0));
  const auto dim = static_cast<std::uint32_t>(state.range(1));
  std::mt19937_64 rng(1);
  const FeatureGrid query = bench::random_grid(rng, side, side, dim);
  const FeatureGrid ref = bench::random_grid(rng, side, side, dim);
  const PatchLabelGrid labels = bench::centre_square(side, side);
  const MatchConfig config{0.0, 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(match_constrained(query, ref, labels, config));
  }
  state.SetItemsProcessed(state.iterations() * side * side * side * side);
}
BENCHMARK(BM_MatchConstrained)
    ->Args({8, 16})
    ->Args({32, 14})
    ->Args({32, 256})
    ->Args({32, 1024})
    ->Args({64, 1024})
    ->Unit(benchmark::kMillisecond);

void BM_SimilarityRow(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const FeatureGrid query = bench::random_grid(rng, 32, 32, 1024);
  const FeatureGrid ref = bench::random_grid(rng, 32, 32, 1024);
  std::vector<std::size_t> all(ref.patch_count());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(similarity_row(query, i, ref, all));
    i = (i + 1) % query.patch_count();
  }
}
BENCHMARK(BM_SimilarityRow)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace memsam
