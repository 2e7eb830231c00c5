#include <benchmark/benchmark.h>

#include "memsam/dataset.hpp"
#include "memsam/metrics.hpp"
#include "memsam/mock_backend.hpp"

namespace memsam {
namespace {

void BM_MockFeatures(benchmark::State& state) {
  const auto sample = synth_dataset(1, 5, SynthFamily::Simple)[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(mock_features(sample.image));
  }
}
BENCHMARK(BM_MockFeatures)->Unit(benchmark::kMicrosecond);

void BM_MockSegment(benchmark::State& state) {
  const auto sample = synth_dataset(1, 5, SynthFamily::Adversarial)[0];
  const PromptSet prompts = build_prompt_set({{80, 80}, 1}, {{{8, 8}, 0}, {{150, 150}, 0}});
  for (auto _ : state) {
    benchmark::DoNotOptimize(mock_segment(sample.image, prompts, MockParams{}.tolerances));
  }
}
BENCHMARK(BM_MockSegment)->Unit(benchmark::kMicrosecond);

void BM_ComputeMetrics(benchmark::State& state) {
  const auto samples = synth_dataset(2, 6, SynthFamily::Simple);
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_metrics(samples[0].mask, samples[1].mask));
  }
}
BENCHMARK(BM_ComputeMetrics)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace memsam
