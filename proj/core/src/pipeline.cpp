#include "memsam/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "memsam/error.hpp"
#include "random.hpp"

namespace memsam {

namespace fs = std::filesystem;

namespace {

// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception
// escaping a body is rethrown after all workers stop.
template <typename Body>
void parallel_for(std::size_t n, std::size_t jobs, Body&& body) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

void mark_failed(ImageResult& r, const Error& e) {
  r.failed = true;
  r.failure = e.what();
  r.scores = {};
  r.bg_points_in_mask = 0;
  r.leak_points = 0;
}

// Prompting, segmentation and scoring for an analysed query.
void finish_query(ImageResult& r, const QueryAnalysis& analysis, const Sample& sample,
                  const BinaryMask& gt, const Backend& backend, const PromptPolicy& policy) {
  r.exemplar_id = analysis.exemplar_id;
  r.retrieval_similarity = analysis.hit.similarity;
  r.fg_candidates = analysis.matches.fg.size();
  r.bg_candidates = analysis.matches.bg.size();
  try {
    PromptOutcome outcome = make_prompts(analysis.matches, policy);
    if (outcome.warning) r.warnings.push_back(*outcome.warning);
    r.bg_prompts = outcome.prompts.background().size();
    r.prompts = outcome.prompts;
    const SegmentOutcome seg = segment_query(sample.image, outcome.prompts, backend);
    const BinaryMask& mask = seg.mask();
    r.scores = compute_metrics(mask, gt);
    for (Point p : outcome.would_be_bg) {
      if (!mask.contains(p)) continue;
      ++r.bg_points_in_mask;
      if (!gt.contains(p)) ++r.leak_points;
    }
  } catch (const Error& e) {
    mark_failed(r, e);
  }
}

ImageResult process_query(const Sample& sample, const MemoryBank& bank,
                          const Backend& backend, const PipelineConfig& config) {
  const BinaryMask gt = read_mask_png(sample.mask);
  ImageResult r;
  r.id = sample.id;
  try {
    const QueryAnalysis analysis = analyze_query(sample.image, bank, backend, config.match);
    finish_query(r, analysis, sample, gt, backend, config.policy);
  } catch (const Error& e) {
    mark_failed(r, e);
  }
  return r;
}

EvalReport assemble(std::vector<ImageResult> results, nlohmann::json config) {
  std::sort(results.begin(), results.end(),
            [](const ImageResult& a, const ImageResult& b) { return a.id < b.id; });
  EvalReport report;
  report.aggregate = aggregate_results(results);
  report.per_image = std::move(results);
  report.config = std::move(config);
  return report;
}

nlohmann::json run_config(const PipelineConfig& config, const Backend& backend,
                          const MemoryBank& bank) {
  nlohmann::json j = config_to_json(config);
  j["backend"] = backend.describe();
  j["bank_size"] = bank.size();
  return j;
}

void require_bank(const MemoryBank& bank) {
  if (bank.empty()) throw Error(ErrorCode::EmptyBank, "memory bank is empty");
}

}  // namespace

QueryAnalysis analyze_query(const fs::path& image, const MemoryBank& bank,
                            const Backend& backend, const MatchConfig& match) {
  require_bank(bank);
  QueryAnalysis a;
  a.features = backend.extract_features(image);
  a.descriptor = global_descriptor(a.features);
  a.hit = retrieve(a.descriptor, bank, 1).front();
  const MemoryEntry& exemplar = bank.entry(a.hit.entry);
  a.exemplar_id = exemplar.id;
  const PatchLabelGrid labels = downsample_mask(*exemplar.mask, *exemplar.features);
  a.matches = match_constrained(a.features, *exemplar.features, labels, match);
  return a;
}

PromptOutcome make_prompts(const MatchResult& matches, const PromptPolicy& policy) {
  const PointPrompt fg = select_fg(matches.fg, policy.fg_strategy);
  std::vector<PointPrompt> bg = select_bg(matches.bg, policy.bg_mode, fg.point);
  PromptOutcome out;
  for (const auto& p : select_bg(matches.bg, BgMode::all(), fg.point)) {
    out.would_be_bg.push_back(p.point);
  }
  if (bg.empty()) {
    out.warning = "no background prompts (mode " + policy.bg_mode.label() +
                  "); the segmenter has no negatives to stop leakage";
  }
  out.prompts = build_prompt_set(fg, std::move(bg));
  return out;
}

SegmentOutcome segment_query(const fs::path& image, const PromptSet& prompts,
                             const Backend& backend) {
  SegmentOutcome out;
  out.candidates = backend.segment(image, prompts);
  out.best = select_best_index(out.candidates);
  return out;
}

Aggregate aggregate_results(const std::vector<ImageResult>& per_image) {
  Aggregate agg;
  agg.images = per_image.size();
  if (per_image.empty()) return agg;
  for (const auto& r : per_image) {
    agg.miou += r.scores.miou;
    agg.mpa += r.scores.mpa;
    agg.acc += r.scores.acc;
    agg.failures += r.failed ? 1 : 0;
    agg.leaks += r.leaked() ? 1 : 0;
  }
  const double n = static_cast<double>(per_image.size());
  agg.miou /= n;
  agg.mpa /= n;
  agg.acc /= n;
  return agg;
}

EvalReport run_pipeline(const std::vector<Sample>& queries, const MemoryBank& bank,
                        const Backend& backend, const PipelineConfig& config) {
  require_bank(bank);
  config.match.validate();
  std::vector<ImageResult> results(queries.size());
  parallel_for(queries.size(), config.jobs, [&](std::size_t i) {
    results[i] = process_query(queries[i], bank, backend, config);
  });
  return assemble(std::move(results), run_config(config, backend, bank));
}

std::vector<BgAblationRow> ablate_bg(const std::vector<Sample>& queries,
                                     const MemoryBank& bank, const Backend& backend,
                                     const std::vector<BgMode>& modes,
                                     const PipelineConfig& config, bool memoize) {
  require_bank(bank);
  std::vector<BgAblationRow> rows;
  if (!memoize) {
    for (const auto& mode : modes) {
      PipelineConfig c = config;
      c.policy.bg_mode = mode;
      rows.push_back({mode, run_pipeline(queries, bank, backend, c)});
    }
    return rows;
  }

  struct Memo {
    BinaryMask gt;
    std::optional<QueryAnalysis> analysis;
    std::optional<Error> error;
  };
  std::vector<Memo> memo(queries.size());
  parallel_for(queries.size(), config.jobs, [&](std::size_t i) {
    memo[i].gt = read_mask_png(queries[i].mask);
    try {
      memo[i].analysis = analyze_query(queries[i].image, bank, backend, config.match);
    } catch (const Error& e) {
      memo[i].error = e;
    }
  });

  for (const auto& mode : modes) {
    PipelineConfig c = config;
    c.policy.bg_mode = mode;
    std::vector<ImageResult> results(queries.size());
    parallel_for(queries.size(), config.jobs, [&](std::size_t i) {
      ImageResult& r = results[i];
      r.id = queries[i].id;
      if (memo[i].error) {
        mark_failed(r, *memo[i].error);
        return;
      }
      finish_query(r, *memo[i].analysis, queries[i], memo[i].gt, backend, c.policy);
    });
    rows.push_back({mode, assemble(std::move(results), run_config(c, backend, bank))});
  }
  return rows;
}

std::vector<std::size_t> sample_pool(std::size_t support_size, std::size_t size,
                                     std::uint64_t seed) {
  if (size == 0 || size > support_size) {
    throw Error(ErrorCode::ConfigError,
                "pool size " + std::to_string(size) + " outside [1, " +
                    std::to_string(support_size) + "]");
  }
  std::vector<std::size_t> order(support_size);
  for (std::size_t k = 0; k < support_size; ++k) order[k] = k;
  detail::Rng rng(seed);
  rng.shuffle(order);
  order.resize(size);
  return order;
}

std::vector<MemoryAblationRow> ablate_memory(const std::vector<Sample>& queries,
                                             const MemoryBank& support,
                                             const Backend& backend,
                                             const std::vector<std::size_t>& pool_sizes,
                                             std::uint64_t seed,
                                             const PipelineConfig& config) {
  require_bank(support);
  for (std::size_t s : pool_sizes) {
    if (s == 0 || s > support.size()) {
      throw Error(ErrorCode::ConfigError,
                  "pool size " + std::to_string(s) + " exceeds support of " +
                      std::to_string(support.size()));
    }
  }
  std::vector<MemoryAblationRow> rows;
  for (std::size_t s : pool_sizes) {
    const auto positions = sample_pool(support.size(), s, seed);
    MemoryBank pool = support.subset(positions);
    MemoryAblationRow row;
    row.pool_size = s;
    for (const auto& e : pool.entries()) row.pool_ids.push_back(e.id);
    row.report = run_pipeline(queries, pool, backend, config);
    row.report.config["pool_size"] = s;
    row.report.config["pool_seed"] = seed;
    row.report.config["pool_ids"] = row.pool_ids;
    rows.push_back(std::move(row));
  }
  return rows;
}

MemoryBank build_bank_from_samples(const std::vector<Sample>& samples,
                                   const Backend& backend, std::size_t jobs) {
  std::vector<std::optional<ExemplarInput>> inputs(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    inputs[i] = ExemplarInput{samples[i].id, samples[i].image, read_mask_png(samples[i].mask),
                              backend.extract_features(samples[i].image)};
  });
  std::vector<ExemplarInput> ready;
  ready.reserve(inputs.size());
  for (auto& in : inputs) ready.push_back(std::move(*in));
  return build_bank(std::move(ready));
}

nlohmann::json config_to_json(const PipelineConfig& config) {
  return {{"tau_fg", config.match.tau_fg},
          {"tau_bg", config.match.tau_bg},
          {"fg_strategy", to_string(config.policy.fg_strategy)},
          {"bg_mode", config.policy.bg_mode.label()},
          {"jobs", config.jobs}};
}

}  // namespace memsam
