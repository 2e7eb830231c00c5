#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memsam/backend.hpp"
#include "memsam/correspondence.hpp"
#include "memsam/dataset.hpp"
#include "memsam/memory_bank.hpp"
#include "memsam/metrics.hpp"
#include "memsam/prompt_gen.hpp"

namespace memsam {

struct PipelineConfig {
  MatchConfig match;
  PromptPolicy policy;
  std::size_t jobs = 1;
};

/// Retrieval and matching for one query; independent of the prompt policy.
struct QueryAnalysis {
  FeatureGrid features;
  std::vector<float> descriptor;
  RetrievalHit hit;
  std::string exemplar_id;
  MatchResult matches;
};

/// extract -> global descriptor -> top-1 retrieval -> exemplar mask
/// downsampled to its grid -> mask-constrained matching.
QueryAnalysis analyze_query(const std::filesystem::path& image,
                            const MemoryBank& bank, const Backend& backend,
                            const MatchConfig& match);

struct PromptOutcome {
  PromptSet prompts;
  // Every accepted BG candidate except the anchor pixel: the negatives the
  // All mode would send, whatever mode actually ran.
  std::vector<Point> would_be_bg;
  std::optional<std::string> warning;
};

/// select_fg, select_bg and build_prompt_set under `policy`.
/// Throws NoForeground.
PromptOutcome make_prompts(const MatchResult& matches, const PromptPolicy& policy);

struct SegmentOutcome {
  std::vector<ScoredMask> candidates;
  std::size_t best = 0;

  const BinaryMask& mask() const { return candidates.at(best).mask; }
  double score() const { return candidates.at(best).score; }
};

SegmentOutcome segment_query(const std::filesystem::path& image,
                             const PromptSet& prompts, const Backend& backend);

struct ImageResult {
  std::string id;
  SegmentationScores scores;
  bool failed = false;
  std::string failure;  // error code and message when failed
  std::string exemplar_id;
  double retrieval_similarity = 0.0;
  std::size_t fg_candidates = 0;
  std::size_t bg_candidates = 0;
  std::size_t bg_prompts = 0;
  // Would-be BG points covered by the selected mask, all of them and the
  // subset lying outside the ground-truth target.
  std::size_t bg_points_in_mask = 0;
  std::size_t leak_points = 0;
  std::optional<PromptSet> prompts;
  std::vector<std::string> warnings;

  /// Selected mask spills onto a would-be BG point outside the target.
  bool leaked() const noexcept { return leak_points > 0; }
};

struct Aggregate {
  double miou = 0.0;
  double mpa = 0.0;
  double acc = 0.0;
  std::size_t images = 0;
  std::size_t failures = 0;
  std::size_t leaks = 0;
};

struct EvalReport {
  std::vector<ImageResult> per_image;  // sorted by id
  Aggregate aggregate;
  nlohmann::json config;
};

/// Arithmetic means over per_image (failures count as zeros).
Aggregate aggregate_results(const std::vector<ImageResult>& per_image);

/// Full pipeline over every query. Per-image errors are recorded as
/// failures with zero scores and the run continues; only an empty bank (or
/// an unreadable ground-truth mask) aborts. Queries are processed on
/// `config.jobs` threads and merged by id.
EvalReport run_pipeline(const std::vector<Sample>& queries, const MemoryBank& bank,
                        const Backend& backend, const PipelineConfig& config);

struct BgAblationRow {
  BgMode mode;
  EvalReport report;
};

/// One report per BG mode. With `memoize`, retrieval and matching run once
/// per query and are shared by every mode; the output is identical either way.
std::vector<BgAblationRow> ablate_bg(const std::vector<Sample>& queries,
                                     const MemoryBank& bank, const Backend& backend,
                                     const std::vector<BgMode>& modes,
                                     const PipelineConfig& config, bool memoize = true);

struct MemoryAblationRow {
  std::size_t pool_size = 0;
  std::vector<std::string> pool_ids;
  EvalReport report;
};

/// Seeded pool positions: the first `size` entries of one seeded permutation
/// of [0, support_size), so smaller pools are prefixes of larger ones.
/// Throws ConfigError when size > support_size or size == 0.
std::vector<std::size_t> sample_pool(std::size_t support_size, std::size_t size,
                                     std::uint64_t seed);

/// For each size, sample a pool from `support`, use it as the bank, and run
/// the pipeline. Throws ConfigError when a size exceeds the support.
std::vector<MemoryAblationRow> ablate_memory(const std::vector<Sample>& queries,
                                             const MemoryBank& support,
                                             const Backend& backend,
                                             const std::vector<std::size_t>& pool_sizes,
                                             std::uint64_t seed,
                                             const PipelineConfig& config);

/// Builds a bank by extracting features for every sample.
MemoryBank build_bank_from_samples(const std::vector<Sample>& samples,
                                   const Backend& backend, std::size_t jobs = 1);

/// Configuration snapshot shared by reports and CLI echoes.
nlohmann::json config_to_json(const PipelineConfig& config);

// Report rendering --------------------------------------------------------

nlohmann::json to_json(const ImageResult& result);
nlohmann::json to_json(const EvalReport& report);

/// Aligned per-image table followed by the aggregate line.
std::string render_table(const EvalReport& report);

struct TableRow {
  std::string label;
  Aggregate aggregate;
};

/// One aligned line per configuration.
std::string render_comparison(const std::string& header, const std::vector<TableRow>& rows);

}  // namespace memsam
