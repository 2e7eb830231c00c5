#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "memsam/tensor_io.hpp"

namespace memsam {

enum class Side { Foreground, Background };

/// Query patch i matched to its best exemplar patch j* on one side.
struct MatchCandidate {
  std::size_t query_patch = 0;
  std::size_t ref_patch = 0;
  double similarity = 0.0;
  Point point;  // center of query_patch in query-image pixels
  Side side = Side::Foreground;

  friend bool operator==(const MatchCandidate&, const MatchCandidate&) = default;
};

struct MatchConfig {
  double tau_fg = 0.9;
  double tau_bg = 0.9;

  /// Throws ConfigError unless both thresholds lie in [0, 1]. A threshold
  /// of 0 accepts every non-negative match; the CLI additionally rejects 0.
  void validate() const;
};

struct BestMatch {
  std::size_t index = 0;
  double similarity = 0.0;
};

/// Exact argmax over `subset` of <query_i, ref_j>; ties go to the lowest j.
/// Throws EmptySubset, DimMismatch or IndexError.
BestMatch similarity_row(const FeatureGrid& query, std::size_t i,
                         const FeatureGrid& ref,
                         std::span<const std::size_t> subset);

/// Best match in `subset` for every query patch, computed as one matrix
/// product against the gathered subset rows. Below 512 dimensions the
/// product is computed in double. From 512 up, float products are summed in
/// float within 256-wide blocks and the block partials are reduced in double.
std::vector<BestMatch> best_matches(const FeatureGrid& query,
                                    const FeatureGrid& ref,
                                    std::span<const std::size_t> subset);

struct MatchResult {
  std::vector<MatchCandidate> fg;  // accepted FG candidates, by query patch
  std::vector<MatchCandidate> bg;  // accepted BG candidates, by query patch
};

/// Mask-constrained matching. Each query patch is matched separately
/// against the exemplar's FG patches and BG patches and emitted on a side
/// when its best similarity on that side reaches the side's threshold. A
/// patch may appear on both sides.
///
/// Throws DegenerateExemplar when the exemplar labels have no FG or no BG
/// patch, DimMismatch when grids or labels disagree, ConfigError for bad
/// thresholds.
MatchResult match_constrained(const FeatureGrid& query, const FeatureGrid& ref,
                              const PatchLabelGrid& ref_labels,
                              const MatchConfig& config);

}  // namespace memsam
