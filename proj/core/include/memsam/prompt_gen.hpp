#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "memsam/correspondence.hpp"
#include "memsam/tensor_io.hpp"

namespace memsam {

struct PointPrompt {
  Point point;
  int label = 1;  // 1 = foreground, 0 = background

  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

enum class FgStrategy { MostConfident, KMeansRepresentative };

/// How many background negatives to keep. `All` keeps every accepted
/// candidate; `TopN` the `count` most similar; `None` emits no negatives
/// (the FG-only configuration).
class BgMode {
 public:
  enum class Kind { All, TopN, None };

  static BgMode all() { return BgMode(Kind::All, 0); }
  static BgMode none() { return BgMode(Kind::None, 0); }
  /// Throws ConfigError for count < 1.
  static BgMode top_n(std::size_t count);
  /// "all", "none"/"0", or a positive integer. Throws ConfigError.
  static BgMode parse(const std::string& text);

  Kind kind() const noexcept { return kind_; }
  std::size_t count() const noexcept { return count_; }
  /// "all", "none" or the count, e.g. "20".
  std::string label() const;

  friend bool operator==(const BgMode&, const BgMode&) = default;

 private:
  BgMode(Kind kind, std::size_t count) : kind_(kind), count_(count) {}
  Kind kind_;
  std::size_t count_;
};

struct PromptPolicy {
  FgStrategy fg_strategy = FgStrategy::MostConfident;
  BgMode bg_mode = BgMode::all();
};

std::string to_string(FgStrategy s);
/// "most-confident" or "kmeans". Throws ConfigError.
FgStrategy parse_fg_strategy(const std::string& text);

/// The foreground anchor. MostConfident: highest similarity, ties to the
/// lowest query patch. KMeansRepresentative: the candidate nearest the
/// spatial centroid of all candidates (k-means with k = 1), ties to higher
/// similarity and then to the lowest query patch.
/// Throws NoForeground when `fg_candidates` is empty.
PointPrompt select_fg(std::span<const MatchCandidate> fg_candidates,
                      FgStrategy strategy);

/// Background negatives in selection order. All: query-patch order. TopN:
/// descending similarity, ties to the lowest query patch. Candidates lying
/// on the FG anchor's pixel are dropped.
std::vector<PointPrompt> select_bg(std::span<const MatchCandidate> bg_candidates,
                                   const BgMode& mode, Point fg_point);

/// The prompt set: FG anchor first, then the negatives.
class PromptSet {
 public:
  PromptSet() = default;

  /// Throws InvariantViolation if fg is not labelled 1, a BG prompt is not
  /// labelled 0, a BG point coincides with the FG point, or a point repeats.
  PromptSet(PointPrompt fg, std::vector<PointPrompt> bg);

  const std::vector<PointPrompt>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  const PointPrompt& foreground() const { return points_.front(); }
  std::span<const PointPrompt> background() const {
    return std::span<const PointPrompt>(points_).subspan(points_.empty() ? 0 : 1);
  }
  std::vector<Point> background_points() const;

  friend bool operator==(const PromptSet&, const PromptSet&) = default;

 private:
  std::vector<PointPrompt> points_;
};

PromptSet build_prompt_set(PointPrompt fg, std::vector<PointPrompt> bg);

/// {"points": [{"x": int, "y": int, "label": 0|1}, ...]}
nlohmann::json to_json(const PromptSet& prompts);
/// Parses the form above; the first label-1 point is the anchor.
/// Throws PromptError for anything else.
PromptSet prompt_set_from_json(const nlohmann::json& j);

}  // namespace memsam
