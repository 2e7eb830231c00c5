#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "memsam/prompt_gen.hpp"
#include "memsam/tensor_io.hpp"

namespace memsam {

struct ScoredMask {
  BinaryMask mask;
  double score = 0.0;
};

/// Feature extractor plus promptable segmenter. Implementations must be
/// safe to call from several threads at once.
class Backend {
 public:
  virtual ~Backend() = default;

  /// Unit-normalized patch features of the image at `image`.
  virtual FeatureGrid extract_features(const std::filesystem::path& image) const = 0;

  /// At least one scored candidate mask for `prompts` on `image`.
  virtual std::vector<ScoredMask> segment(const std::filesystem::path& image,
                                          const PromptSet& prompts) const = 0;

  /// Configuration snapshot for run reports.
  virtual nlohmann::json describe() const = 0;
};

/// Index of the highest-scoring candidate; ties go to the smaller
/// foreground area, then to the earlier candidate. Throws NoCandidates.
std::size_t select_best_index(std::span<const ScoredMask> candidates);
BinaryMask select_best(std::span<const ScoredMask> candidates);

struct MockParams {
  std::uint32_t patch_size = 16;
  // Region-growing colour tolerances (Euclidean RGB distance, 0..255 scale)
  // producing the low / mid / high candidates.
  std::array<double, 3> tolerances{28.0, 56.0, 110.0};
};

struct BridgeParams {
  std::string command;  // run through /bin/sh -c
  std::chrono::milliseconds timeout{120'000};
  std::size_t connections = 1;
};

struct BackendDescriptor {
  enum class Kind { Mock, Bridge };

  Kind kind = Kind::Mock;
  MockParams mock;
  BridgeParams bridge;

  /// "mock" or "bridge:<command>". Throws ConfigError.
  static BackendDescriptor parse(const std::string& text);
};

std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor);

}  // namespace memsam
