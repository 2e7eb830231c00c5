#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "memsam/image_io.hpp"
#include "memsam/tensor_io.hpp"

namespace memsam {

/// One image with its ground-truth mask, paired by filename stem.
struct Sample {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path mask;
};

/// Pairs every image in `images_dir` with the mask of the same stem in
/// `masks_dir`; result sorted by id. Throws UnmatchedPairs listing every
/// image without a mask and every mask without an image, IoError if a
/// directory is missing.
std::vector<Sample> scan_pairs(const std::filesystem::path& images_dir,
                               const std::filesystem::path& masks_dir);

/// scan_pairs(dir / "images", dir / "masks").
std::vector<Sample> scan_dataset(const std::filesystem::path& dir);

/// Subset of `samples` whose ids appear in `ids`, in the order of `ids`.
std::vector<Sample> select_samples(const std::vector<Sample>& samples,
                                   const std::vector<std::string>& ids);

// Synthetic scenes ---------------------------------------------------------

enum class SynthFamily { Simple, Adversarial };

std::string to_string(SynthFamily family);
/// "simple" or "adversarial". Throws ConfigError.
SynthFamily parse_synth_family(const std::string& text);

struct SynthSample {
  std::string id;
  RgbImage image;
  BinaryMask mask;        // the target blob
  BinaryMask distractor;  // visible distractor pixels; all-BG for Simple
  double distractor_distance = 0.0;  // RGB distance target -> distractor colour
};

inline constexpr std::uint32_t kSynthImageSize = 160;

/// Deterministic per (seed, index): sample k of a run with count N equals
/// sample k of any longer run with the same seed and family.
///
/// Simple: one warm-coloured ellipse or five-pointed star on a textured
/// cool background. Adversarial: an ellipse touching a larger region of a
/// neighbouring warm hue (visible area larger than the target) that sits
/// within region-growing reach of the target colour.
std::vector<SynthSample> synth_dataset(std::size_t count, std::uint64_t seed,
                                       SynthFamily family);

/// Writes dir/images/<id>.png and dir/masks/<id>.png.
void write_synth_dataset(const std::vector<SynthSample>& samples,
                         const std::filesystem::path& dir);

}  // namespace memsam
