#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memsam/tensor_io.hpp"

namespace memsam {

/// Two-class (FG/BG) segmentation scores for one image.
///
///   iou_c  = |pred_c ∩ gt_c| / |pred_c ∪ gt_c|      (1 if the union is empty)
///   miou   = (iou_fg + iou_bg) / 2
///   mpa    = mean over classes present in gt of |pred_c ∩ gt_c| / |gt_c|
///   acc    = correct pixels / all pixels
struct SegmentationScores {
  double iou_fg = 0.0;
  double iou_bg = 0.0;
  double miou = 0.0;
  double mpa = 0.0;
  double acc = 0.0;
};

/// Throws DimMismatch when sizes differ, EmptyInput for empty masks.
SegmentationScores compute_metrics(const BinaryMask& pred, const BinaryMask& gt);

struct SplitSpec {
  double ratio = 0.70;  // support fraction
  std::uint64_t seed = 42;

  /// Throws ConfigError unless 0 < ratio < 1.
  void validate() const;
};

struct Split {
  std::vector<std::string> support;
  std::vector<std::string> query;
};

/// 64-bit keyed hash of (seed, id), identical on every platform.
std::uint64_t split_key(std::uint64_t seed, const std::string& id);

/// Orders ids by split_key (then by id) and puts the first ceil(ratio * N)
/// into support. Throws EmptyInput for an empty list.
Split split_dataset(const std::vector<std::string>& ids, const SplitSpec& spec);

}  // namespace memsam
