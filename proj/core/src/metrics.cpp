#include "memsam/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hash.hpp"
#include "memsam/error.hpp"

namespace memsam {

SegmentationScores compute_metrics(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorCode::DimMismatch,
                "prediction " + std::to_string(pred.height()) + "x" +
                    std::to_string(pred.width()) + " vs ground truth " +
                    std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  }
  if (gt.empty()) throw Error(ErrorCode::EmptyInput, "empty masks");

  // confusion[gt][pred]
  std::uint64_t confusion[2][2] = {{0, 0}, {0, 0}};
  const auto p = pred.flags();
  const auto g = gt.flags();
  for (std::size_t k = 0; k < g.size(); ++k) ++confusion[g[k]][p[k]];

  const auto iou = [&](int c) {
    const std::uint64_t inter = confusion[c][c];
    const std::uint64_t uni = confusion[c][0] + confusion[c][1] + confusion[1 - c][c];
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  };

  SegmentationScores s;
  s.iou_fg = iou(1);
  s.iou_bg = iou(0);
  s.miou = 0.5 * (s.iou_fg + s.iou_bg);

  double pa_sum = 0.0;
  int present = 0;
  for (int c = 0; c < 2; ++c) {
    const std::uint64_t gt_c = confusion[c][0] + confusion[c][1];
    if (gt_c == 0) continue;
    pa_sum += static_cast<double>(confusion[c][c]) / static_cast<double>(gt_c);
    ++present;
  }
  s.mpa = pa_sum / present;
  s.acc = static_cast<double>(confusion[0][0] + confusion[1][1]) /
          static_cast<double>(g.size());
  return s;
}

void SplitSpec::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::ConfigError, "split ratio must lie in (0, 1)");
  }
}

std::uint64_t split_key(std::uint64_t seed, const std::string& id) {
  std::uint8_t seed_bytes[8];
  for (int k = 0; k < 8; ++k) seed_bytes[k] = static_cast<std::uint8_t>(seed >> (8 * k));
  std::uint64_t h = detail::fnv1a64(seed_bytes);
  h = detail::fnv1a64(id, h);
  return detail::mix64(h);
}

Split split_dataset(const std::vector<std::string>& ids, const SplitSpec& spec) {
  spec.validate();
  if (ids.empty()) throw Error(ErrorCode::EmptyInput, "nothing to split");
  std::vector<std::pair<std::uint64_t, std::string>> keyed;
  keyed.reserve(ids.size());
  for (const auto& id : ids) keyed.emplace_back(split_key(spec.seed, id), id);
  std::sort(keyed.begin(), keyed.end());

  const auto n_support = static_cast<std::size_t>(
      std::ceil(spec.ratio * static_cast<double>(ids.size()) - 1e-9));
  Split out;
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    (k < n_support ? out.support : out.query).push_back(std::move(keyed[k].second));
  }
  return out;
}

}  // namespace memsam
