#pragma once

#include <array>
#include <cstdint>

#include "memsam/backend.hpp"
#include "memsam/image_io.hpp"

namespace memsam {

// Mock descriptor layout: mean RGB, RGB standard deviation, 8-bin hue
// histogram. Channels are scaled to [0, 1]; the histogram holds fractions.
inline constexpr std::uint32_t kMockFeatureDim = 14;
inline constexpr int kHueBins = 8;

/// HSV hue in degrees, [0, 360). Achromatic pixels have hue 0.
double hue_degrees(std::uint8_t r, std::uint8_t g, std::uint8_t b);
int hue_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Raw (unnormalized) mock descriptor of one pixel rectangle.
std::array<double, kMockFeatureDim> mock_patch_descriptor(const RgbImage& image,
                                                          const PixelRect& rect);

/// Native grid (rows = ceil(h / patch_size)), every patch normalized.
FeatureGrid mock_features(const RgbImage& image, std::uint32_t patch_size = 16);

/// Flood fill (4-connected) from `seed` over pixels whose RGB distance to
/// the seed colour is <= tolerance.
BinaryMask grow_region(const RgbImage& image, Point seed, double tolerance);

/// One grown region per tolerance, scored as
///   (1 - violations / max(1, |BG prompts|)) * (1 - |area - median area| / image area)
/// where violations counts BG prompts inside the region.
std::vector<ScoredMask> mock_segment(const RgbImage& image,
                                     const PromptSet& prompts,
                                     const std::array<double, 3>& tolerances);

/// Analytic stand-in for the real models; deterministic and thread-safe.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockParams params = {}) : params_(params) {}

  FeatureGrid extract_features(const std::filesystem::path& image) const override;
  std::vector<ScoredMask> segment(const std::filesystem::path& image,
                                  const PromptSet& prompts) const override;
  nlohmann::json describe() const override;

  const MockParams& params() const noexcept { return params_; }

 private:
  MockParams params_;
};

}  // namespace memsam
