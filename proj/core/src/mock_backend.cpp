#include "memsam/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <nlohmann/json.hpp>

#include "memsam/error.hpp"

namespace memsam {

double hue_degrees(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0;
  const double g = g8 / 255.0;
  const double b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  if (delta <= 0.0) return 0.0;
  double h;
  if (mx == r) {
    h = 60.0 * std::fmod((g - b) / delta, 6.0);
  } else if (mx == g) {
    h = 60.0 * ((b - r) / delta + 2.0);
  } else {
    h = 60.0 * ((r - g) / delta + 4.0);
  }
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  return h;
}

int hue_bin(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int bin = static_cast<int>(hue_degrees(r, g, b) / (360.0 / kHueBins));
  return std::clamp(bin, 0, kHueBins - 1);
}

std::array<double, kMockFeatureDim> mock_patch_descriptor(const RgbImage& image,
                                                          const PixelRect& rect) {
  std::array<double, kMockFeatureDim> v{};
  std::array<double, 3> sum{};
  std::array<double, 3> sum_sq{};
  std::array<double, kHueBins> hist{};
  std::size_t n = 0;
  for (std::uint32_t y = rect.y0; y < rect.y1; ++y) {
    for (std::uint32_t x = rect.x0; x < rect.x1; ++x) {
      const std::uint8_t* px = image.pixel(y, x);
      for (int c = 0; c < 3; ++c) {
        const double val = px[c] / 255.0;
        sum[c] += val;
        sum_sq[c] += val * val;
      }
      hist[static_cast<std::size_t>(hue_bin(px[0], px[1], px[2]))] += 1.0;
      ++n;
    }
  }
  if (n == 0) return v;
  const double inv = 1.0 / static_cast<double>(n);
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] * inv;
    v[c] = mean;
    v[3 + c] = std::sqrt(std::max(0.0, sum_sq[c] * inv - mean * mean));
  }
  for (int k = 0; k < kHueBins; ++k) v[6 + k] = hist[k] * inv;
  return v;
}

FeatureGrid mock_features(const RgbImage& image, std::uint32_t patch_size) {
  if (image.height() == 0 || image.width() == 0) {
    throw Error(ErrorCode::EmptyInput, "cannot extract features of an empty image");
  }
  const std::uint32_t rows = (image.height() + patch_size - 1) / patch_size;
  const std::uint32_t cols = (image.width() + patch_size - 1) / patch_size;
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(rows) * cols * kMockFeatureDim);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const PixelRect rect{r * patch_size, std::min((r + 1) * patch_size, image.height()),
                           c * patch_size, std::min((c + 1) * patch_size, image.width())};
      for (double x : mock_patch_descriptor(image, rect)) {
        data.push_back(static_cast<float>(x));
      }
    }
  }
  FeatureGrid raw(rows, cols, kMockFeatureDim, std::move(data), patch_size,
                  image.size());
  return l2_normalize_grid(raw);
}

BinaryMask grow_region(const RgbImage& image, Point seed, double tolerance) {
  const std::uint32_t h = image.height();
  const std::uint32_t w = image.width();
  if (seed.x < 0 || seed.y < 0 || static_cast<std::uint32_t>(seed.x) >= w ||
      static_cast<std::uint32_t>(seed.y) >= h) {
    throw Error(ErrorCode::PromptError,
                "seed (" + std::to_string(seed.x) + ", " + std::to_string(seed.y) +
                    ") outside " + std::to_string(w) + "x" + std::to_string(h));
  }
  const std::uint8_t* s = image.pixel(static_cast<std::uint32_t>(seed.y),
                                      static_cast<std::uint32_t>(seed.x));
  const double tol2 = tolerance * tolerance;
  const auto close = [&](std::uint32_t y, std::uint32_t x) {
    const std::uint8_t* p = image.pixel(y, x);
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(p[c]) - s[c];
      d2 += d * d;
    }
    return d2 <= tol2;
  };

  std::vector<std::uint8_t> flags(static_cast<std::size_t>(h) * w, 0);
  std::deque<std::pair<std::uint32_t, std::uint32_t>> frontier;
  const auto visit = [&](std::uint32_t y, std::uint32_t x) {
    auto& f = flags[static_cast<std::size_t>(y) * w + x];
    if (f == 0 && close(y, x)) {
      f = 1;
      frontier.emplace_back(y, x);
    }
  };
  visit(static_cast<std::uint32_t>(seed.y), static_cast<std::uint32_t>(seed.x));
  while (!frontier.empty()) {
    const auto [y, x] = frontier.front();
    frontier.pop_front();
    if (y > 0) visit(y - 1, x);
    if (y + 1 < h) visit(y + 1, x);
    if (x > 0) visit(y, x - 1);
    if (x + 1 < w) visit(y, x + 1);
  }
  return BinaryMask(h, w, std::move(flags));
}

std::vector<ScoredMask> mock_segment(const RgbImage& image,
                                     const PromptSet& prompts,
                                     const std::array<double, 3>& tolerances) {
  if (prompts.size() == 0) {
    throw Error(ErrorCode::PromptError, "prompt set has no foreground point");
  }
  const Point seed = prompts.foreground().point;
  std::vector<BinaryMask> regions;
  std::array<double, 3> areas{};
  for (std::size_t k = 0; k < tolerances.size(); ++k) {
    regions.push_back(grow_region(image, seed, tolerances[k]));
    areas[k] = static_cast<double>(regions.back().foreground_count());
  }
  auto sorted = areas;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[1];
  const double image_area = static_cast<double>(image.height()) * image.width();
  const auto bg = prompts.background();
  const double bg_count = std::max<double>(1.0, static_cast<double>(bg.size()));

  std::vector<ScoredMask> out;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const auto violations = static_cast<double>(std::count_if(
        bg.begin(), bg.end(),
        [&](const PointPrompt& p) { return regions[k].contains(p.point); }));
    const double coverage = 1.0 - std::abs(areas[k] - median) / image_area;
    out.push_back({std::move(regions[k]), (1.0 - violations / bg_count) * coverage});
  }
  return out;
}

FeatureGrid MockBackend::extract_features(const std::filesystem::path& image) const {
  return mock_features(read_rgb_image(image), params_.patch_size);
}

std::vector<ScoredMask> MockBackend::segment(const std::filesystem::path& image,
                                             const PromptSet& prompts) const {
  return mock_segment(read_rgb_image(image), prompts, params_.tolerances);
}

nlohmann::json MockBackend::describe() const {
  return {{"kind", "mock"},
          {"patch_size", params_.patch_size},
          {"tolerances", params_.tolerances}};
}

}  // namespace memsam
