#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "hash.hpp"
#include "memsam/dataset.hpp"
#include "memsam/error.hpp"
#include "memsam/mock_backend.hpp"
#include "random.hpp"

namespace memsam {
namespace {

using Rgb = std::array<double, 3>;

Rgb hsv_to_rgb(double hue, double sat, double val) {
  const double c = val * sat;
  const double hp = std::fmod(hue, 360.0) / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  Rgb rgb{};
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  const double m = val - c;
  for (double& ch : rgb) ch = (ch + m) * 255.0;
  return rgb;
}

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double rgb_distance(const Rgb& a, const Rgb& b) {
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(d2);
}

double hue_of(const Rgb& c) {
  return hue_degrees(clamp_byte(c[0]), clamp_byte(c[1]), clamp_byte(c[2]));
}

struct Ellipse {
  double cx, cy, a, b, theta;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double u = dx * std::cos(theta) + dy * std::sin(theta);
    const double v = -dx * std::sin(theta) + dy * std::cos(theta);
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

struct Star {
  double cx, cy, outer, inner, theta;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double sector = 2.0 * std::numbers::pi / 5.0;
    double alpha = std::atan2(dy, dx) - theta;
    alpha = std::fmod(alpha, sector);
    if (alpha < 0) alpha += sector;
    const double t = alpha / sector;
    const double radius = inner + (outer - inner) * std::abs(2.0 * t - 1.0);
    return std::sqrt(dx * dx + dy * dy) <= radius;
  }
};

void paint_background(RgbImage& img, detail::Rng& rng) {
  const Rgb base = hsv_to_rgb(rng.uniform(192.0, 214.0), rng.uniform(0.45, 0.6),
                              rng.uniform(0.45, 0.6));
  const double fx = rng.uniform(5.0, 9.0);
  const double fy = rng.uniform(6.0, 11.0);
  const double px = rng.uniform(0.0, 6.28);
  const double py = rng.uniform(0.0, 6.28);
  for (std::uint32_t y = 0; y < img.height(); ++y) {
    for (std::uint32_t x = 0; x < img.width(); ++x) {
      const double wave = 10.0 * std::sin(x / fx + px) * std::cos(y / fy + py);
      std::uint8_t* p = img.pixel(y, x);
      for (int c = 0; c < 3; ++c) p[c] = clamp_byte(base[c] + wave + rng.integer(-10, 10));
    }
  }
}

template <typename Shape>
void paint_shape(RgbImage& img, std::vector<std::uint8_t>& mask, const Shape& shape,
                 const Rgb& color, int noise, detail::Rng& rng) {
  for (std::uint32_t y = 0; y < img.height(); ++y) {
    for (std::uint32_t x = 0; x < img.width(); ++x) {
      if (!shape.contains(x + 0.5, y + 0.5)) continue;
      std::uint8_t* p = img.pixel(y, x);
      for (int c = 0; c < 3; ++c) p[c] = clamp_byte(color[c] + rng.integer(-noise, noise));
      mask[static_cast<std::size_t>(y) * img.width() + x] = 1;
    }
  }
}

// Warm target colour: hue inside the first hue-histogram bin with margin.
Rgb target_color(detail::Rng& rng, double hue_lo, double hue_hi) {
  return hsv_to_rgb(rng.uniform(hue_lo, hue_hi), rng.uniform(0.5, 0.62),
                    rng.uniform(0.8, 0.9));
}

constexpr int kTargetNoise = 3;

SynthSample make_simple(detail::Rng& rng, std::uint32_t size) {
  SynthSample s;
  s.image = RgbImage(size, size);
  paint_background(s.image, rng);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
  const Rgb color = target_color(rng, 10.0, 36.0);
  const double cx = rng.uniform(0.36, 0.64) * size;
  const double cy = rng.uniform(0.36, 0.64) * size;
  const double theta = rng.uniform(0.0, std::numbers::pi);
  if (rng.uniform() < 0.5) {
    const Ellipse e{cx, cy, rng.uniform(27.0, 44.0), rng.uniform(27.0, 44.0), theta};
    paint_shape(s.image, mask, e, color, kTargetNoise, rng);
  } else {
    const Star st{cx, cy, rng.uniform(42.0, 52.0), rng.uniform(25.0, 29.0), theta};
    paint_shape(s.image, mask, st, color, kTargetNoise, rng);
  }
  s.mask = BinaryMask(size, size, std::move(mask));
  s.distractor = BinaryMask(size, size);
  return s;
}

SynthSample make_adversarial(detail::Rng& rng, std::uint32_t size) {
  for (;;) {
    SynthSample s;
    s.image = RgbImage(size, size);
    paint_background(s.image, rng);

    // Target in the first hue bin, distractor pushed along green into the
    // second bin: visually the same warm family and a short RGB hop away.
    const Rgb color = target_color(rng, 24.0, 36.0);
    const double hop = rng.uniform(42.0, 80.0);
    const Rgb distractor_color{color[0], std::min(255.0, color[1] + hop), color[2]};
    if (hue_of(distractor_color) < 50.0 || hue_of(distractor_color) > 85.0) continue;

    const Ellipse target{rng.uniform(0.38, 0.62) * size, rng.uniform(0.38, 0.62) * size,
                         rng.uniform(25.0, 33.0), rng.uniform(25.0, 33.0),
                         rng.uniform(0.0, std::numbers::pi)};
    const double scale = rng.uniform(1.45, 1.8);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double reach = 0.8 * (std::max(target.a, target.b) + scale * 30.0);
    const Ellipse distractor{target.cx + reach * std::cos(phi), target.cy + reach * std::sin(phi),
                             scale * rng.uniform(28.0, 32.0), scale * rng.uniform(28.0, 32.0),
                             rng.uniform(0.0, std::numbers::pi)};

    std::vector<std::uint8_t> dmask(static_cast<std::size_t>(size) * size, 0);
    std::vector<std::uint8_t> tmask(static_cast<std::size_t>(size) * size, 0);
    paint_shape(s.image, dmask, distractor, distractor_color, kTargetNoise, rng);
    paint_shape(s.image, tmask, target, color, kTargetNoise, rng);
    std::size_t visible_distractor = 0;
    std::size_t target_area = 0;
    bool touching = false;
    for (std::size_t k = 0; k < tmask.size(); ++k) {
      if (tmask[k]) {
        dmask[k] = 0;
        ++target_area;
      }
    }
    for (std::uint32_t y = 0; y < size; ++y) {
      for (std::uint32_t x = 0; x < size; ++x) {
        const std::size_t k = static_cast<std::size_t>(y) * size + x;
        if (!dmask[k]) continue;
        ++visible_distractor;
        if ((x > 0 && tmask[k - 1]) || (x + 1 < size && tmask[k + 1]) ||
            (y > 0 && tmask[k - size]) || (y + 1 < size && tmask[k + size])) {
          touching = true;
        }
      }
    }
    if (!touching || visible_distractor <= target_area) continue;

    s.mask = BinaryMask(size, size, std::move(tmask));
    s.distractor = BinaryMask(size, size, std::move(dmask));
    s.distractor_distance = rgb_distance(color, distractor_color);
    return s;
  }
}

}  // namespace

std::vector<SynthSample> synth_dataset(std::size_t count, std::uint64_t seed,
                                       SynthFamily family) {
  if (count == 0) throw Error(ErrorCode::EmptyInput, "count must be >= 1");
  std::vector<SynthSample> out;
  out.reserve(count);
  const std::string prefix = to_string(family);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t stream =
        detail::mix64(detail::fnv1a64(prefix, seed ^ 0x5eedULL) + 0x9e3779b97f4a7c15ULL * (k + 1));
    detail::Rng rng(stream);
    SynthSample s = family == SynthFamily::Simple ? make_simple(rng, kSynthImageSize)
                                                  : make_adversarial(rng, kSynthImageSize);
    char id[32];
    std::snprintf(id, sizeof id, "%s_%04zu", prefix.c_str(), k);
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace memsam
