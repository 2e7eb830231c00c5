#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "memsam/tensor_io.hpp"

namespace memsam {

/// 8-bit interleaved RGB image.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::uint32_t height, std::uint32_t width);
  RgbImage(std::uint32_t height, std::uint32_t width,
           std::vector<std::uint8_t> rgb);

  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t width() const noexcept { return width_; }
  ImageSize size() const noexcept { return {height_, width_}; }

  const std::uint8_t* pixel(std::uint32_t y, std::uint32_t x) const noexcept {
    return rgb_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }
  std::uint8_t* pixel(std::uint32_t y, std::uint32_t x) noexcept {
    return rgb_.data() + (static_cast<std::size_t>(y) * width_ + x) * 3;
  }
  std::span<const std::uint8_t> bytes() const noexcept { return rgb_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<std::uint8_t> rgb_;
};

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image);
RgbImage read_rgb_image(const std::filesystem::path& path);
void write_rgb_png(const RgbImage& image, const std::filesystem::path& path);

/// Colours the prediction boundary (FG pixels with a BG 4-neighbour) and
/// marks prompt points: FG green, BG red.
RgbImage render_overlay(const RgbImage& image, const BinaryMask& prediction,
                        std::span<const Point> fg_points,
                        std::span<const Point> bg_points);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view text);

}  // namespace memsam
