#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace memsam {

/// Pixel coordinate in image space; x is the column, y the row.
struct Point {
  int x = 0;
  int y = 0;

  friend auto operator<=>(const Point&, const Point&) = default;
};

enum class PatchLabel : std::uint8_t { Background = 0, Foreground = 1 };

struct ImageSize {
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// Dense rows x cols grid of dim-dimensional patch embeddings, row-major.
///
/// `source` is the size of the image the grid describes. When the grid is
/// "native" (rows == ceil(source.height / patch_size), likewise for cols) a
/// patch covers exactly patch_size pixels per side, with the last row/column
/// clipped at the image border. Any other grid is treated as extracted from a
/// resized copy of the image and maps back to source pixels proportionally.
class FeatureGrid {
 public:
  static constexpr std::uint32_t kDefaultPatchSize = 16;

  FeatureGrid() = default;

  /// Throws Error{DimMismatch} if data.size() != rows * cols * dim, and
  /// Error{DimensionOverflow} if that product does not fit in memory limits.
  /// A zero source size defaults to the padded grid extent.
  FeatureGrid(std::uint32_t rows, std::uint32_t cols, std::uint32_t dim,
              std::vector<float> data,
              std::uint32_t patch_size = kDefaultPatchSize,
              ImageSize source = {});

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::uint32_t patch_size() const noexcept { return patch_size_; }
  ImageSize source() const noexcept { return source_; }
  std::size_t patch_count() const noexcept {
    return static_cast<std::size_t>(rows_) * cols_;
  }
  bool empty() const noexcept { return patch_count() == 0 || dim_ == 0; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> patch(std::size_t index) const;

  /// True when the grid tiles the source image at patch_size pixels/patch.
  bool is_native() const noexcept;

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t cols_ = 0;
  std::uint32_t dim_ = 0;
  std::uint32_t patch_size_ = kDefaultPatchSize;
  ImageSize source_{};
  std::vector<float> data_;
};

/// Per-pixel foreground flags stored one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask() = default;
  /// All-background mask.
  BinaryMask(std::uint32_t height, std::uint32_t width);
  /// Any nonzero byte becomes foreground. Throws DimMismatch on size mismatch.
  BinaryMask(std::uint32_t height, std::uint32_t width,
             std::vector<std::uint8_t> flags);

  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t width() const noexcept { return width_; }
  ImageSize size() const noexcept { return {height_, width_}; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const noexcept { return pixel_count() == 0; }

  bool at(std::uint32_t y, std::uint32_t x) const noexcept {
    return flags_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  bool contains(Point p) const noexcept;
  std::span<const std::uint8_t> flags() const noexcept { return flags_; }
  std::size_t foreground_count() const noexcept;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::vector<std::uint8_t> flags_;
};

class PatchLabelGrid {
 public:
  PatchLabelGrid() = default;
  PatchLabelGrid(std::uint32_t rows, std::uint32_t cols,
                 std::vector<PatchLabel> labels);

  std::uint32_t rows() const noexcept { return rows_; }
  std::uint32_t cols() const noexcept { return cols_; }
  PatchLabel at(std::size_t index) const { return labels_.at(index); }
  std::span<const PatchLabel> labels() const noexcept { return labels_; }

  /// Patch indices carrying `label`, ascending.
  std::vector<std::size_t> indices_of(PatchLabel label) const;

  friend bool operator==(const PatchLabelGrid&, const PatchLabelGrid&) =
      default;

 private:
  std::uint32_t rows_ = 0;
  std::uint32_t cols_ = 0;
  std::vector<PatchLabel> labels_;
};

/// Pixel rectangle [y0, y1) x [x0, x1) covered by one patch.
struct PixelRect {
  std::uint32_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;
};

/// Source-image footprint of patch `index`. Throws IndexError.
PixelRect patch_footprint(const FeatureGrid& grid, std::size_t index);

/// Normalizes every patch vector to unit Euclidean length.
/// Throws Error{ZeroVector} naming the first patch whose norm is < 1e-12.
FeatureGrid l2_normalize_grid(const FeatureGrid& grid);

/// Largest |norm - 1| over all patches.
double max_norm_deviation(const FeatureGrid& grid);

// "MSFG" v1: magic, then u32 version, rows, cols, dim, patch_size, src_h,
// src_w, then rows*cols*dim little-endian float32 values, row-major.
inline constexpr std::size_t kFeatureHeaderBytes = 32;
inline constexpr std::uint32_t kFeatureFormatVersion = 1;

std::vector<std::uint8_t> encode_feature_grid(const FeatureGrid& grid);
FeatureGrid decode_feature_grid(std::span<const std::uint8_t> bytes);
void write_feature_grid(const FeatureGrid& grid,
                        const std::filesystem::path& path);
FeatureGrid read_feature_grid(const std::filesystem::path& path);

/// Masks travel as single-channel 8-bit PNG: 0 = background, 255 =
/// foreground. On read, any value >= 128 is foreground; colour PNGs are
/// converted to luminance first.
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);
BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes);
void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path);
BinaryMask read_mask_png(const std::filesystem::path& path);

/// Majority vote per patch: FG iff strictly more than half of the covered
/// pixels are FG. Patches are equal proportional bins of the mask.
PatchLabelGrid downsample_mask(const BinaryMask& mask, std::uint32_t rows,
                               std::uint32_t cols);

/// Same vote, using the exact pixel footprint of each patch of `grid`.
/// The mask must have the grid's source size.
PatchLabelGrid downsample_mask(const BinaryMask& mask, const FeatureGrid& grid);

/// Center of patch `index` in source-image pixels, clamped into the image.
/// Throws IndexError.
Point patch_center(std::size_t index, const FeatureGrid& grid);

}  // namespace memsam
