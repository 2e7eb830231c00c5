#include "memsam/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "memsam/error.hpp"
#include "memsam/image_io.hpp"

namespace memsam {
namespace {

constexpr char kMagic[4] = {'M', 'S', 'F', 'G'};
// 2^31 floats (8 GiB) is far beyond any real grid; anything larger is corrupt.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

std::uint32_t ceil_div(std::uint32_t a, std::uint32_t b) {
  return b == 0 ? 0 : (a + b - 1) / b;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFFu));
  }
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(bytes[at + k]) << (8 * k);
  }
  return v;
}

}  // namespace

// FeatureGrid --------------------------------------------------------------

FeatureGrid::FeatureGrid(std::uint32_t rows, std::uint32_t cols,
                         std::uint32_t dim, std::vector<float> data,
                         std::uint32_t patch_size, ImageSize source)
    : rows_(rows),
      cols_(cols),
      dim_(dim),
      patch_size_(patch_size),
      source_(source),
      data_(std::move(data)) {
  const std::uint64_t expected =
      static_cast<std::uint64_t>(rows) * cols * static_cast<std::uint64_t>(dim);
  if (expected > kMaxElements) {
    throw Error(ErrorCode::DimensionOverflow,
                "feature grid of " + std::to_string(expected) + " elements");
  }
  if (data_.size() != expected) {
    throw Error(ErrorCode::DimMismatch,
                "feature data has " + std::to_string(data_.size()) +
                    " values, expected " + std::to_string(expected));
  }
  if (patch_size_ == 0) {
    throw Error(ErrorCode::ConfigError, "patch_size must be positive");
  }
  if (source_.height == 0 || source_.width == 0) {
    source_ = {rows_ * patch_size_, cols_ * patch_size_};
  }
}

std::span<const float> FeatureGrid::patch(std::size_t index) const {
  if (index >= patch_count()) {
    throw Error(ErrorCode::IndexError,
                "patch " + std::to_string(index) + " of " +
                    std::to_string(patch_count()));
  }
  return std::span<const float>(data_).subspan(index * dim_, dim_);
}

bool FeatureGrid::is_native() const noexcept {
  return rows_ == ceil_div(source_.height, patch_size_) &&
         cols_ == ceil_div(source_.width, patch_size_);
}

// BinaryMask ---------------------------------------------------------------

BinaryMask::BinaryMask(std::uint32_t height, std::uint32_t width)
    : height_(height),
      width_(width),
      flags_(static_cast<std::size_t>(height) * width, 0) {}

BinaryMask::BinaryMask(std::uint32_t height, std::uint32_t width,
                       std::vector<std::uint8_t> flags)
    : height_(height), width_(width), flags_(std::move(flags)) {
  if (flags_.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::DimMismatch,
                "mask buffer has " + std::to_string(flags_.size()) +
                    " bytes for " + std::to_string(height) + "x" +
                    std::to_string(width));
  }
  for (auto& f : flags_) f = f != 0 ? 1 : 0;
}

bool BinaryMask::contains(Point p) const noexcept {
  if (p.x < 0 || p.y < 0 || static_cast<std::uint32_t>(p.x) >= width_ ||
      static_cast<std::uint32_t>(p.y) >= height_) {
    return false;
  }
  return at(static_cast<std::uint32_t>(p.y), static_cast<std::uint32_t>(p.x));
}

std::size_t BinaryMask::foreground_count() const noexcept {
  return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), 1));
}

// PatchLabelGrid -----------------------------------------------------------

PatchLabelGrid::PatchLabelGrid(std::uint32_t rows, std::uint32_t cols,
                               std::vector<PatchLabel> labels)
    : rows_(rows), cols_(cols), labels_(std::move(labels)) {
  if (labels_.size() != static_cast<std::size_t>(rows) * cols) {
    throw Error(ErrorCode::DimMismatch, "label grid size mismatch");
  }
}

std::vector<std::size_t> PatchLabelGrid::indices_of(PatchLabel label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) out.push_back(i);
  }
  return out;
}

// Geometry -----------------------------------------------------------------

PixelRect patch_footprint(const FeatureGrid& grid, std::size_t index) {
  if (index >= grid.patch_count()) {
    throw Error(ErrorCode::IndexError,
                "patch " + std::to_string(index) + " of " +
                    std::to_string(grid.patch_count()));
  }
  const auto row = static_cast<std::uint64_t>(index / grid.cols());
  const auto col = static_cast<std::uint64_t>(index % grid.cols());
  const ImageSize src = grid.source();
  PixelRect r;
  if (grid.is_native()) {
    const std::uint64_t ps = grid.patch_size();
    r.y0 = static_cast<std::uint32_t>(row * ps);
    r.y1 = static_cast<std::uint32_t>(std::min<std::uint64_t>((row + 1) * ps, src.height));
    r.x0 = static_cast<std::uint32_t>(col * ps);
    r.x1 = static_cast<std::uint32_t>(std::min<std::uint64_t>((col + 1) * ps, src.width));
  } else {
    r.y0 = static_cast<std::uint32_t>(row * src.height / grid.rows());
    r.y1 = static_cast<std::uint32_t>((row + 1) * src.height / grid.rows());
    r.x0 = static_cast<std::uint32_t>(col * src.width / grid.cols());
    r.x1 = static_cast<std::uint32_t>((col + 1) * src.width / grid.cols());
  }
  return r;
}

Point patch_center(std::size_t index, const FeatureGrid& grid) {
  if (index >= grid.patch_count()) {
    throw Error(ErrorCode::IndexError,
                "patch " + std::to_string(index) + " of " +
                    std::to_string(grid.patch_count()));
  }
  const double ps = grid.patch_size();
  const double row = static_cast<double>(index / grid.cols());
  const double col = static_cast<double>(index % grid.cols());
  const ImageSize src = grid.source();
  double sx = 1.0;
  double sy = 1.0;
  if (!grid.is_native()) {
    sx = static_cast<double>(src.width) / (grid.cols() * ps);
    sy = static_cast<double>(src.height) / (grid.rows() * ps);
  }
  const double x = std::floor((col * ps + ps / 2.0) * sx);
  const double y = std::floor((row * ps + ps / 2.0) * sy);
  const double max_x = src.width == 0 ? 0.0 : src.width - 1.0;
  const double max_y = src.height == 0 ? 0.0 : src.height - 1.0;
  return {static_cast<int>(std::clamp(x, 0.0, max_x)),
          static_cast<int>(std::clamp(y, 0.0, max_y))};
}

// Normalization ------------------------------------------------------------

FeatureGrid l2_normalize_grid(const FeatureGrid& grid) {
  if (grid.dim() == 0) {
    throw Error(ErrorCode::EmptyInput, "feature grid has dim 0");
  }
  const auto src = grid.data();
  std::vector<float> out(src.begin(), src.end());
  const std::size_t dim = grid.dim();
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    float* v = out.data() + p * dim;
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) sq += static_cast<double>(v[d]) * v[d];
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) {
      throw Error(ErrorCode::ZeroVector,
                  "patch " + std::to_string(p) + " has zero norm");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      v[d] = static_cast<float>(v[d] / norm);
    }
  }
  return FeatureGrid(grid.rows(), grid.cols(), grid.dim(), std::move(out),
                     grid.patch_size(), grid.source());
}

double max_norm_deviation(const FeatureGrid& grid) {
  double worst = 0.0;
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    double sq = 0.0;
    for (float x : grid.patch(p)) sq += static_cast<double>(x) * x;
    worst = std::max(worst, std::abs(std::sqrt(sq) - 1.0));
  }
  return worst;
}

// MSFG ---------------------------------------------------------------------

std::vector<std::uint8_t> encode_feature_grid(const FeatureGrid& grid) {
  std::vector<std::uint8_t> out;
  out.reserve(kFeatureHeaderBytes + grid.data().size() * 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kFeatureFormatVersion);
  put_u32(out, grid.rows());
  put_u32(out, grid.cols());
  put_u32(out, grid.dim());
  put_u32(out, grid.patch_size());
  put_u32(out, grid.source().height);
  put_u32(out, grid.source().width);
  for (float v : grid.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureGrid decode_feature_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw Error(ErrorCode::Truncated, "feature file shorter than magic");
  }
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin(),
                  [](char a, std::uint8_t b) {
                    return static_cast<std::uint8_t>(a) == b;
                  })) {
    throw Error(ErrorCode::BadMagic, "feature file does not start with MSFG");
  }
  if (bytes.size() < kFeatureHeaderBytes) {
    throw Error(ErrorCode::Truncated, "feature header truncated");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFeatureFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "feature format version " + std::to_string(version));
  }
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t cols = get_u32(bytes, 12);
  const std::uint32_t dim = get_u32(bytes, 16);
  const std::uint32_t patch_size = get_u32(bytes, 20);
  const ImageSize source{get_u32(bytes, 24), get_u32(bytes, 28)};

  const std::uint64_t count =
      static_cast<std::uint64_t>(rows) * cols * static_cast<std::uint64_t>(dim);
  if (count > kMaxElements) {
    throw Error(ErrorCode::DimensionOverflow,
                std::to_string(rows) + "x" + std::to_string(cols) + "x" +
                    std::to_string(dim) + " exceeds the element limit");
  }
  const std::uint64_t expected = kFeatureHeaderBytes + count * 4;
  if (bytes.size() < expected) {
    throw Error(ErrorCode::Truncated,
                "payload has " + std::to_string(bytes.size()) +
                    " bytes, header declares " + std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw Error(ErrorCode::Truncated,
                "payload has trailing bytes beyond declared size " +
                    std::to_string(expected));
  }
  std::vector<float> data(count);
  for (std::size_t k = 0; k < count; ++k) {
    data[k] = std::bit_cast<float>(get_u32(bytes, kFeatureHeaderBytes + 4 * k));
  }
  return FeatureGrid(rows, cols, dim, std::move(data), patch_size, source);
}

void write_feature_grid(const FeatureGrid& grid,
                        const std::filesystem::path& path) {
  write_file_atomic(path, encode_feature_grid(grid));
}

FeatureGrid read_feature_grid(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_feature_grid(bytes);
}

// Mask PNG -----------------------------------------------------------------

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  if (mask.empty()) throw Error(ErrorCode::EmptyInput, "cannot encode empty mask");
  cv::Mat img(static_cast<int>(mask.height()), static_cast<int>(mask.width()),
              CV_8UC1);
  const auto flags = mask.flags();
  for (std::uint32_t y = 0; y < mask.height(); ++y) {
    auto* row = img.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::uint32_t x = 0; x < mask.width(); ++x) {
      row[x] = flags[static_cast<std::size_t>(y) * mask.width() + x] ? 255 : 0;
    }
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", img, out)) {
    throw Error(ErrorCode::IoError, "PNG encoding failed");
  }
  return out;
}

BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::IoError, "empty PNG buffer");
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_GRAYSCALE);
  if (img.empty()) throw Error(ErrorCode::IoError, "could not decode mask PNG");
  const auto h = static_cast<std::uint32_t>(img.rows);
  const auto w = static_cast<std::uint32_t>(img.cols);
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(h) * w);
  for (std::uint32_t y = 0; y < h; ++y) {
    const auto* row = img.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::uint32_t x = 0; x < w; ++x) {
      flags[static_cast<std::size_t>(y) * w + x] = row[x] >= 128 ? 1 : 0;
    }
  }
  return BinaryMask(h, w, std::move(flags));
}

void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
  write_file_atomic(path, encode_mask_png(mask));
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  try {
    return decode_mask_png(read_file_bytes(path));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::IoError) throw;
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

// Downsampling -------------------------------------------------------------

namespace {

PatchLabel vote(const BinaryMask& mask, const PixelRect& r) {
  std::size_t fg = 0;
  std::size_t total = 0;
  for (std::uint32_t y = r.y0; y < r.y1; ++y) {
    for (std::uint32_t x = r.x0; x < r.x1; ++x) {
      fg += mask.at(y, x) ? 1 : 0;
      ++total;
    }
  }
  return 2 * fg > total ? PatchLabel::Foreground : PatchLabel::Background;
}

}  // namespace

PatchLabelGrid downsample_mask(const BinaryMask& mask, std::uint32_t rows,
                               std::uint32_t cols) {
  if (mask.empty()) throw Error(ErrorCode::EmptyInput, "zero-size mask");
  if (rows == 0 || cols == 0 || mask.height() < rows || mask.width() < cols) {
    throw Error(ErrorCode::DimMismatch,
                "cannot downsample " + std::to_string(mask.height()) + "x" +
                    std::to_string(mask.width()) + " mask to " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::vector<PatchLabel> labels;
  labels.reserve(static_cast<std::size_t>(rows) * cols);
  const std::uint64_t h = mask.height();
  const std::uint64_t w = mask.width();
  for (std::uint64_t r = 0; r < rows; ++r) {
    for (std::uint64_t c = 0; c < cols; ++c) {
      PixelRect rect{static_cast<std::uint32_t>(r * h / rows),
                     static_cast<std::uint32_t>((r + 1) * h / rows),
                     static_cast<std::uint32_t>(c * w / cols),
                     static_cast<std::uint32_t>((c + 1) * w / cols)};
      labels.push_back(vote(mask, rect));
    }
  }
  return PatchLabelGrid(rows, cols, std::move(labels));
}

PatchLabelGrid downsample_mask(const BinaryMask& mask, const FeatureGrid& grid) {
  if (mask.empty()) throw Error(ErrorCode::EmptyInput, "zero-size mask");
  if (mask.size() != grid.source()) {
    throw Error(ErrorCode::DimMismatch,
                "mask is " + std::to_string(mask.height()) + "x" +
                    std::to_string(mask.width()) + ", features describe " +
                    std::to_string(grid.source().height) + "x" +
                    std::to_string(grid.source().width));
  }
  if (mask.height() < grid.rows() || mask.width() < grid.cols()) {
    throw Error(ErrorCode::DimMismatch, "mask smaller than feature grid");
  }
  std::vector<PatchLabel> labels;
  labels.reserve(grid.patch_count());
  for (std::size_t p = 0; p < grid.patch_count(); ++p) {
    labels.push_back(vote(mask, patch_footprint(grid, p)));
  }
  return PatchLabelGrid(grid.rows(), grid.cols(), std::move(labels));
}

}  // namespace memsam
