#include "memsam/image_io.hpp"

#include <fstream>
#include <iterator>
#include <string>
#include <system_error>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "memsam/error.hpp"

namespace memsam {

RgbImage::RgbImage(std::uint32_t height, std::uint32_t width)
    : height_(height),
      width_(width),
      rgb_(static_cast<std::size_t>(height) * width * 3, 0) {}

RgbImage::RgbImage(std::uint32_t height, std::uint32_t width,
                   std::vector<std::uint8_t> rgb)
    : height_(height), width_(width), rgb_(std::move(rgb)) {
  if (rgb_.size() != static_cast<std::size_t>(height) * width * 3) {
    throw Error(ErrorCode::DimMismatch, "RGB buffer size mismatch");
  }
}

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image) {
  if (image.height() == 0 || image.width() == 0) {
    throw Error(ErrorCode::EmptyInput, "cannot encode empty image");
  }
  cv::Mat bgr(static_cast<int>(image.height()), static_cast<int>(image.width()),
              CV_8UC3);
  for (std::uint32_t y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::uint32_t x = 0; x < image.width(); ++x) {
      const std::uint8_t* px = image.pixel(y, x);
      row[3 * x + 0] = px[2];
      row[3 * x + 1] = px[1];
      row[3 * x + 2] = px[0];
    }
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) {
    throw Error(ErrorCode::IoError, "PNG encoding failed");
  }
  return out;
}

RgbImage read_rgb_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw Error(ErrorCode::IoError, "could not decode image " + path.string());
  }
  const auto h = static_cast<std::uint32_t>(bgr.rows);
  const auto w = static_cast<std::uint32_t>(bgr.cols);
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
  for (std::uint32_t y = 0; y < h; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(static_cast<int>(y));
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
      rgb[o + 0] = row[3 * x + 2];
      rgb[o + 1] = row[3 * x + 1];
      rgb[o + 2] = row[3 * x + 0];
    }
  }
  return RgbImage(h, w, std::move(rgb));
}

void write_rgb_png(const RgbImage& image, const std::filesystem::path& path) {
  write_file_atomic(path, encode_rgb_png(image));
}

RgbImage render_overlay(const RgbImage& image, const BinaryMask& prediction,
                        std::span<const Point> fg_points,
                        std::span<const Point> bg_points) {
  if (image.size() != prediction.size()) {
    throw Error(ErrorCode::DimMismatch, "overlay mask/image size mismatch");
  }
  RgbImage out = image;
  const std::uint32_t h = image.height();
  const std::uint32_t w = image.width();
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      if (!prediction.at(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y + 1 == h || x + 1 == w ||
                        !prediction.at(y - 1, x) || !prediction.at(y + 1, x) ||
                        !prediction.at(y, x - 1) || !prediction.at(y, x + 1);
      std::uint8_t* px = out.pixel(y, x);
      if (edge) {
        px[0] = 40;
        px[1] = 120;
        px[2] = 255;
      } else {
        // Blue tint inside the predicted region.
        px[2] = static_cast<std::uint8_t>((px[2] + 255) / 2);
      }
    }
  }
  auto mark = [&](Point p, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const int yy = p.y + dy;
        const int xx = p.x + dx;
        if (yy < 0 || xx < 0 || yy >= static_cast<int>(h) ||
            xx >= static_cast<int>(w)) {
          continue;
        }
        std::uint8_t* px = out.pixel(static_cast<std::uint32_t>(yy),
                                     static_cast<std::uint32_t>(xx));
        px[0] = r;
        px[1] = g;
        px[2] = b;
      }
    }
  };
  for (Point p : bg_points) mark(p, 230, 30, 30);
  for (Point p : fg_points) mark(p, 30, 230, 30);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "rename " + tmp.string() + " -> " + path.string() + ": " +
                    ec.message());
  }
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view text) {
  write_file_atomic(path,
                    std::span<const std::uint8_t>(
                        reinterpret_cast<const std::uint8_t*>(text.data()),
                        text.size()));
}

}  // namespace memsam
