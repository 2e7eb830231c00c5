#include "memsam/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>

#include "memsam/error.hpp"

namespace memsam {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::map<std::string, fs::path> list_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  }
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

}  // namespace

std::vector<Sample> scan_pairs(const fs::path& images_dir, const fs::path& masks_dir) {
  const auto images = list_by_stem(images_dir);
  const auto masks = list_by_stem(masks_dir);
  std::vector<std::string> offenders;
  std::vector<Sample> out;
  for (const auto& [stem, path] : images) {
    auto it = masks.find(stem);
    if (it == masks.end()) {
      offenders.push_back("image without mask: " + path.string());
    } else {
      out.push_back({stem, path, it->second});
    }
  }
  for (const auto& [stem, path] : masks) {
    if (!images.contains(stem)) offenders.push_back("mask without image: " + path.string());
  }
  if (!offenders.empty()) {
    std::string msg = std::to_string(offenders.size()) + " unmatched file(s)";
    for (const auto& o : offenders) msg += "\n  " + o;
    throw Error(ErrorCode::UnmatchedPairs, msg);
  }
  return out;
}

std::vector<Sample> scan_dataset(const fs::path& dir) {
  return scan_pairs(dir / "images", dir / "masks");
}

std::vector<Sample> select_samples(const std::vector<Sample>& samples,
                                   const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : samples) by_id.emplace(s.id, &s);
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::IndexError, "unknown sample '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

std::string to_string(SynthFamily family) {
  return family == SynthFamily::Simple ? "simple" : "adversarial";
}

SynthFamily parse_synth_family(const std::string& text) {
  if (text == "simple") return SynthFamily::Simple;
  if (text == "adversarial") return SynthFamily::Adversarial;
  throw Error(ErrorCode::ConfigError, "family must be simple or adversarial, got '" + text + "'");
}

void write_synth_dataset(const std::vector<SynthSample>& samples, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  for (const auto& s : samples) {
    write_rgb_png(s.image, dir / "images" / (s.id + ".png"));
    write_mask_png(s.mask, dir / "masks" / (s.id + ".png"));
  }
}

}  // namespace memsam
