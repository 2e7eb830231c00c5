#include "memsam/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <system_error>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "hash.hpp"
#include "memsam/error.hpp"
#include "memsam/image_io.hpp"

namespace memsam {

namespace fs = std::filesystem;
using nlohmann::json;

double dot_exact(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t d = 0; d < n; ++d) {
    sum += static_cast<double>(a[d]) * static_cast<double>(b[d]);
  }
  return sum;
}

std::vector<float> global_descriptor(const FeatureGrid& features) {
  if (features.empty()) {
    throw Error(ErrorCode::EmptyInput, "global descriptor of an empty grid");
  }
  const std::size_t dim = features.dim();
  std::vector<double> mean(dim, 0.0);
  const auto data = features.data();
  for (std::size_t p = 0; p < features.patch_count(); ++p) {
    const float* v = data.data() + p * dim;
    for (std::size_t d = 0; d < dim; ++d) mean[d] += v[d];
  }
  const double n = static_cast<double>(features.patch_count());
  double sq = 0.0;
  for (double& m : mean) {
    m /= n;
    sq += m * m;
  }
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) {
    throw Error(ErrorCode::DegenerateDescriptor,
                "mean patch vector has zero norm");
  }
  std::vector<float> out(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    out[d] = static_cast<float>(mean[d] / norm);
  }
  return out;
}

// MemoryBank ---------------------------------------------------------------

MemoryBank MemoryBank::from_entries(std::vector<MemoryEntry> entries) {
  MemoryBank bank;
  if (entries.empty()) return bank;
  bank.dim_ = entries.front().descriptor.size();
  std::unordered_set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate entry id '" + e.id + "'");
    }
    if (e.descriptor.size() != bank.dim_) {
      throw Error(ErrorCode::DimMismatch,
                  "entry '" + e.id + "' has dim " +
                      std::to_string(e.descriptor.size()) + ", bank has " +
                      std::to_string(bank.dim_));
    }
    if (e.features && e.features->dim() != bank.dim_) {
      throw Error(ErrorCode::DimMismatch,
                  "entry '" + e.id + "' features/descriptor dims differ");
    }
    if (e.features && e.mask && e.mask->size() != e.features->source()) {
      throw Error(ErrorCode::DimMismatch,
                  "entry '" + e.id + "' mask size differs from feature source");
    }
  }
  bank.index_.reserve(entries.size() * bank.dim_);
  for (const auto& e : entries) {
    bank.index_.insert(bank.index_.end(), e.descriptor.begin(),
                       e.descriptor.end());
  }
  bank.entries_ = std::move(entries);
  return bank;
}

std::span<const float> MemoryBank::descriptor_row(std::size_t k) const {
  if (k >= entries_.size()) {
    throw Error(ErrorCode::IndexError, "bank row " + std::to_string(k));
  }
  return std::span<const float>(index_).subspan(k * dim_, dim_);
}

MemoryBank MemoryBank::subset(std::span<const std::size_t> positions) const {
  std::vector<MemoryEntry> picked;
  picked.reserve(positions.size());
  for (std::size_t p : positions) picked.push_back(entries_.at(p));
  return from_entries(std::move(picked));
}

MemoryBank build_bank(std::vector<ExemplarInput> inputs) {
  if (inputs.empty()) {
    throw Error(ErrorCode::EmptyInput, "no exemplars to build a bank from");
  }
  std::vector<MemoryEntry> entries;
  entries.reserve(inputs.size());
  for (auto& in : inputs) {
    if (!entries.empty() && in.features.dim() != entries.front().descriptor.size()) {
      throw Error(ErrorCode::DimMismatch,
                  "entry '" + in.id + "' has dim " +
                      std::to_string(in.features.dim()) + ", expected " +
                      std::to_string(entries.front().descriptor.size()));
    }
    MemoryEntry e;
    e.id = std::move(in.id);
    e.image_path = std::move(in.image_path);
    e.descriptor = global_descriptor(in.features);
    e.features = std::make_shared<const FeatureGrid>(std::move(in.features));
    e.mask = std::make_shared<const BinaryMask>(std::move(in.mask));
    entries.push_back(std::move(e));
  }
  return MemoryBank::from_entries(std::move(entries));
}

// Retrieval ----------------------------------------------------------------

std::vector<RetrievalHit> retrieve(std::span<const float> query,
                                   const MemoryBank& bank, std::size_t k) {
  if (bank.empty()) throw Error(ErrorCode::EmptyBank, "memory bank is empty");
  if (query.size() != bank.dim()) {
    throw Error(ErrorCode::DimMismatch,
                "query dim " + std::to_string(query.size()) + ", bank dim " +
                    std::to_string(bank.dim()));
  }
  if (k == 0 || k > bank.size()) {
    throw Error(ErrorCode::ConfigError,
                "k=" + std::to_string(k) + " outside [1, " +
                    std::to_string(bank.size()) + "]");
  }
  std::vector<RetrievalHit> hits(bank.size());
  for (std::size_t m = 0; m < bank.size(); ++m) {
    hits[m] = {m, dot_exact(query, bank.descriptor_row(m))};
  }
  const auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.entry < b.entry;
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k),
                    hits.end(), better);
  hits.resize(k);
  return hits;
}

// Dedup --------------------------------------------------------------------

std::vector<std::size_t> dedup_positions(
    std::span<const std::vector<float>> descriptors, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "dedup threshold must lie in (0, 1]");
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](std::size_t j) {
      return dot_exact(descriptors[i], descriptors[j]) >= threshold;
    });
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

DedupResult dedup(const MemoryBank& bank, double threshold) {
  std::vector<std::vector<float>> descriptors;
  descriptors.reserve(bank.size());
  for (const auto& e : bank.entries()) descriptors.push_back(e.descriptor);
  const auto kept = dedup_positions(descriptors, threshold);

  DedupResult result;
  std::size_t next = 0;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    if (next < kept.size() && kept[next] == i) {
      ++next;
    } else {
      result.removed.push_back(bank.entry(i).id);
    }
  }
  result.bank = bank.subset(kept);
  return result;
}

// Persistence --------------------------------------------------------------

namespace {

constexpr int kManifestVersion = 1;

std::string file_checksum(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return detail::to_hex(detail::fnv1a64(bytes));
}

fs::path relative_to(const fs::path& target, const fs::path& base) {
  std::error_code ec;
  const auto abs_target = fs::absolute(target, ec);
  if (ec) return target;
  const auto rel = fs::relative(abs_target, fs::absolute(base, ec), ec);
  if (ec || rel.empty()) return abs_target.lexically_normal();
  return rel;
}

}  // namespace

void save_bank(const MemoryBank& bank, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  fs::create_directories(dir / "masks", ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create bank directory " + dir.string() + ": " +
                    ec.message());
  }
  json manifest;
  manifest["version"] = kManifestVersion;
  manifest["dim"] = bank.dim();
  manifest["entries"] = json::array();
  for (const auto& e : bank.entries()) {
    const fs::path features_rel = fs::path("features") / (e.id + ".msfg");
    const fs::path mask_rel = fs::path("masks") / (e.id + ".png");
    write_feature_grid(*e.features, dir / features_rel);
    write_mask_png(*e.mask, dir / mask_rel);
    json rec;
    rec["id"] = e.id;
    rec["image"] = relative_to(e.image_path, dir).generic_string();
    rec["mask"] = mask_rel.generic_string();
    rec["features"] = features_rel.generic_string();
    rec["descriptor"] = e.descriptor;
    rec["checksum"] = {{"features", file_checksum(dir / features_rel)},
                       {"mask", file_checksum(dir / mask_rel)}};
    manifest["entries"].push_back(std::move(rec));
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

MemoryBank load_bank(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorCode::MissingManifest,
                "no manifest.json in " + dir.string());
  }
  json manifest;
  try {
    const auto bytes = read_file_bytes(manifest_path);
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadManifest, e.what());
  }

  std::vector<MemoryEntry> entries;
  try {
    const int version = manifest.at("version").get<int>();
    if (version != kManifestVersion) {
      throw Error(ErrorCode::VersionMismatch,
                  "manifest version " + std::to_string(version));
    }
    const auto dim = manifest.at("dim").get<std::size_t>();
    for (const auto& rec : manifest.at("entries")) {
      MemoryEntry e;
      e.id = rec.at("id").get<std::string>();
      const fs::path image = rec.at("image").get<std::string>();
      e.image_path = image.is_absolute() ? image : (dir / image).lexically_normal();
      const fs::path features_path = dir / rec.at("features").get<std::string>();
      const fs::path mask_path = dir / rec.at("mask").get<std::string>();
      for (const auto& p : {features_path, mask_path}) {
        if (!fs::exists(p)) {
          throw Error(ErrorCode::MissingFile,
                      "entry '" + e.id + "': missing " + p.string());
        }
      }
      if (rec.contains("checksum")) {
        const auto& sums = rec.at("checksum");
        if (sums.contains("features") &&
            sums.at("features").get<std::string>() != file_checksum(features_path)) {
          throw Error(ErrorCode::ChecksumMismatch,
                      "entry '" + e.id + "': " + features_path.string());
        }
        if (sums.contains("mask") &&
            sums.at("mask").get<std::string>() != file_checksum(mask_path)) {
          throw Error(ErrorCode::ChecksumMismatch,
                      "entry '" + e.id + "': " + mask_path.string());
        }
      }
      e.descriptor = rec.at("descriptor").get<std::vector<float>>();
      if (e.descriptor.size() != dim) {
        throw Error(ErrorCode::DimMismatch,
                    "entry '" + e.id + "' descriptor has " +
                        std::to_string(e.descriptor.size()) + " values, manifest dim " +
                        std::to_string(dim));
      }
      e.features = std::make_shared<const FeatureGrid>(read_feature_grid(features_path));
      e.mask = std::make_shared<const BinaryMask>(read_mask_png(mask_path));
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadManifest, e.what());
  }
  return MemoryBank::from_entries(std::move(entries));
}

}  // namespace memsam
