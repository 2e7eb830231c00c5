#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "memsam/tensor_io.hpp"

namespace memsam {

/// One annotated exemplar: the reference image, its mask, its normalized
/// patch embeddings and the mean-pooled global descriptor used for lookup.
struct MemoryEntry {
  std::string id;
  std::filesystem::path image_path;
  std::shared_ptr<const BinaryMask> mask;
  std::shared_ptr<const FeatureGrid> features;
  std::vector<float> descriptor;
};

/// Input record for build_bank; the descriptor is computed from `features`.
struct ExemplarInput {
  std::string id;
  std::filesystem::path image_path;
  BinaryMask mask;
  FeatureGrid features;
};

/// Immutable exemplar collection with a contiguous descriptor matrix for an
/// exact linear scan. Row k of index() is entries()[k].descriptor.
class MemoryBank {
 public:
  MemoryBank() = default;

  /// Validates unique ids, a common descriptor dimension and that each
  /// entry's mask matches its feature grid's source size.
  static MemoryBank from_entries(std::vector<MemoryEntry> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<MemoryEntry>& entries() const noexcept { return entries_; }
  const MemoryEntry& entry(std::size_t k) const { return entries_.at(k); }
  std::span<const float> index() const noexcept { return index_; }
  std::span<const float> descriptor_row(std::size_t k) const;

  /// New bank holding the given entries (by position), in the given order.
  MemoryBank subset(std::span<const std::size_t> positions) const;

 private:
  std::vector<MemoryEntry> entries_;
  std::vector<float> index_;
  std::size_t dim_ = 0;
};

/// Exact dot product of two float vectors, accumulated in double. Float
/// products are exact in double, so the result depends only on the order of
/// the additions, which is ascending index.
double dot_exact(std::span<const float> a, std::span<const float> b);

/// Mean of all patch vectors, re-normalized to unit length.
/// Throws EmptyInput for an empty grid, DegenerateDescriptor if the mean
/// vector has norm < 1e-12.
std::vector<float> global_descriptor(const FeatureGrid& features);

/// Throws EmptyInput, DuplicateId or DimMismatch.
MemoryBank build_bank(std::vector<ExemplarInput> inputs);

struct RetrievalHit {
  std::size_t entry;  // position in MemoryBank::entries()
  double similarity;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Top-k entries by cosine similarity (dot product of unit vectors),
/// descending; equal similarities keep insertion order.
/// Throws EmptyBank, DimMismatch, or ConfigError when k is 0 or > size.
std::vector<RetrievalHit> retrieve(std::span<const float> query,
                                   const MemoryBank& bank, std::size_t k);

inline constexpr double kDefaultDedupThreshold = 0.995;

struct DedupResult {
  MemoryBank bank;
  std::vector<std::string> removed;
};

/// Greedy scan in insertion order: an entry is dropped when its descriptor
/// similarity to any already-kept entry is >= threshold.
DedupResult dedup(const MemoryBank& bank,
                  double threshold = kDefaultDedupThreshold);

/// Same greedy rule over bare descriptors; returns kept positions.
std::vector<std::size_t> dedup_positions(
    std::span<const std::vector<float>> descriptors, double threshold);

/// Directory layout: manifest.json, features/<id>.msfg, masks/<id>.png.
void save_bank(const MemoryBank& bank, const std::filesystem::path& dir);

/// Throws MissingManifest, BadManifest, VersionMismatch, MissingFile (naming
/// the entry id) or ChecksumMismatch.
MemoryBank load_bank(const std::filesystem::path& dir);

}  // namespace memsam
