#pragma once

#include <random>
#include <vector>

#include "memsam/tensor_io.hpp"

namespace memsam::bench {

inline FeatureGrid random_grid(std::mt19937_64& rng, std::uint32_t rows, std::uint32_t cols,
                               std::uint32_t dim) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> data(static_cast<std::size_t>(rows) * cols * dim);
  for (auto& v : data) v = n(rng);
  return l2_normalize_grid(FeatureGrid(rows, cols, dim, std::move(data), 16,
                                       {rows * 16, cols * 16}));
}

inline PatchLabelGrid centre_square(std::uint32_t rows, std::uint32_t cols) {
  std::vector<PatchLabel> labels(static_cast<std::size_t>(rows) * cols, PatchLabel::Background);
  for (std::uint32_t r = rows / 4; r < 3 * rows / 4; ++r) {
    for (std::uint32_t c = cols / 4; c < 3 * cols / 4; ++c) {
      labels[static_cast<std::size_t>(r) * cols + c] = PatchLabel::Foreground;
    }
  }
  return PatchLabelGrid(rows, cols, std::move(labels));
}

}  // namespace memsam::bench
