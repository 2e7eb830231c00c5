#include "memsam/correspondence.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Core>

#include "memsam/error.hpp"

namespace memsam {
namespace {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

// Below kFloatDim the product runs in double (float inputs, so every product
// is exact). From kFloatDim up, float products over kBlock-wide slices are
// reduced in double.
constexpr Eigen::Index kFloatDim = 512;
constexpr Eigen::Index kBlock = 256;

void check_dims(const FeatureGrid& query, const FeatureGrid& ref) {
  if (query.dim() != ref.dim()) {
    throw Error(ErrorCode::DimMismatch,
                "query dim " + std::to_string(query.dim()) + " vs exemplar dim " +
                    std::to_string(ref.dim()));
  }
}

// rows x subset.size() similarity matrix for query patches [first, last).
MatrixD similarity_block(const FeatureGrid& query, std::size_t first,
                         std::size_t last, const FeatureGrid& ref,
                         std::span<const std::size_t> subset) {
  const auto dim = static_cast<Eigen::Index>(query.dim());
  const auto n = static_cast<Eigen::Index>(last - first);
  const auto m = static_cast<Eigen::Index>(subset.size());

  const Eigen::Map<const RowMatrixF> q(query.data().data() + first * query.dim(),
                                       n, dim);
  RowMatrixF r(m, dim);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto row = ref.patch(subset[static_cast<std::size_t>(k)]);
    r.row(k) = Eigen::Map<const Eigen::RowVectorXf>(row.data(), dim);
  }

  if (dim < kFloatDim) {
    const RowMatrixD qd = q.cast<double>();
    const RowMatrixD rd = r.cast<double>();
    return qd * rd.transpose();
  }
  MatrixD sims = MatrixD::Zero(n, m);
  for (Eigen::Index d0 = 0; d0 < dim; d0 += kBlock) {
    const Eigen::Index width = std::min(kBlock, dim - d0);
    Eigen::MatrixXf partial = q.middleCols(d0, width) * r.middleCols(d0, width).transpose();
    sims += partial.cast<double>();
  }
  return sims;
}

BestMatch argmax_row(const MatrixD& sims, Eigen::Index row,
                     std::span<const std::size_t> subset) {
  BestMatch best{subset[0], sims(row, 0)};
  for (Eigen::Index k = 1; k < sims.cols(); ++k) {
    const double s = sims(row, k);
    const std::size_t j = subset[static_cast<std::size_t>(k)];
    if (s > best.similarity || (s == best.similarity && j < best.index)) {
      best = {j, s};
    }
  }
  return best;
}

void check_subset(const FeatureGrid& ref, std::span<const std::size_t> subset) {
  if (subset.empty()) throw Error(ErrorCode::EmptySubset, "empty patch subset");
  for (std::size_t j : subset) {
    if (j >= ref.patch_count()) {
      throw Error(ErrorCode::IndexError, "subset index " + std::to_string(j));
    }
  }
}

}  // namespace

void MatchConfig::validate() const {
  const auto ok = [](double t) { return t >= 0.0 && t <= 1.0; };
  if (!ok(tau_fg) || !ok(tau_bg)) {
    throw Error(ErrorCode::ConfigError,
                "thresholds must lie in [0, 1]: tau_fg=" + std::to_string(tau_fg) +
                    " tau_bg=" + std::to_string(tau_bg));
  }
}

BestMatch similarity_row(const FeatureGrid& query, std::size_t i,
                         const FeatureGrid& ref,
                         std::span<const std::size_t> subset) {
  check_dims(query, ref);
  check_subset(ref, subset);
  if (i >= query.patch_count()) {
    throw Error(ErrorCode::IndexError, "query patch " + std::to_string(i));
  }
  const MatrixD sims = similarity_block(query, i, i + 1, ref, subset);
  return argmax_row(sims, 0, subset);
}

std::vector<BestMatch> best_matches(const FeatureGrid& query,
                                    const FeatureGrid& ref,
                                    std::span<const std::size_t> subset) {
  check_dims(query, ref);
  check_subset(ref, subset);
  std::vector<BestMatch> out;
  out.reserve(query.patch_count());
  // Bound the similarity block to ~32 MB regardless of grid size.
  const std::size_t rows_per_chunk =
      std::max<std::size_t>(1, (std::size_t{4} << 20) / std::max<std::size_t>(1, subset.size()));
  for (std::size_t first = 0; first < query.patch_count(); first += rows_per_chunk) {
    const std::size_t last = std::min(query.patch_count(), first + rows_per_chunk);
    const MatrixD sims = similarity_block(query, first, last, ref, subset);
    for (Eigen::Index r = 0; r < sims.rows(); ++r) {
      out.push_back(argmax_row(sims, r, subset));
    }
  }
  return out;
}

MatchResult match_constrained(const FeatureGrid& query, const FeatureGrid& ref,
                              const PatchLabelGrid& ref_labels,
                              const MatchConfig& config) {
  config.validate();
  check_dims(query, ref);
  if (ref_labels.rows() != ref.rows() || ref_labels.cols() != ref.cols()) {
    throw Error(ErrorCode::DimMismatch, "exemplar labels do not match its grid");
  }
  const auto fg_set = ref_labels.indices_of(PatchLabel::Foreground);
  const auto bg_set = ref_labels.indices_of(PatchLabel::Background);
  if (fg_set.empty()) {
    throw Error(ErrorCode::DegenerateExemplar, "exemplar has no foreground patch");
  }
  if (bg_set.empty()) {
    throw Error(ErrorCode::DegenerateExemplar, "exemplar has no background patch");
  }

  const auto fg_best = best_matches(query, ref, fg_set);
  const auto bg_best = best_matches(query, ref, bg_set);

  MatchResult result;
  for (std::size_t i = 0; i < query.patch_count(); ++i) {
    if (fg_best[i].similarity >= config.tau_fg) {
      result.fg.push_back({i, fg_best[i].index, fg_best[i].similarity,
                           patch_center(i, query), Side::Foreground});
    }
    if (bg_best[i].similarity >= config.tau_bg) {
      result.bg.push_back({i, bg_best[i].index, bg_best[i].similarity,
                           patch_center(i, query), Side::Background});
    }
  }
  return result;
}

}  // namespace memsam
