#pragma once

// Histogram machinery shared by the forest and boosting learners.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "brp/models.hpp"

namespace brp::trees {

// Bin b holds training values in [lower[b], upper[b]]; both are observed values.
struct FeatureBins {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const noexcept { return upper.size(); }
  std::uint16_t missing_code() const noexcept { return static_cast<std::uint16_t>(upper.size()); }
  std::uint16_t code(double v) const;  // NaN -> missing_code()
};

// Distinct values get their own bin when there are at most max_bins of them;
// otherwise values are grouped into count-balanced bins.
FeatureBins make_bins(std::span<const double> values, int max_bins);

// Column-major bin codes for a whole training matrix.
struct BinnedData {
  std::size_t rows = 0;
  std::vector<FeatureBins> bins;
  std::vector<std::vector<std::uint16_t>> codes;

  std::size_t cols() const noexcept { return bins.size(); }
};

// `columns[c][r]` are raw values with NaN for missing.
BinnedData bin_columns(const std::vector<std::vector<double>>& columns, int max_bins);

struct GradStats {
  double g = 0.0;
  double h = 0.0;
  double n = 0.0;

  GradStats& operator+=(const GradStats& o) {
    g += o.g;
    h += o.h;
    n += o.n;
    return *this;
  }
};

struct SplitChoice {
  int feature = -1;
  double gain = 0.0;
  double threshold = 0.0;
  bool missing_left = true;
  std::uint16_t last_left_bin = 0;

  bool valid() const noexcept { return feature >= 0; }
};

struct GbdtSplitLimits {
  double lambda = 1.0;
  double min_child_samples = 1.0;
  double min_child_hessian = 0.0;
};

// Leaf objective G^2 / (H + lambda).
double leaf_objective(const GradStats& s, double lambda) noexcept;

// `hist` has bins.size() + 1 entries; the last one is the missing bin.
// Candidate cuts lie between consecutive non-empty bins, with the threshold
// at the midpoint of the two bins' facing values.
SplitChoice best_gbdt_split(std::span<const GradStats> hist, const FeatureBins& bins, const GbdtSplitLimits& limits,
                            int feature);

// Histogram holding only the non-empty value bins, in ascending code order,
// plus the missing bin.
struct GradHistogram {
  std::vector<std::uint16_t> codes;
  std::vector<GradStats> stats;
  GradStats missing;
};

SplitChoice best_gbdt_split(const GradHistogram& hist, const FeatureBins& bins, const GbdtSplitLimits& limits,
                            int feature);

// parent minus child, where child's rows are a subset of parent's.
GradHistogram subtract(const GradHistogram& parent, const GradHistogram& child);

struct ClassStats {
  double pos = 0.0;
  double n = 0.0;
};

double gini(const ClassStats& s) noexcept;

// Weighted Gini decrease; each child needs at least min_leaf weight.
SplitChoice best_gini_split(std::span<const ClassStats> hist, const FeatureBins& bins, double min_leaf, int feature);

struct ClassHistogram {
  std::vector<std::uint16_t> codes;
  std::vector<ClassStats> stats;
  ClassStats missing;
};

SplitChoice best_gini_split(const ClassHistogram& hist, const FeatureBins& bins, double min_leaf, int feature);

}  // namespace brp::trees
