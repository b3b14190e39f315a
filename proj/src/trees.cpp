#include "brp/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace brp::trees {

namespace {
constexpr double kMinGain = 1e-12;
// Threshold of the "all values left, missing right" cut.
constexpr double kAllValuesLeft = std::numeric_limits<double>::max();

double midpoint(double a, double b) noexcept { return a + (b - a) * 0.5; }
}  // namespace

std::uint16_t FeatureBins::code(double v) const {
  if (std::isnan(v)) return missing_code();
  auto it = std::lower_bound(upper.begin(), upper.end(), v);
  if (it == upper.end()) return static_cast<std::uint16_t>(upper.size() - 1);
  return static_cast<std::uint16_t>(it - upper.begin());
}

FeatureBins make_bins(std::span<const double> values, int max_bins) {
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) {
    if (!std::isnan(x)) v.push_back(x);
  }
  FeatureBins bins;
  if (v.empty()) return bins;
  std::sort(v.begin(), v.end());
  std::vector<std::pair<double, std::size_t>> distinct;  // value, count
  for (double x : v) {
    if (distinct.empty() || distinct.back().first != x) {
      distinct.emplace_back(x, 1);
    } else {
      ++distinct.back().second;
    }
  }
  const auto cap = static_cast<std::size_t>(std::max(2, max_bins));
  if (distinct.size() <= cap) {
    for (const auto& [x, c] : distinct) {
      bins.lower.push_back(x);
      bins.upper.push_back(x);
    }
    return bins;
  }
  const double n = static_cast<double>(v.size());
  std::size_t before = 0;
  std::size_t current = SIZE_MAX;
  for (const auto& [x, c] : distinct) {
    const auto idx = static_cast<std::size_t>(std::floor(static_cast<double>(before) * static_cast<double>(cap) / n));
    if (idx != current) {
      bins.lower.push_back(x);
      bins.upper.push_back(x);
      current = idx;
    } else {
      bins.upper.back() = x;
    }
    before += c;
  }
  return bins;
}

BinnedData bin_columns(const std::vector<std::vector<double>>& columns, int max_bins) {
  BinnedData d;
  d.rows = columns.empty() ? 0 : columns.front().size();
  d.bins.reserve(columns.size());
  d.codes.reserve(columns.size());
  for (const auto& col : columns) {
    d.bins.push_back(make_bins(col, max_bins));
    const auto& b = d.bins.back();
    std::vector<std::uint16_t> codes(col.size());
    for (std::size_t r = 0; r < col.size(); ++r) codes[r] = b.code(col[r]);
    d.codes.push_back(std::move(codes));
  }
  return d;
}

double leaf_objective(const GradStats& s, double lambda) noexcept { return s.g * s.g / (s.h + lambda); }

namespace {

template <typename Hist, typename Stats>
Hist compact(std::span<const Stats> hist, std::size_t value_bins) {
  Hist out;
  for (std::size_t b = 0; b < value_bins; ++b) {
    if (hist[b].n > 0.0) {
      out.codes.push_back(static_cast<std::uint16_t>(b));
      out.stats.push_back(hist[b]);
    }
  }
  out.missing = hist[value_bins];
  return out;
}

}  // namespace

SplitChoice best_gbdt_split(std::span<const GradStats> hist, const FeatureBins& bins, const GbdtSplitLimits& limits,
                            int feature) {
  return best_gbdt_split(compact<GradHistogram>(hist, bins.size()), bins, limits, feature);
}

SplitChoice best_gbdt_split(const GradHistogram& hist, const FeatureBins& bins, const GbdtSplitLimits& limits,
                            int feature) {
  SplitChoice best;
  GradStats values{};
  for (const auto& s : hist.stats) values += s;
  const GradStats& miss = hist.missing;
  GradStats total = values;
  total += miss;
  if (total.n < 2.0 * limits.min_child_samples || total.h < 2.0 * limits.min_child_hessian) return best;
  if (hist.codes.size() + (miss.n > 0.0 ? 1 : 0) < 2) return best;
  const double parent = leaf_objective(total, limits.lambda);

  auto ok = [&](const GradStats& s) { return s.n >= limits.min_child_samples && s.h >= limits.min_child_hessian; };
  auto consider = [&](const GradStats& L, const GradStats& R, double threshold, bool missing_left, std::size_t b) {
    if (!ok(L) || !ok(R)) return;
    const double gain = leaf_objective(L, limits.lambda) + leaf_objective(R, limits.lambda) - parent;
    if (gain > kMinGain && gain > best.gain) {
      best.feature = feature;
      best.gain = gain;
      best.threshold = threshold;
      best.missing_left = missing_left;
      best.last_left_bin = static_cast<std::uint16_t>(b);
    }
  };

  GradStats left{};
  const std::size_t k = hist.codes.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t b = hist.codes[i];
    left += hist.stats[i];
    if (i + 1 < k) {
      const GradStats right{values.g - left.g, values.h - left.h, values.n - left.n};
      const double thr = midpoint(bins.upper[b], bins.lower[hist.codes[i + 1]]);
      if (miss.n > 0.0) {
        GradStats r2 = right;
        r2 += miss;
        consider(left, r2, thr, false, b);
        GradStats l2 = left;
        l2 += miss;
        consider(l2, right, thr, true, b);
      } else {
        consider(left, right, thr, left.n >= right.n, b);
      }
    } else if (miss.n > 0.0) {
      consider(left, miss, kAllValuesLeft, false, b);
    }
  }
  return best;
}

GradHistogram subtract(const GradHistogram& parent, const GradHistogram& child) {
  GradHistogram out;
  out.codes.reserve(parent.codes.size());
  out.stats.reserve(parent.codes.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < parent.codes.size(); ++i) {
    GradStats s = parent.stats[i];
    if (j < child.codes.size() && child.codes[j] == parent.codes[i]) {
      s = {s.g - child.stats[j].g, s.h - child.stats[j].h, s.n - child.stats[j].n};
      ++j;
    }
    if (s.n > 0.0) {
      out.codes.push_back(parent.codes[i]);
      out.stats.push_back(s);
    }
  }
  out.missing = {parent.missing.g - child.missing.g, parent.missing.h - child.missing.h,
                 parent.missing.n - child.missing.n};
  if (out.missing.n <= 0.0) out.missing = {};
  return out;
}

double gini(const ClassStats& s) noexcept {
  if (s.n <= 0.0) return 0.0;
  const double p = s.pos / s.n;
  return 2.0 * p * (1.0 - p);
}

SplitChoice best_gini_split(std::span<const ClassStats> hist, const FeatureBins& bins, double min_leaf, int feature) {
  return best_gini_split(compact<ClassHistogram>(hist, bins.size()), bins, min_leaf, feature);
}

SplitChoice best_gini_split(const ClassHistogram& hist, const FeatureBins& bins, double min_leaf, int feature) {
  SplitChoice best;
  ClassStats values{};
  for (const auto& s : hist.stats) {
    values.pos += s.pos;
    values.n += s.n;
  }
  const ClassStats& miss = hist.missing;
  const ClassStats total{values.pos + miss.pos, values.n + miss.n};
  if (total.n <= 0.0) return best;
  const double parent = gini(total);

  auto consider = [&](const ClassStats& L, const ClassStats& R, double threshold, bool missing_left, std::size_t b) {
    if (L.n < min_leaf || R.n < min_leaf) return;
    const double gain = parent - (L.n * gini(L) + R.n * gini(R)) / total.n;
    if (gain > kMinGain && gain > best.gain) {
      best.feature = feature;
      best.gain = gain;
      best.threshold = threshold;
      best.missing_left = missing_left;
      best.last_left_bin = static_cast<std::uint16_t>(b);
    }
  };

  ClassStats left{};
  const std::size_t k = hist.codes.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t b = hist.codes[i];
    left.pos += hist.stats[i].pos;
    left.n += hist.stats[i].n;
    if (i + 1 < k) {
      const ClassStats right{values.pos - left.pos, values.n - left.n};
      const double thr = midpoint(bins.upper[b], bins.lower[hist.codes[i + 1]]);
      if (miss.n > 0.0) {
        consider(left, {right.pos + miss.pos, right.n + miss.n}, thr, false, b);
        consider({left.pos + miss.pos, left.n + miss.n}, right, thr, true, b);
      } else {
        consider(left, right, thr, left.n >= right.n, b);
      }
    } else if (miss.n > 0.0) {
      consider(left, miss, kAllValuesLeft, false, b);
    }
  }
  return best;
}

}  // namespace brp::trees
