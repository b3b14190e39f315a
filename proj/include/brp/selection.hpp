#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "brp/feature_matrix.hpp"

namespace brp {

// Per-bin counts for one feature. Bins are (-inf, e0], (e0, e1], ..., (e_last, +inf)
// over non-missing values, followed by an optional missing bin.
struct BinningSpec {
  std::string feature;
  std::vector<double> edges;  // strictly increasing interior cut points
  bool has_missing_bin = false;
  std::vector<double> good;  // G_i: label-0 counts
  std::vector<double> bad;   // B_i: label-1 counts

  std::size_t bin_count() const noexcept { return good.size(); }
  double total_good() const noexcept;
  double total_bad() const noexcept;
  std::size_t effective_bins() const noexcept;  // bins holding at least one row
  bool informative() const noexcept { return effective_bins() >= 2; }
  // Index of the bin a value falls into (nullopt -> missing bin).
  std::size_t bin_of(std::optional<double> value) const;
};

// Throws DataError ("unbinnable") when every value is missing.
BinningSpec quantile_bins(std::span<const std::optional<double>> values, std::span<const std::uint8_t> labels,
                          std::size_t n_bins, std::string feature = {});
BinningSpec quantile_bins(const FeatureMatrix& m, std::size_t column, std::size_t n_bins);

inline constexpr double kDefaultIvSmoothing = 0.5;

// Per-bin terms (G_i/G - B_i/B) * ln((G_i/G)/(B_i/B)) over non-empty bins.
// `smoothing` is added to every count only when some non-empty bin has a zero count.
std::vector<double> iv_contributions(const BinningSpec& spec, double smoothing = kDefaultIvSmoothing);
std::vector<double> weight_of_evidence(const BinningSpec& spec, double smoothing = kDefaultIvSmoothing);
// Throws DataError when G == 0 or B == 0. Uninformative specs yield 0.
double information_value(const BinningSpec& spec, double smoothing = kDefaultIvSmoothing);

struct SelectionParams {
  std::size_t n_bins = 10;
  double iv_threshold = 0.02;
  double missing_threshold = 0.7;
  double smoothing = kDefaultIvSmoothing;
};

struct IvEntry {
  std::string feature;
  Family family = Family::FR;
  double iv = 0.0;
  double missing_rate = 0.0;
  bool selected = false;
};

// Sorted by IV descending, then feature name.
struct IvReport {
  std::vector<IvEntry> entries;

  std::vector<std::string> selected_features() const;
  const IvEntry* find(std::string_view feature) const;
};

IvReport select_features(const FeatureMatrix& m, const SelectionParams& params = {});
void write_iv_report_csv(const IvReport& report, std::ostream& out);

}  // namespace brp
