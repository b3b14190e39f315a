#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brp/feature_matrix.hpp"
#include "brp/features.hpp"
#include "brp/registry.hpp"
#include "json.hpp"

namespace brp {

struct FeatureConfig {
  bool fr = true;
  bool afe = true;
  bool rb = true;
  AfeGrammar grammar;
  TrendKind trend = TrendKind::difference;

  void validate() const;
};

// Column layout of a W-year sample: FR blocks per lag year (suffix _lag<k>),
// line-item growth across the window, AFE blocks per lag year, then RB.
std::vector<ColumnInfo> window_columns(const FeatureConfig& cfg, int window_length);

// Samples of one (W, t0) pair. Label 1 = bankruptcy dated in t0 + 1.
struct SampleSet {
  int window_length = 0;
  int reference_year = 0;
  FeatureMatrix matrix;
};

SampleSet build_samples(const Registry& registry, const FeatureConfig& cfg, int window_length, int reference_year);

struct SplitYears {
  int train_first = 2012;
  int train_last = 2018;
  std::vector<int> pre_covid = {2019};
  std::vector<int> post_covid = {2020, 2021};

  std::vector<int> all_years() const;
};

struct SplitBundle {
  int window_length = 0;
  double split_fraction = 0.7;
  std::uint64_t split_seed = 0;
  bool group_by_company = false;
  FeatureMatrix train;
  FeatureMatrix test;
  FeatureMatrix pre_covid;
  FeatureMatrix post_covid;
};

SplitBundle assemble_splits(std::span<const SampleSet> samplesets, double split_fraction, std::uint64_t split_seed,
                            const SplitYears& years = {}, bool group_by_company = false);

struct UndersampleResult {
  FeatureMatrix matrix;
  bool changed = false;
  std::string notice;
};

// Keeps every positive and a seeded uniform subset of negatives so that the
// positive rate is as close to target_rate as whole samples allow.
UndersampleResult undersample(const FeatureMatrix& train, double target_rate, std::uint64_t seed);

// "2.31%"
std::string format_rate(std::size_t positives, std::size_t negatives);

nlohmann::json split_manifest(const SplitBundle& bundle);

}  // namespace brp
