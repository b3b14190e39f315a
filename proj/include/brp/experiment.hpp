#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brp/metrics.hpp"
#include "brp/models.hpp"
#include "brp/selection.hpp"
#include "brp/windows.hpp"
#include "json.hpp"

namespace brp {

enum class FeatureSet : std::uint8_t { FR, AFE, FR_RB, AFE_RB };
std::string_view to_string(FeatureSet s) noexcept;  // "FR", "AFE", "FR+RB", "AFE+RB"
std::string_view file_token(FeatureSet s) noexcept;  // "fr", "afe", "fr_rb", "afe_rb"
std::optional<FeatureSet> parse_feature_set(std::string_view s) noexcept;
std::vector<Family> families_of(FeatureSet s);
const std::vector<FeatureSet>& all_feature_sets();

enum class EvalSplit : std::uint8_t { test, pre_covid, post_covid };
std::string_view to_string(EvalSplit s) noexcept;
inline constexpr std::array<EvalSplit, 3> kEvalSplits{EvalSplit::test, EvalSplit::pre_covid, EvalSplit::post_covid};

struct AblationCell;

struct ExperimentConfig {
  std::vector<ModelFamily> families{ModelFamily::logistic, ModelFamily::gbdt};
  std::vector<FeatureSet> feature_sets{FeatureSet::FR, FeatureSet::AFE, FeatureSet::FR_RB, FeatureSet::AFE_RB};
  SelectionParams selection;
  double undersample_rate = 0.25;  // 0 keeps the training split as is
  bool grid_search = true;
  int cv_folds = 5;
  std::map<ModelFamily, HyperGrid> grids;  // families absent here use HyperGrid::defaults
  std::map<ModelFamily, ModelConfig> base;  // families absent here use ModelConfig defaults
  std::uint64_t seed = 0;
  int threads = 1;
  // Called once per finished cell, serialized; may be empty.
  std::function<void(const AblationCell&)> on_cell;

  void validate() const;
  HyperGrid grid_for(ModelFamily f) const;
  ModelConfig base_for(ModelFamily f) const;
};

struct SplitEval {
  std::size_t rows = 0;
  std::size_t positives = 0;
  std::optional<double> auc;  // absent when the split lacks one of the classes
  RocCurve roc;
};

struct AblationCell {
  ModelFamily family = ModelFamily::logistic;
  FeatureSet feature_set = FeatureSet::FR;
  int window = 0;
  std::vector<std::string> features;
  std::size_t train_rows = 0;
  std::size_t train_positives = 0;
  ModelConfig chosen;
  std::optional<double> cv_auc;
  std::array<SplitEval, 3> splits;  // indexed by EvalSplit
  TrainedModel model;

  const SplitEval& split(EvalSplit s) const { return splits[static_cast<std::size_t>(s)]; }
};

struct HybridDelta {
  ModelFamily family = ModelFamily::logistic;
  int window = 0;
  FeatureSet hybrid = FeatureSet::FR_RB;
  FeatureSet single = FeatureSet::FR;
  EvalSplit split = EvalSplit::test;
  double absolute = 0.0;  // AUC(hybrid) - AUC(single)
  double relative_pct = 0.0;
};

struct WindowSelection {
  int window = 0;
  IvReport iv;
  SanitizeReport sanitize;
  std::string undersample_notice;
};

struct AblationReport {
  std::vector<AblationCell> cells;  // ordered by window, family, feature set
  std::vector<HybridDelta> deltas;
  std::vector<WindowSelection> selections;

  const AblationCell* find(ModelFamily f, FeatureSet s, int window) const;
};

// Bundles must hold all columns for the requested feature sets. Throws
// DataError when splits disagree in sample keys across feature sets or a
// hybrid set does not contain its single-source counterpart.
AblationReport ablation_matrix(std::span<const SplitBundle> bundles, const ExperimentConfig& cfg);

struct DriftRow {
  ModelFamily family = ModelFamily::logistic;
  FeatureSet feature_set = FeatureSet::FR;
  int window = 0;
  std::optional<double> test;
  std::optional<double> pre_delta;   // AUC(pre_covid) - AUC(test)
  std::optional<double> post_delta;  // AUC(post_covid) - AUC(test)
  // Hybrid rows only: degrades post-Covid while the matching single-source set does not.
  bool hybrid_degrades_alone = false;
  // Hybrid rows only: post-Covid drop larger than the single-source set's.
  bool hybrid_drops_more = false;
};

struct DriftReport {
  std::vector<DriftRow> rows;
};

DriftReport drift_report(const AblationReport& ablation);

// family,feature_set,window,test,pre_covid,post_covid
void write_auc_matrix_csv(const AblationReport& report, std::ostream& out);
void write_drift_csv(const DriftReport& report, std::ostream& out);
nlohmann::json ablation_to_json(const AblationReport& report);
nlohmann::json drift_to_json(const DriftReport& report);

// Fixed-precision AUC text used by every export.
std::string format_auc(std::optional<double> auc);

}  // namespace brp
