#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "brp/feature_matrix.hpp"
#include "json.hpp"

namespace brp {

enum class ModelFamily : std::uint8_t { logistic, random_forest, gbdt, mlp };
std::string_view to_string(ModelFamily f) noexcept;
std::optional<ModelFamily> parse_model_family(std::string_view s) noexcept;
const std::vector<ModelFamily>& all_model_families();

struct LogisticParams {
  double l2 = 1.0;
  double tol = 1e-8;
  int max_iter = 5000;
};

struct ForestParams {
  int n_trees = 200;
  int max_depth = 12;
  int min_leaf = 5;
  int max_bins = 255;
  bool bootstrap = true;
};

struct GbdtParams {
  int rounds = 200;
  int max_leaves = 31;
  double learning_rate = 0.05;
  int max_bins = 255;
  int min_child_samples = 20;
  double lambda = 1.0;
  double min_child_hessian = 1e-3;
  int max_depth = -1;  // unlimited
};

struct MlpParams {
  int embed_width = 16;
  int hidden1 = 64;
  int hidden2 = 32;
  int batch_size = 64;
  int epochs = 50;
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ModelConfig {
  ModelFamily family = ModelFamily::logistic;
  LogisticParams logistic;
  ForestParams forest;
  GbdtParams gbdt;
  MlpParams mlp;
  std::uint64_t seed = 0;
  int threads = 1;

  // Throws ConfigError for out-of-range hyperparameters of the active family.
  void validate() const;

  // Named access to the active family's hyperparameters, used by grids.
  static const std::vector<std::string>& parameter_names(ModelFamily family);
  void set(std::string_view name, double value);
  double get(std::string_view name) const;
};

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Input preprocessing stored with a model. Columns are matched by name.
struct InputSchema {
  std::vector<ColumnInfo> columns;
  std::vector<double> impute;  // training medians
  std::vector<double> mean;    // of imputed training values
  std::vector<double> scale;   // standard deviation, 1 for constant columns
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x <= threshold goes left
  bool missing_left = true;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  // `row` holds raw feature values with NaN for missing.
  double predict(std::span<const double> row) const;
  std::size_t leaves() const noexcept;
};

struct LinearModel {
  std::vector<double> coef;  // on standardized inputs
  double intercept = 0.0;
};

struct ForestModel {
  std::vector<Tree> trees;
};

struct GbdtModel {
  double base_rate = 0.0;
  double base_score = 0.0;  // log-odds of base_rate
  std::vector<Tree> trees;  // leaf values already include shrinkage
};

struct MlpModel {
  std::size_t embed_width = 0;
  std::size_t hidden1 = 0;
  std::size_t hidden2 = 0;
  std::vector<std::size_t> rb_columns;     // schema indices routed through the projection
  std::vector<std::size_t> other_columns;  // schema indices fed directly
  std::vector<double> params;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string data_fingerprint;
  std::size_t rows = 0;
  std::size_t positives = 0;
  std::size_t iterations = 0;
  std::vector<double> loss_history;
};

struct TrainedModel {
  ModelFamily family = ModelFamily::logistic;
  ModelConfig config;
  InputSchema schema;
  std::variant<LinearModel, ForestModel, GbdtModel, MlpModel> params;
  TrainingMetadata metadata;
};

// All fitters take labels explicitly; they require at least two samples of
// each class and finite (sanitized) inputs.
TrainedModel fit_logistic(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg);
TrainedModel fit_random_forest(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg);
TrainedModel fit_gbdt(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg);
TrainedModel fit_mlp(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg);
TrainedModel fit_model(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg);
inline TrainedModel fit_model(const FeatureMatrix& X, const ModelConfig& cfg) { return fit_model(X, X.labels(), cfg); }

// Scores in [0, 1], one per row, in row order. Throws DataError on schema mismatch.
std::vector<double> predict_proba(const TrainedModel& model, const FeatureMatrix& X);

std::string data_fingerprint(const FeatureMatrix& X, std::span<const std::uint8_t> y);

inline constexpr std::string_view kModelFormatVersion = "brp.model/1";
nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

// ---- Grid search -------------------------------------------------------------

struct HyperGrid {
  ModelFamily family = ModelFamily::logistic;
  // Axis order defines the lexicographic order of cells (first axis slowest).
  std::vector<std::pair<std::string, std::vector<double>>> axes;

  std::vector<ModelConfig> cells(const ModelConfig& base) const;
  static HyperGrid defaults(ModelFamily family);
};

struct GridResult {
  ModelConfig best;
  std::size_t best_index = 0;
  std::vector<ModelConfig> cells;
  std::vector<double> mean_auc;
  std::vector<std::vector<double>> fold_auc;
};

// Stratified fold assignment (fold id per row).
std::vector<int> stratified_folds(std::span<const std::uint8_t> labels, int folds, std::uint64_t seed);

// Best cell = highest mean validation AUC; ties go to the earliest cell.
GridResult grid_search_cv(const HyperGrid& grid, const ModelConfig& base, const FeatureMatrix& X,
                          std::span<const std::uint8_t> y, int folds = 5, std::uint64_t seed = 0);

}  // namespace brp
