#pragma once

// Helpers shared by the model sources. Not installed.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "brp/models.hpp"

namespace brp::detail {

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Throws DataError unless y matches X and holds at least two of each class;
// throws NumericError on infinite cells.
void check_training_data(const FeatureMatrix& X, std::span<const std::uint8_t> y);

InputSchema fit_schema(const FeatureMatrix& X);

// For each schema column, its index in X. Throws DataError listing missing
// and extra columns.
std::vector<std::size_t> align_columns(const InputSchema& schema, const FeatureMatrix& X);

// Row-major, median-imputed and standardized, in schema order.
std::vector<double> standardized_rows(const InputSchema& schema, const FeatureMatrix& X,
                                      std::span<const std::size_t> cols);

// Column-major raw values with NaN for missing, in schema order.
std::vector<std::vector<double>> raw_columns(const FeatureMatrix& X, std::span<const std::size_t> cols);

TrainingMetadata base_metadata(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg);

}  // namespace brp::detail
