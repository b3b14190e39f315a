#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace brp {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  // TP / (TP + FN); 0 when there are no positives.
  double tpr() const noexcept;
  // FP / (FP + TN); 0 when there are no negatives.
  double fpr() const noexcept;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Predicted positive <=> score >= threshold.
ConfusionCounts confusion(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the (0, 0) anchor

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

// Vertices from threshold +inf down to the lowest score; tied scores share a vertex.
struct RocCurve {
  std::vector<RocPoint> points;

  double area() const noexcept;  // trapezoidal
  friend bool operator==(const RocCurve&, const RocCurve&) = default;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// fpr,tpr,threshold
void write_roc_csv(const RocCurve& curve, std::ostream& out);
RocCurve read_roc_csv(std::istream& in, const std::string& source_name);

}  // namespace brp
