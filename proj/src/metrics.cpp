#include "brp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "brp/csv.hpp"
#include "brp/error.hpp"

namespace brp {

double ConfusionCounts::tpr() const noexcept {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double ConfusionCounts::fpr() const noexcept {
  return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(fp + tn);
}

ConfusionCounts confusion(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  if (scores.size() != labels.size()) throw DataError("confusion: scores and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i]) {
      predicted ? ++c.tp : ++c.fn;
    } else {
      predicted ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DataError("roc: scores and labels differ in length");
  std::size_t pos = 0;
  for (auto l : labels) pos += l ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("roc: both classes must be present");
  for (double s : scores) {
    if (std::isnan(s)) throw NumericError("roc: NaN score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      labels[order[i]] ? ++tp : ++fp;
      ++i;
    }
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  return curve;
}

double RocCurve::area() const noexcept {
  double a = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    a += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return a;
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return roc_curve(scores, labels).area();
}

void write_roc_csv(const RocCurve& curve, std::ostream& out) {
  out << "fpr,tpr,threshold\n";
  for (const auto& p : curve.points) {
    out << csv::format_double(p.fpr) << ',' << csv::format_double(p.tpr) << ',' << csv::format_double(p.threshold)
        << '\n';
  }
}

RocCurve read_roc_csv(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  reader.expect_header({"fpr", "tpr", "threshold"});
  RocCurve curve;
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    if (f.size() != 3) reader.fail("expected 3 fields");
    auto a = csv::parse_double(f[0]), b = csv::parse_double(f[1]), t = csv::parse_double(f[2]);
    if (!a || !b || !t) reader.fail("malformed ROC row");
    curve.points.push_back({*a, *b, *t});
  }
  return curve;
}

}  // namespace brp
