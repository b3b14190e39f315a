#include "brp/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brp/csv.hpp"
#include "brp/error.hpp"

namespace brp {

double BinningSpec::total_good() const noexcept { return std::accumulate(good.begin(), good.end(), 0.0); }
double BinningSpec::total_bad() const noexcept { return std::accumulate(bad.begin(), bad.end(), 0.0); }

std::size_t BinningSpec::effective_bins() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < good.size(); ++i) n += (good[i] + bad[i] > 0.0) ? 1 : 0;
  return n;
}

std::size_t BinningSpec::bin_of(std::optional<double> value) const {
  if (!value) {
    if (!has_missing_bin) throw DataError("feature " + feature + " has no missing bin");
    return good.size() - 1;
  }
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), *value) - edges.begin());
}

BinningSpec quantile_bins(std::span<const std::optional<double>> values, std::span<const std::uint8_t> labels,
                          std::size_t n_bins, std::string feature) {
  if (values.size() != labels.size()) throw DataError("quantile_bins: values and labels differ in length");
  if (n_bins < 1) throw ConfigError("quantile_bins: n_bins must be >= 1");
  std::vector<double> present;
  present.reserve(values.size());
  bool any_missing = false;
  for (const auto& v : values) {
    if (v) {
      present.push_back(*v);
    } else {
      any_missing = true;
    }
  }
  if (present.empty()) throw DataError("feature " + feature + " is unbinnable: all values missing");
  std::sort(present.begin(), present.end());

  BinningSpec spec;
  spec.feature = std::move(feature);
  const std::size_t m = present.size();
  // Lower empirical quantile: edge_k = x_(ceil(k m / n)), bins closed on the right.
  for (std::size_t k = 1; k < n_bins; ++k) {
    const std::size_t rank = (k * m + n_bins - 1) / n_bins;  // ceil, 1-based
    if (rank == 0) continue;
    const double e = present[rank - 1];
    if (e >= present.back()) break;  // would leave the last bin empty
    if (spec.edges.empty() || e > spec.edges.back()) spec.edges.push_back(e);
  }
  const std::size_t value_bins = spec.edges.size() + 1;
  spec.has_missing_bin = any_missing;
  spec.good.assign(value_bins + (any_missing ? 1 : 0), 0.0);
  spec.bad.assign(spec.good.size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto b = spec.bin_of(values[i]);
    (labels[i] ? spec.bad : spec.good)[b] += 1.0;
  }
  return spec;
}

BinningSpec quantile_bins(const FeatureMatrix& m, std::size_t column, std::size_t n_bins) {
  std::vector<std::optional<double>> v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m.at(r, column);
  return quantile_bins(v, m.labels(), n_bins, m.column(column).name);
}

namespace {

struct Shares {
  std::vector<double> g, b;  // per non-empty bin shares
  std::vector<std::size_t> bins;
};

Shares shares(const BinningSpec& spec, double smoothing) {
  if (smoothing < 0.0) throw ConfigError("IV smoothing must be >= 0");
  const double G = spec.total_good(), B = spec.total_bad();
  if (G <= 0.0 || B <= 0.0) throw DataError("information value undefined for single-class data (" + spec.feature + ")");
  Shares s;
  bool zero = false;
  for (std::size_t i = 0; i < spec.bin_count(); ++i) {
    if (spec.good[i] + spec.bad[i] <= 0.0) continue;
    s.bins.push_back(i);
    zero = zero || spec.good[i] == 0.0 || spec.bad[i] == 0.0;
  }
  const double add = zero ? smoothing : 0.0;
  double gs = 0.0, bs = 0.0;
  for (auto i : s.bins) {
    gs += spec.good[i] + add;
    bs += spec.bad[i] + add;
  }
  for (auto i : s.bins) {
    s.g.push_back((spec.good[i] + add) / gs);
    s.b.push_back((spec.bad[i] + add) / bs);
  }
  return s;
}

}  // namespace

std::vector<double> weight_of_evidence(const BinningSpec& spec, double smoothing) {
  const auto s = shares(spec, smoothing);
  std::vector<double> woe(spec.bin_count(), 0.0);
  for (std::size_t k = 0; k < s.bins.size(); ++k) woe[s.bins[k]] = std::log(s.g[k] / s.b[k]);
  return woe;
}

std::vector<double> iv_contributions(const BinningSpec& spec, double smoothing) {
  const auto s = shares(spec, smoothing);
  std::vector<double> out(spec.bin_count(), 0.0);
  for (std::size_t k = 0; k < s.bins.size(); ++k) {
    const double d = s.g[k] - s.b[k];
    if (d == 0.0) continue;  // also covers 0 * ln(0/0)
    out[s.bins[k]] = d * std::log(s.g[k] / s.b[k]);
  }
  return out;
}

double information_value(const BinningSpec& spec, double smoothing) {
  const auto terms = iv_contributions(spec, smoothing);
  if (!spec.informative()) return 0.0;
  double iv = 0.0;
  for (double t : terms) iv += t;
  return std::max(iv, 0.0);
}

std::vector<std::string> IvReport::selected_features() const {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.selected) out.push_back(e.feature);
  }
  return out;
}

const IvEntry* IvReport::find(std::string_view feature) const {
  for (const auto& e : entries) {
    if (e.feature == feature) return &e;
  }
  return nullptr;
}

IvReport select_features(const FeatureMatrix& m, const SelectionParams& params) {
  const std::size_t pos = m.positives();
  if (pos == 0 || pos == m.rows()) throw DataError("feature selection needs both classes in the labels");
  IvReport report;
  report.entries.reserve(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    IvEntry e;
    e.feature = m.column(c).name;
    e.family = m.column(c).family;
    e.missing_rate = m.missing_rate(c);
    if (e.missing_rate < 1.0) e.iv = information_value(quantile_bins(m, c, params.n_bins), params.smoothing);
    e.selected = e.iv > params.iv_threshold && e.missing_rate < params.missing_threshold;
    report.entries.push_back(std::move(e));
  }
  std::sort(report.entries.begin(), report.entries.end(), [](const IvEntry& a, const IvEntry& b) {
    if (a.iv != b.iv) return a.iv > b.iv;
    return a.feature < b.feature;
  });
  return report;
}

void write_iv_report_csv(const IvReport& report, std::ostream& out) {
  out << "feature,family,iv,missing_rate,selected\n";
  for (const auto& e : report.entries) {
    out << e.feature << ',' << to_string(e.family) << ',' << csv::format_double(e.iv) << ','
        << csv::format_double(e.missing_rate) << ',' << (e.selected ? 1 : 0) << '\n';
  }
}

}  // namespace brp
