#include "brp/feature_matrix.hpp"

#include <cmath>
#include <unordered_map>

#include "brp/csv.hpp"
#include "brp/error.hpp"

namespace brp {

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::FR:
      return "FR";
    case Family::AFE:
      return "AFE";
    case Family::RB:
      return "RB";
  }
  return "?";
}

std::optional<Family> family_of(std::string_view name) noexcept {
  if (name.starts_with("fr_")) return Family::FR;
  if (name.starts_with("afe_")) return Family::AFE;
  if (name.starts_with("rb_")) return Family::RB;
  return std::nullopt;
}

void FeatureVector::push(std::string name, Family family, std::optional<double> value) {
  if (value && std::isnan(*value)) value.reset();
  columns.push_back({std::move(name), family});
  values.push_back(value);
}

std::optional<double> FeatureVector::get(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return values[i];
  }
  return std::nullopt;
}

bool FeatureVector::contains(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return true;
  }
  return false;
}

FeatureMatrix::FeatureMatrix(std::vector<ColumnInfo> columns)
    : columns_(std::move(columns)), values_(columns_.size()), missing_(columns_.size()) {
  std::unordered_map<std::string_view, int> seen;
  for (const auto& c : columns_) {
    if (!seen.emplace(c.name, 0).second) throw DataError("duplicate column name " + c.name);
  }
}

std::vector<std::string> FeatureMatrix::column_names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureMatrix::positives() const noexcept {
  std::size_t n = 0;
  for (auto l : labels_) n += l;
  return n;
}

void FeatureMatrix::add_row(SampleKey key, std::uint8_t label, std::span<const std::optional<double>> values) {
  if (values.size() != columns_.size()) throw DataError("row width does not match column count");
  if (label > 1) throw DataError("label must be 0 or 1");
  keys_.push_back(std::move(key));
  labels_.push_back(label);
  for (std::size_t c = 0; c < values.size(); ++c) {
    const bool miss = !values[c] || std::isnan(*values[c]);
    values_[c].push_back(miss ? 0.0 : *values[c]);
    missing_[c].push_back(miss ? 1 : 0);
  }
}

std::optional<double> FeatureMatrix::at(std::size_t r, std::size_t c) const {
  if (missing_.at(c).at(r)) return std::nullopt;
  return values_[c][r];
}

void FeatureMatrix::set(std::size_t r, std::size_t c, std::optional<double> v) {
  const bool miss = !v || std::isnan(*v);
  values_.at(c).at(r) = miss ? 0.0 : *v;
  missing_[c][r] = miss ? 1 : 0;
}

double FeatureMatrix::missing_rate(std::size_t c) const {
  if (rows() == 0) return 0.0;
  std::size_t n = 0;
  for (auto m : missing_.at(c)) n += m;
  return static_cast<double>(n) / static_cast<double>(rows());
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> rows) const {
  FeatureMatrix out(columns_);
  out.keys_.reserve(rows.size());
  out.labels_.reserve(rows.size());
  for (auto r : rows) {
    out.keys_.push_back(keys_.at(r));
    out.labels_.push_back(labels_[r]);
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    out.values_[c].reserve(rows.size());
    out.missing_[c].reserve(rows.size());
    for (auto r : rows) {
      out.values_[c].push_back(values_[c][r]);
      out.missing_[c].push_back(missing_[c][r]);
    }
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::size_t> cols) const {
  std::vector<ColumnInfo> info;
  info.reserve(cols.size());
  for (auto c : cols) info.push_back(columns_.at(c));
  FeatureMatrix out(std::move(info));
  out.keys_ = keys_;
  out.labels_ = labels_;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.values_[i] = values_[cols[i]];
    out.missing_[i] = missing_[cols[i]];
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(std::span<const std::string> names) const {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < columns_.size(); ++i) index.emplace(columns_[i].name, i);
  std::vector<std::size_t> cols;
  std::string absent;
  for (const auto& n : names) {
    auto it = index.find(n);
    if (it == index.end()) {
      absent += (absent.empty() ? "" : ", ") + n;
    } else {
      cols.push_back(it->second);
    }
  }
  if (!absent.empty()) throw DataError("columns not present: " + absent);
  return select_columns(cols);
}

std::vector<std::size_t> FeatureMatrix::columns_of(Family f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].family == f) out.push_back(i);
  }
  return out;
}

FeatureMatrix FeatureMatrix::concat_rows(std::span<const FeatureMatrix> parts) {
  if (parts.empty()) return {};
  FeatureMatrix out(parts.front().columns_);
  for (const auto& p : parts) {
    if (p.columns_ != out.columns_) throw DataError("cannot concatenate matrices with different columns");
    out.keys_.insert(out.keys_.end(), p.keys_.begin(), p.keys_.end());
    out.labels_.insert(out.labels_.end(), p.labels_.begin(), p.labels_.end());
    for (std::size_t c = 0; c < out.columns_.size(); ++c) {
      out.values_[c].insert(out.values_[c].end(), p.values_[c].begin(), p.values_[c].end());
      out.missing_[c].insert(out.missing_[c].end(), p.missing_[c].begin(), p.missing_[c].end());
    }
  }
  return out;
}

void write_matrix_csv(const FeatureMatrix& m, std::ostream& out) {
  out << "company_id,reference_year,window_length,label";
  for (const auto& c : m.columns()) out << ',' << c.name;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto& k = m.key(r);
    out << k.company_id << ',' << k.reference_year << ',' << k.window_length << ',' << int(m.label(r));
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out << ',';
      if (!m.is_missing(r, c)) out << csv::format_double(m.column_values(c)[r]);
    }
    out << '\n';
  }
}

FeatureMatrix read_matrix_csv(std::istream& in, const std::string& source_name) {
  csv::Reader reader(in, source_name);
  const auto names = reader.read_header_with_prefix({"company_id", "reference_year", "window_length", "label"});
  std::vector<ColumnInfo> columns;
  for (const auto& n : names) {
    auto fam = family_of(n);
    if (!fam) reader.fail("feature column `" + n + "` has no family prefix (fr_, afe_, rb_)");
    columns.push_back({n, *fam});
  }
  FeatureMatrix m(std::move(columns));
  std::vector<std::string_view> f;
  std::vector<std::optional<double>> row(names.size());
  while (reader.next(f)) {
    if (f.size() != names.size() + 4) reader.fail("row width does not match header");
    SampleKey key;
    key.company_id = std::string(f[0]);
    auto t0 = csv::parse_int(f[1]);
    auto w = csv::parse_int(f[2]);
    auto label = csv::parse_int(f[3]);
    if (!t0 || !w || !label || (*label != 0 && *label != 1)) reader.fail("malformed sample key or label");
    key.reference_year = static_cast<int>(*t0);
    key.window_length = static_cast<int>(*w);
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto field = f[c + 4];
      if (field.empty()) {
        row[c].reset();
        continue;
      }
      auto v = csv::parse_double(field);
      if (!v) reader.fail("malformed value in column " + names[c]);
      row[c] = *v;
    }
    m.add_row(std::move(key), static_cast<std::uint8_t>(*label), row);
  }
  return m;
}

}  // namespace brp
