#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace brp {

enum class Family : std::uint8_t { FR, AFE, RB };
std::string_view to_string(Family f) noexcept;
// Families are recoverable from column-name prefixes (fr_, afe_, rb_).
std::optional<Family> family_of(std::string_view column_name) noexcept;

struct ColumnInfo {
  std::string name;
  Family family = Family::FR;

  friend bool operator==(const ColumnInfo&, const ColumnInfo&) = default;
};

// Ordered (name -> value-or-missing) map with a family tag per entry.
struct FeatureVector {
  std::vector<ColumnInfo> columns;
  std::vector<std::optional<double>> values;

  std::size_t size() const noexcept { return values.size(); }
  void push(std::string name, Family family, std::optional<double> value);
  // Linear lookup by name; nullopt both for "absent" and "missing".
  std::optional<double> get(std::string_view name) const;
  bool contains(std::string_view name) const;
};

struct SampleKey {
  std::string company_id;
  int reference_year = 0;
  int window_length = 0;

  friend auto operator<=>(const SampleKey&, const SampleKey&) = default;
};

// Column-major sample x feature table with an explicit missing mask.
// Missing cells hold 0.0 in the value array and are flagged in the mask;
// NaN is never stored.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::vector<ColumnInfo> columns);

  std::size_t rows() const noexcept { return keys_.size(); }
  std::size_t cols() const noexcept { return columns_.size(); }

  const std::vector<ColumnInfo>& columns() const noexcept { return columns_; }
  const ColumnInfo& column(std::size_t c) const { return columns_.at(c); }
  std::vector<std::string> column_names() const;
  std::optional<std::size_t> column_index(std::string_view name) const;

  const SampleKey& key(std::size_t r) const { return keys_.at(r); }
  const std::vector<SampleKey>& keys() const noexcept { return keys_; }
  std::uint8_t label(std::size_t r) const { return labels_.at(r); }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::size_t positives() const noexcept;

  // `values` must have cols() entries; NaN is treated as missing.
  void add_row(SampleKey key, std::uint8_t label, std::span<const std::optional<double>> values);

  std::optional<double> at(std::size_t r, std::size_t c) const;
  bool is_missing(std::size_t r, std::size_t c) const { return missing_[c][r] != 0; }
  void set(std::size_t r, std::size_t c, std::optional<double> v);
  std::span<const double> column_values(std::size_t c) const { return values_.at(c); }
  std::span<const std::uint8_t> column_missing(std::size_t c) const { return missing_.at(c); }
  double missing_rate(std::size_t c) const;

  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
  FeatureMatrix select_columns(std::span<const std::size_t> cols) const;
  // Throws DataError naming any absent column.
  FeatureMatrix select_columns(std::span<const std::string> names) const;
  std::vector<std::size_t> columns_of(Family f) const;

  // Row concatenation; all parts must share the same column list.
  static FeatureMatrix concat_rows(std::span<const FeatureMatrix> parts);

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::vector<ColumnInfo> columns_;
  std::vector<SampleKey> keys_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::vector<double>> values_;
  std::vector<std::vector<std::uint8_t>> missing_;
};

// CSV: company_id,reference_year,window_length,label,<features...>; empty = missing.
void write_matrix_csv(const FeatureMatrix& m, std::ostream& out);
FeatureMatrix read_matrix_csv(std::istream& in, const std::string& source_name);

}  // namespace brp
