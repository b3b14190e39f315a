#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brp/date.hpp"

namespace brp {

// Balance-sheet line items, in CSV column order.
enum class LineItem : std::uint8_t {
  total_assets,
  current_assets,
  quick_assets,
  cash,
  marketable_securities,
  fixed_assets,
  total_liabilities,
  current_liabilities,
  long_term_debt,
  equity,
};
inline constexpr std::size_t kLineItemCount = 10;
std::string_view to_string(LineItem item) noexcept;
const std::array<LineItem, kLineItemCount>& all_line_items() noexcept;

// The restructuring-filing catalog. Tokens are the canonical snake_case names.
inline constexpr std::size_t kEventTypeCount = 28;
using EventType = std::uint8_t;  // index into event_catalog()
const std::array<std::string_view, kEventTypeCount>& event_catalog() noexcept;
std::optional<EventType> parse_event_type(std::string_view token) noexcept;
std::string_view event_token(EventType type) noexcept;

struct CompanyRecord {
  std::string company_id;
  std::string sector;
  int incorporated_year = 0;
  std::optional<Date> bankrupt_date;

  friend bool operator==(const CompanyRecord&, const CompanyRecord&) = default;
};

struct BalanceSheetSnapshot {
  std::string company_id;
  int fiscal_year = 0;
  std::array<std::optional<double>, kLineItemCount> items{};

  std::optional<double> get(LineItem item) const noexcept { return items[static_cast<std::size_t>(item)]; }
  void set(LineItem item, std::optional<double> v) noexcept { items[static_cast<std::size_t>(item)] = v; }

  friend bool operator==(const BalanceSheetSnapshot&, const BalanceSheetSnapshot&) = default;
};

struct FilingEvent {
  std::string company_id;
  Date event_date;
  EventType event_type = 0;

  friend bool operator==(const FilingEvent&, const FilingEvent&) = default;
};

// Immutable registry. Records are kept in canonical order: companies by id,
// snapshots by (id, year), events by (id, date, type), so that any two
// registries built from the same record sets compare equal.
class Registry {
 public:
  Registry() = default;
  // Validates structural invariants; throws DataError on violation.
  Registry(std::vector<CompanyRecord> companies, std::vector<BalanceSheetSnapshot> snapshots,
           std::vector<FilingEvent> events, std::optional<int> horizon_year = std::nullopt);

  const std::vector<CompanyRecord>& companies() const noexcept { return companies_; }
  const std::vector<BalanceSheetSnapshot>& snapshots() const noexcept { return snapshots_; }
  const std::vector<FilingEvent>& events() const noexcept { return events_; }

  // Last calendar year for which status information is complete.
  int horizon_year() const noexcept { return horizon_year_; }

  std::optional<std::size_t> find(std::string_view company_id) const;
  std::span<const BalanceSheetSnapshot> snapshots_of(std::size_t company_index) const;
  std::span<const FilingEvent> events_of(std::size_t company_index) const;
  const BalanceSheetSnapshot* snapshot(std::size_t company_index, int fiscal_year) const;

  bool empty() const noexcept { return companies_.empty(); }

  friend bool operator==(const Registry& a, const Registry& b) {
    return a.companies_ == b.companies_ && a.snapshots_ == b.snapshots_ && a.events_ == b.events_ &&
           a.horizon_year_ == b.horizon_year_;
  }

 private:
  std::vector<CompanyRecord> companies_;
  std::vector<BalanceSheetSnapshot> snapshots_;
  std::vector<FilingEvent> events_;
  // Per-company [begin, end) ranges into snapshots_ / events_.
  std::vector<std::pair<std::size_t, std::size_t>> snapshot_ranges_;
  std::vector<std::pair<std::size_t, std::size_t>> event_ranges_;
  int horizon_year_ = 0;
};

struct RegistryPaths {
  std::filesystem::path companies;
  std::filesystem::path balance_sheets;
  std::filesystem::path filings;

  static RegistryPaths in_directory(const std::filesystem::path& dir);
};

Registry load_registry(const RegistryPaths& paths, std::optional<int> horizon_year = std::nullopt);
void write_registry(const Registry& registry, const RegistryPaths& paths);

// Deterministic text form of all three tables (the CSV bytes, concatenated).
std::string canonical_serialization(const Registry& registry);

enum class AnomalyRule : std::uint8_t {
  snapshot_before_incorporation,  // (a)
  record_after_bankruptcy,        // (b)
  no_snapshots,                   // (c)
};
std::string_view to_string(AnomalyRule rule) noexcept;

struct Anomaly {
  std::string company_id;
  AnomalyRule rule;
  std::string detail;

  friend bool operator==(const Anomaly&, const Anomaly&) = default;
};

using ValidationReport = std::vector<Anomaly>;

ValidationReport validate_registry(const Registry& registry);
void write_validation_report(const ValidationReport& report, std::ostream& out);

Registry filter_registry(const Registry& registry, const std::set<std::string>& excluded_sectors,
                         bool drop_anomalous);

}  // namespace brp
