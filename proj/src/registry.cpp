#include "brp/registry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "brp/csv.hpp"
#include "brp/error.hpp"

namespace brp {

namespace {

constexpr std::array<std::string_view, kLineItemCount> kLineItemNames = {
    "total_assets",      "current_assets",      "quick_assets",   "cash",   "marketable_securities",
    "fixed_assets",      "total_liabilities",   "current_liabilities", "long_term_debt", "equity"};

// One token per restructuring category reported to the business register.
constexpr std::array<std::string_view, kEventTypeCount> kCatalog = {
    "corporate_name_change",
    "registered_office_change",
    "social_object_change",
    "administrator_manager_change",
    "daily_management_delegate_change",
    "associate_change",
    "auditor_change",
    "social_capital_change",
    "managing_director_committee_change",
    "duration_change",
    "legal_form_change",
    "social_exercise_change",
    "branch_representative_change",
    "merger_demerger",
    "depositary_change",
    "transfer_of_business_assets",
    "transfer_of_business_sectors",
    "address_change",
    "trading_name_change",
    "activities_change",
    "manager_change",
    "seat_change",
    "reason_change",
    "name_change",
    "chairman_director_change",
    "authorized_signatory_change",
    "commitment_power_change",
    "ministerial_approval",
};

const std::vector<std::string> kCompaniesHeader = {"company_id", "sector", "incorporated_year", "bankrupt_date"};
const std::vector<std::string> kFilingsHeader = {"company_id", "event_date", "event_type"};

std::vector<std::string> balance_sheet_header() {
  std::vector<std::string> h = {"company_id", "fiscal_year"};
  for (auto name : kLineItemNames) h.emplace_back(name);
  return h;
}

bool valid_token(std::string_view s) {
  return !s.empty() && s.find_first_of(" \t") == std::string_view::npos;
}

std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

}  // namespace

std::string_view to_string(LineItem item) noexcept { return kLineItemNames[static_cast<std::size_t>(item)]; }

const std::array<LineItem, kLineItemCount>& all_line_items() noexcept {
  static const std::array<LineItem, kLineItemCount> items = [] {
    std::array<LineItem, kLineItemCount> a{};
    for (std::size_t i = 0; i < kLineItemCount; ++i) a[i] = static_cast<LineItem>(i);
    return a;
  }();
  return items;
}

const std::array<std::string_view, kEventTypeCount>& event_catalog() noexcept { return kCatalog; }

std::optional<EventType> parse_event_type(std::string_view token) noexcept {
  for (std::size_t i = 0; i < kCatalog.size(); ++i) {
    if (kCatalog[i] == token) return static_cast<EventType>(i);
  }
  return std::nullopt;
}

std::string_view event_token(EventType type) noexcept { return kCatalog.at(type); }

Registry::Registry(std::vector<CompanyRecord> companies, std::vector<BalanceSheetSnapshot> snapshots,
                   std::vector<FilingEvent> events, std::optional<int> horizon_year)
    : companies_(std::move(companies)), snapshots_(std::move(snapshots)), events_(std::move(events)) {
  std::sort(companies_.begin(), companies_.end(),
            [](const auto& a, const auto& b) { return a.company_id < b.company_id; });
  std::stable_sort(snapshots_.begin(), snapshots_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.company_id, a.fiscal_year) < std::tie(b.company_id, b.fiscal_year);
  });
  std::stable_sort(events_.begin(), events_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.company_id, a.event_date, a.event_type) < std::tie(b.company_id, b.event_date, b.event_type);
  });

  int observed = 0;
  for (std::size_t i = 0; i < companies_.size(); ++i) {
    const auto& c = companies_[i];
    if (i > 0 && companies_[i - 1].company_id == c.company_id) {
      throw DataError("duplicate company_id " + c.company_id);
    }
    if (c.bankrupt_date) {
      if (*c.bankrupt_date < Date::year_start(c.incorporated_year)) {
        throw DataError("company " + c.company_id + ": bankrupt_date precedes incorporation year");
      }
      observed = std::max(observed, c.bankrupt_date->year);
    }
  }
  for (std::size_t i = 0; i < snapshots_.size(); ++i) {
    const auto& s = snapshots_[i];
    if (i > 0 && snapshots_[i - 1].company_id == s.company_id && snapshots_[i - 1].fiscal_year == s.fiscal_year) {
      throw DataError("duplicate snapshot for " + s.company_id + " fiscal_year " + std::to_string(s.fiscal_year));
    }
    for (const auto& v : s.items) {
      if (v && !std::isfinite(*v)) throw DataError("non-finite line item for " + s.company_id);
    }
    observed = std::max(observed, s.fiscal_year);
  }
  for (const auto& e : events_) {
    if (e.event_type >= kEventTypeCount) throw DataError("event type out of catalog for " + e.company_id);
    observed = std::max(observed, e.event_date.year);
  }
  horizon_year_ = horizon_year.value_or(observed);
  if (horizon_year && !events_.empty()) {
    for (const auto& e : events_) {
      if (e.event_date.year > horizon_year_) {
        throw DataError("event for " + e.company_id + " dated " + to_string(e.event_date) + " beyond horizon");
      }
    }
  }

  snapshot_ranges_.assign(companies_.size(), {0, 0});
  event_ranges_.assign(companies_.size(), {0, 0});
  auto index_ranges = [&](const auto& records, auto& ranges, const char* what) {
    std::size_t pos = 0;
    while (pos < records.size()) {
      const auto& id = records[pos].company_id;
      auto idx = find(id);
      if (!idx) throw DataError(std::string(what) + " references unknown company_id " + id);
      std::size_t end = pos;
      while (end < records.size() && records[end].company_id == id) ++end;
      ranges[*idx] = {pos, end};
      pos = end;
    }
  };
  index_ranges(snapshots_, snapshot_ranges_, "snapshot");
  index_ranges(events_, event_ranges_, "event");
}

std::optional<std::size_t> Registry::find(std::string_view company_id) const {
  auto it = std::lower_bound(companies_.begin(), companies_.end(), company_id,
                             [](const CompanyRecord& c, std::string_view id) { return c.company_id < id; });
  if (it == companies_.end() || it->company_id != company_id) return std::nullopt;
  return static_cast<std::size_t>(it - companies_.begin());
}

std::span<const BalanceSheetSnapshot> Registry::snapshots_of(std::size_t company_index) const {
  const auto [b, e] = snapshot_ranges_.at(company_index);
  return std::span<const BalanceSheetSnapshot>(snapshots_).subspan(b, e - b);
}

std::span<const FilingEvent> Registry::events_of(std::size_t company_index) const {
  const auto [b, e] = event_ranges_.at(company_index);
  return std::span<const FilingEvent>(events_).subspan(b, e - b);
}

const BalanceSheetSnapshot* Registry::snapshot(std::size_t company_index, int fiscal_year) const {
  auto snaps = snapshots_of(company_index);
  auto it = std::lower_bound(snaps.begin(), snaps.end(), fiscal_year,
                             [](const BalanceSheetSnapshot& s, int y) { return s.fiscal_year < y; });
  if (it == snaps.end() || it->fiscal_year != fiscal_year) return nullptr;
  return &*it;
}

RegistryPaths RegistryPaths::in_directory(const std::filesystem::path& dir) {
  return {dir / "companies.csv", dir / "balance_sheets.csv", dir / "filings.csv"};
}

Registry load_registry(const RegistryPaths& paths, std::optional<int> horizon_year) {
  std::vector<CompanyRecord> companies;
  std::unordered_set<std::string> ids;
  {
    auto in = open_input(paths.companies);
    csv::Reader reader(in, paths.companies.string());
    reader.expect_header(kCompaniesHeader);
    std::vector<std::string_view> f;
    while (reader.next(f)) {
      if (f.size() != kCompaniesHeader.size()) reader.fail("expected 4 fields");
      CompanyRecord c;
      c.company_id = std::string(f[0]);
      if (!valid_token(f[0])) reader.fail("empty or malformed company_id");
      c.sector = std::string(f[1]);
      auto year = csv::parse_int(f[2]);
      if (!year) reader.fail("malformed incorporated_year");
      c.incorporated_year = static_cast<int>(*year);
      if (!f[3].empty()) {
        c.bankrupt_date = parse_date(f[3]);
        if (!c.bankrupt_date) reader.fail("malformed bankrupt_date `" + std::string(f[3]) + "`");
        if (*c.bankrupt_date < Date::year_start(c.incorporated_year)) {
          reader.fail("bankrupt_date precedes incorporation year");
        }
      }
      if (!ids.insert(c.company_id).second) reader.fail("duplicate company_id " + c.company_id);
      companies.push_back(std::move(c));
    }
  }

  std::vector<BalanceSheetSnapshot> snapshots;
  {
    auto in = open_input(paths.balance_sheets);
    csv::Reader reader(in, paths.balance_sheets.string());
    const auto header = balance_sheet_header();
    reader.expect_header(header);
    std::unordered_set<std::string> seen;
    std::vector<std::string_view> f;
    while (reader.next(f)) {
      if (f.size() != header.size()) reader.fail("expected " + std::to_string(header.size()) + " fields");
      BalanceSheetSnapshot s;
      s.company_id = std::string(f[0]);
      if (!ids.contains(s.company_id)) reader.fail("snapshot references unknown company_id " + s.company_id);
      auto year = csv::parse_int(f[1]);
      if (!year) reader.fail("malformed fiscal_year");
      s.fiscal_year = static_cast<int>(*year);
      for (std::size_t i = 0; i < kLineItemCount; ++i) {
        const auto field = f[2 + i];
        if (field.empty()) continue;
        auto v = csv::parse_double(field);
        if (!v || !std::isfinite(*v)) reader.fail("malformed or non-finite " + std::string(kLineItemNames[i]));
        s.items[i] = *v;
      }
      if (!seen.insert(s.company_id + '\x1f' + std::to_string(s.fiscal_year)).second) {
        reader.fail("duplicate snapshot (" + s.company_id + ", " + std::to_string(s.fiscal_year) + ")");
      }
      snapshots.push_back(std::move(s));
    }
  }

  std::vector<FilingEvent> events;
  {
    auto in = open_input(paths.filings);
    csv::Reader reader(in, paths.filings.string());
    reader.expect_header(kFilingsHeader);
    std::vector<std::string_view> f;
    while (reader.next(f)) {
      if (f.size() != kFilingsHeader.size()) reader.fail("expected 3 fields");
      FilingEvent e;
      e.company_id = std::string(f[0]);
      if (!ids.contains(e.company_id)) reader.fail("event references unknown company_id " + e.company_id);
      auto d = parse_date(f[1]);
      if (!d) reader.fail("malformed event_date `" + std::string(f[1]) + "`");
      e.event_date = *d;
      auto t = parse_event_type(f[2]);
      if (!t) reader.fail("event_type `" + std::string(f[2]) + "` not in catalog");
      e.event_type = *t;
      if (horizon_year && d->year > *horizon_year) reader.fail("event_date beyond horizon");
      events.push_back(std::move(e));
    }
  }
  return Registry(std::move(companies), std::move(snapshots), std::move(events), horizon_year);
}

namespace {

void write_companies(const Registry& r, std::ostream& out) {
  out << "company_id,sector,incorporated_year,bankrupt_date\n";
  for (const auto& c : r.companies()) {
    out << c.company_id << ',' << c.sector << ',' << c.incorporated_year << ',';
    if (c.bankrupt_date) out << to_string(*c.bankrupt_date);
    out << '\n';
  }
}

void write_balance_sheets(const Registry& r, std::ostream& out) {
  const auto header = balance_sheet_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& s : r.snapshots()) {
    out << s.company_id << ',' << s.fiscal_year;
    for (const auto& v : s.items) {
      out << ',';
      if (v) out << csv::format_double(*v);
    }
    out << '\n';
  }
}

void write_filings(const Registry& r, std::ostream& out) {
  out << "company_id,event_date,event_type\n";
  for (const auto& e : r.events()) {
    out << e.company_id << ',' << to_string(e.event_date) << ',' << event_token(e.event_type) << '\n';
  }
}

std::ofstream open_output(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

}  // namespace

void write_registry(const Registry& registry, const RegistryPaths& paths) {
  {
    auto out = open_output(paths.companies);
    write_companies(registry, out);
  }
  {
    auto out = open_output(paths.balance_sheets);
    write_balance_sheets(registry, out);
  }
  {
    auto out = open_output(paths.filings);
    write_filings(registry, out);
  }
}

std::string canonical_serialization(const Registry& registry) {
  std::ostringstream out;
  write_companies(registry, out);
  write_balance_sheets(registry, out);
  write_filings(registry, out);
  out << "horizon," << registry.horizon_year() << '\n';
  return out.str();
}

std::string_view to_string(AnomalyRule rule) noexcept {
  switch (rule) {
    case AnomalyRule::snapshot_before_incorporation:
      return "snapshot_before_incorporation";
    case AnomalyRule::record_after_bankruptcy:
      return "record_after_bankruptcy";
    case AnomalyRule::no_snapshots:
      return "no_snapshots";
  }
  return "unknown";
}

ValidationReport validate_registry(const Registry& registry) {
  ValidationReport report;
  const auto& companies = registry.companies();
  for (std::size_t i = 0; i < companies.size(); ++i) {
    const auto& c = companies[i];
    const auto snaps = registry.snapshots_of(i);
    const auto events = registry.events_of(i);
    for (const auto& s : snaps) {
      if (s.fiscal_year < c.incorporated_year) {
        report.push_back({c.company_id, AnomalyRule::snapshot_before_incorporation,
                          "fiscal_year " + std::to_string(s.fiscal_year) + " < incorporated_year " +
                              std::to_string(c.incorporated_year)});
      }
    }
    if (c.bankrupt_date) {
      for (const auto& s : snaps) {
        if (Date::year_end(s.fiscal_year) > *c.bankrupt_date) {
          report.push_back({c.company_id, AnomalyRule::record_after_bankruptcy,
                            "snapshot fiscal_year " + std::to_string(s.fiscal_year) + " after bankrupt_date " +
                                to_string(*c.bankrupt_date)});
        }
      }
      for (const auto& e : events) {
        if (e.event_date > *c.bankrupt_date) {
          report.push_back({c.company_id, AnomalyRule::record_after_bankruptcy,
                            std::string(event_token(e.event_type)) + " on " + to_string(e.event_date) +
                                " after bankrupt_date " + to_string(*c.bankrupt_date)});
        }
      }
    }
    if (snaps.empty()) report.push_back({c.company_id, AnomalyRule::no_snapshots, "no balance sheets"});
  }
  // Companies are already in id order; stable sort keeps record order within a rule.
  std::stable_sort(report.begin(), report.end(), [](const Anomaly& a, const Anomaly& b) {
    return std::tie(a.company_id, a.rule) < std::tie(b.company_id, b.rule);
  });
  return report;
}

void write_validation_report(const ValidationReport& report, std::ostream& out) {
  out << "company_id,rule,detail\n";
  for (const auto& a : report) {
    std::string detail = a.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    out << a.company_id << ',' << to_string(a.rule) << ',' << detail << '\n';
  }
}

Registry filter_registry(const Registry& registry, const std::set<std::string>& excluded_sectors,
                         bool drop_anomalous) {
  std::unordered_set<std::string> dropped;
  for (const auto& c : registry.companies()) {
    if (excluded_sectors.contains(c.sector)) dropped.insert(c.company_id);
  }
  if (drop_anomalous) {
    for (const auto& a : validate_registry(registry)) {
      if (a.rule != AnomalyRule::no_snapshots) dropped.insert(a.company_id);
    }
  }
  std::vector<CompanyRecord> companies;
  std::vector<BalanceSheetSnapshot> snapshots;
  std::vector<FilingEvent> events;
  for (const auto& c : registry.companies()) {
    if (!dropped.contains(c.company_id)) companies.push_back(c);
  }
  for (const auto& s : registry.snapshots()) {
    if (!dropped.contains(s.company_id)) snapshots.push_back(s);
  }
  for (const auto& e : registry.events()) {
    if (!dropped.contains(e.company_id)) events.push_back(e);
  }
  return Registry(std::move(companies), std::move(snapshots), std::move(events), registry.horizon_year());
}

}  // namespace brp
