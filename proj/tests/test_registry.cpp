#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "brp/csv.hpp"
#include "brp/date.hpp"
#include "brp/error.hpp"
#include "brp/registry.hpp"
#include "brp/rng.hpp"
#include "brp/synth.hpp"
#include "test_util.hpp"

using namespace brp;
using testutil::event;
using testutil::snapshot;

namespace {

const char* kCompanies =
    "company_id,sector,incorporated_year,bankrupt_date\n"
    "A1,retail,2008,\n"
    "B2,services,2010,2016-05-20\n";
const char* kSheets =
    "company_id,fiscal_year,total_assets,current_assets,quick_assets,cash,marketable_securities,fixed_assets,"
    "total_liabilities,current_liabilities,long_term_debt,equity\n"
    "A1,2014,100,50,40,10,,50,60,30,30,40\n"
    "A1,2015,110,55,45,12,1,55,62,31,31,48\n"
    "B2,2014,80,20,10,2,0,60,90,50,40,-10\n"
    "B2,2015,70,15,8,1,0,55,95,60,35,-25\n";
const char* kFilings =
    "company_id,event_date,event_type\n"
    "B2,2015-03-01,auditor_change\n"
    "A1,2015-07-14,registered_office_change\n"
    "B2,2015-11-30,manager_change\n";

RegistryPaths write_fixture(const std::string& name, const std::string& companies, const std::string& sheets,
                            const std::string& filings) {
  const auto dir = testutil::scratch_dir(name);
  const auto paths = RegistryPaths::in_directory(dir);
  testutil::write_file(paths.companies, companies);
  testutil::write_file(paths.balance_sheets, sheets);
  testutil::write_file(paths.filings, filings);
  return paths;
}

std::string reverse_body(const std::string& csv) {
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  std::reverse(rows.begin(), rows.end());
  std::string out = header + "\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

}  // namespace

TEST_CASE("dates parse and validate") {
  CHECK(parse_date("2020-02-29").has_value());
  CHECK_FALSE(parse_date("2019-02-29").has_value());
  CHECK_FALSE(parse_date("2019-13-01").has_value());
  CHECK_FALSE(parse_date("2019-1-01").has_value());
  CHECK(to_string(Date{2021, 3, 7}) == "2021-03-07");
  CHECK(months_until_year_end({2015, 12, 1}, 2015) == 0);
  CHECK(months_until_year_end({2015, 1, 31}, 2015) == 11);
  CHECK(months_until_year_end({2014, 6, 1}, 2015) == 18);
}

TEST_CASE("csv double formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.125, 0.0}) {
    CHECK(csv::parse_double(csv::format_double(v)).value() == v);
  }
  CHECK(csv::format_double(INFINITY) == "inf");
  CHECK(csv::parse_double("-inf").value() == -INFINITY);
  CHECK_FALSE(csv::parse_double("1,5").has_value());
}

TEST_CASE("event catalog has 28 unique snake_case tokens") {
  std::set<std::string_view> seen(event_catalog().begin(), event_catalog().end());
  CHECK(seen.size() == kEventTypeCount);
  for (auto t : event_catalog()) {
    CHECK(std::all_of(t.begin(), t.end(), [](char c) { return (c >= 'a' && c <= 'z') || c == '_'; }));
    CHECK(event_token(*parse_event_type(t)) == t);
  }
  CHECK_FALSE(parse_event_type("office_change").has_value());
}

TEST_CASE("load_registry reads a hand-built fixture") {
  const auto paths = write_fixture("load", kCompanies, kSheets, kFilings);
  const auto r = load_registry(paths);
  CHECK(r.companies().size() == 2);
  CHECK(r.snapshots().size() == 4);
  CHECK(r.events().size() == 3);
  const auto a = r.find("A1").value();
  CHECK_FALSE(r.snapshot(a, 2014)->get(LineItem::marketable_securities).has_value());
  CHECK(r.snapshot(a, 2015)->get(LineItem::equity).value() == 48.0);
  CHECK(r.events_of(*r.find("B2")).size() == 2);
  CHECK(r.companies()[1].bankrupt_date == Date{2016, 5, 20});
}

TEST_CASE("load_registry ignores row order") {
  const auto a = load_registry(write_fixture("order_a", kCompanies, kSheets, kFilings));
  const auto b = load_registry(
      write_fixture("order_b", reverse_body(kCompanies), reverse_body(kSheets), reverse_body(kFilings)));
  CHECK(a == b);
  CHECK(canonical_serialization(a) == canonical_serialization(b));
}

TEST_CASE("load_registry on header-only files gives an empty registry") {
  const std::string sheets_header = std::string(kSheets).substr(0, std::string(kSheets).find('\n') + 1);
  const auto r = load_registry(write_fixture("empty", "company_id,sector,incorporated_year,bankrupt_date\n",
                                             sheets_header, "company_id,event_date,event_type\n"));
  CHECK(r.empty());
  CHECK(r.snapshots().empty());
  CHECK(r.events().empty());
}

TEST_CASE("load_registry rejects malformed input") {
  SUBCASE("duplicate snapshot") {
    const std::string sheets = std::string(kSheets) + "A1,2014,1,1,1,1,1,1,1,1,1,1\n";
    CHECK_THROWS_AS(load_registry(write_fixture("dup", kCompanies, sheets, kFilings)), DataError);
  }
  SUBCASE("unknown event token") {
    const std::string filings = std::string(kFilings) + "A1,2015-01-02,office_move\n";
    CHECK_THROWS_AS(load_registry(write_fixture("token", kCompanies, kSheets, filings)), DataError);
  }
  SUBCASE("dangling company reference") {
    const std::string filings = std::string(kFilings) + "Z9,2015-01-02,auditor_change\n";
    CHECK_THROWS_AS(load_registry(write_fixture("dangling", kCompanies, kSheets, filings)), DataError);
  }
  SUBCASE("wrong header") {
    CHECK_THROWS_AS(load_registry(write_fixture("header", "id,sector,year,bankrupt\n", kSheets, kFilings)),
                    DataError);
  }
  SUBCASE("event beyond horizon") {
    CHECK_THROWS_AS(load_registry(write_fixture("horizon", kCompanies, kSheets, kFilings), 2014), DataError);
  }
  SUBCASE("missing file") {
    auto paths = write_fixture("missing", kCompanies, kSheets, kFilings);
    std::filesystem::remove(paths.filings);
    CHECK_THROWS_AS(load_registry(paths), DataError);
  }
}

TEST_CASE("write_registry then load_registry is the identity") {
  const auto r = load_registry(write_fixture("rt_src", kCompanies, kSheets, kFilings));
  const auto dir = testutil::scratch_dir("rt_dst");
  write_registry(r, RegistryPaths::in_directory(dir));
  const auto back = load_registry(RegistryPaths::in_directory(dir), r.horizon_year());
  CHECK(back == r);
}

TEST_CASE("validate_registry flags both anomaly rules") {
  std::vector<CompanyRecord> companies{{"A", "retail", 2015, std::nullopt}, {"B", "retail", 2005, Date{2014, 6, 1}},
                                       {"C", "retail", 2005, std::nullopt}, {"D", "retail", 2005, std::nullopt}};
  std::vector<BalanceSheetSnapshot> sheets{snapshot("A", 2010), snapshot("A", 2016), snapshot("B", 2013),
                                           snapshot("C", 2013), snapshot("D", 2013)};
  std::vector<FilingEvent> events{event("B", 2014, 9, 1, "auditor_change"), event("C", 2013, 2, 1, "seat_change")};
  const Registry r(companies, sheets, events);
  const auto report = validate_registry(r);
  REQUIRE(report.size() == 2);
  CHECK(report[0].company_id == "A");
  CHECK(report[0].rule == AnomalyRule::snapshot_before_incorporation);
  CHECK(report[1].company_id == "B");
  CHECK(report[1].rule == AnomalyRule::record_after_bankruptcy);

  SUBCASE("consistent registry is clean") {
    const Registry clean({companies[2], companies[3]}, {sheets[3], sheets[4]}, {events[1]});
    CHECK(validate_registry(clean).empty());
  }
  SUBCASE("filter removes the flagged companies and their records") {
    const auto f = filter_registry(r, {}, true);
    CHECK(f.companies().size() == 2);
    CHECK_FALSE(f.find("A").has_value());
    CHECK_FALSE(f.find("B").has_value());
    CHECK(f.snapshots().size() == 2);
    CHECK(f.events().size() == 1);
    CHECK(validate_registry(f).empty());
  }
}

TEST_CASE("filter_registry drops excluded sectors") {
  std::vector<CompanyRecord> companies;
  std::vector<BalanceSheetSnapshot> sheets;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "F" + std::to_string(i);
    companies.push_back({id, i == 0 ? "retail" : "finance", 2000, std::nullopt});
    sheets.push_back(snapshot(id, 2015));
  }
  const Registry r(companies, sheets, {});
  const auto f = filter_registry(r, {"finance"}, false);
  REQUIRE(f.companies().size() == 1);
  CHECK(f.companies()[0].sector == "retail");
  CHECK(filter_registry(r, {}, false) == r);
}

TEST_CASE("filter_registry is idempotent on generated registries") {
  SynthConfig cfg;
  cfg.n_companies = 150;
  const auto reg = generate_registry(cfg, 3).registry;
  const std::set<std::string> excluded{"finance", "construction"};
  for (bool drop : {false, true}) {
    const auto once = filter_registry(reg, excluded, drop);
    CHECK(filter_registry(once, excluded, drop) == once);
    for (const auto& s : once.snapshots()) CHECK(once.find(s.company_id).has_value());
    for (const auto& e : once.events()) CHECK(once.find(e.company_id).has_value());
  }
}
