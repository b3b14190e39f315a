#include "doctest.h"

#include <algorithm>
#include <set>

#include "brp/error.hpp"
#include "brp/synth.hpp"
#include "brp/windows.hpp"
#include "census.hpp"
#include "test_util.hpp"

using namespace brp;
using testutil::snapshot;

namespace {

Registry small_registry() {
  std::vector<CompanyRecord> companies{{"A", "retail", 2000, Date{2016, 6, 15}},
                                       {"B", "retail", 2000, std::nullopt},
                                       {"C", "retail", 2000, Date{2015, 3, 1}},
                                       {"D", "retail", 2000, std::nullopt}};
  std::vector<BalanceSheetSnapshot> sheets{snapshot("A", 2014), snapshot("A", 2015), snapshot("B", 2013),
                                           snapshot("B", 2015), snapshot("C", 2014), snapshot("D", 2014),
                                           snapshot("D", 2015)};
  std::vector<FilingEvent> events{testutil::event("A", 2015, 4, 1, "auditor_change"),
                                  testutil::event("A", 2016, 2, 1, "auditor_change"),
                                  testutil::event("D", 2014, 8, 1, "seat_change")};
  return Registry(companies, sheets, events, 2017);
}

FeatureMatrix labelled(std::size_t pos, std::size_t neg) {
  FeatureMatrix m({{"fr_x", Family::FR}});
  for (std::size_t i = 0; i < pos + neg; ++i) {
    const std::optional<double> v = static_cast<double>(i);
    m.add_row({"C" + std::to_string(i), 2015, 1}, i < pos ? 1 : 0, std::span(&v, 1));
  }
  return m;
}

}  // namespace

TEST_CASE("labels and inclusion rules") {
  const auto reg = small_registry();
  FeatureConfig cfg;
  const auto one = build_samples(reg, cfg, 1, 2015).matrix;
  // A bankrupt in 2016 -> label 1; C bankrupt in 2015 -> excluded.
  REQUIRE(one.rows() == 3);
  CHECK(one.key(0).company_id == "A");
  CHECK(one.label(0) == 1);
  CHECK(one.label(1) == 0);
  CHECK(one.label(2) == 0);

  const auto two = build_samples(reg, cfg, 2, 2015).matrix;
  // B lacks 2014, so it drops out of the 2-year window.
  std::set<std::string> ids;
  for (const auto& k : two.keys()) ids.insert(k.company_id);
  CHECK(ids == std::set<std::string>{"A", "D"});
  for (const auto& k : two.keys()) {
    CHECK(k.window_length == 2);
    CHECK(k.reference_year == 2015);
  }
}

TEST_CASE("features see nothing after the reference year") {
  const auto reg = small_registry();
  FeatureConfig cfg;
  const auto m = build_samples(reg, cfg, 1, 2015).matrix;
  const auto col = m.column_index("rb_count_auditor_change").value();
  CHECK(m.at(0, col) == 1.0);  // the 2016 filing stays invisible
}

TEST_CASE("column layout follows the enabled families") {
  FeatureConfig cfg;
  cfg.afe = false;
  const auto cols1 = window_columns(cfg, 1);
  CHECK(cols1.size() == 18 + behavior_feature_names().size());
  const auto cols2 = window_columns(cfg, 2);
  CHECK(cols2.size() == 2 * 18 + kLineItemCount + behavior_feature_names().size());
  std::set<std::string> names;
  for (const auto& c : cols2) names.insert(c.name);
  CHECK(names.size() == cols2.size());
  cfg.fr = cfg.rb = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("sample counts match a brute-force census") {
  SynthConfig sc;
  sc.n_companies = 300;
  const auto reg = filter_registry(generate_registry(sc, 17).registry, {"finance"}, true);
  FeatureConfig cfg;
  cfg.afe = false;
  for (int W = 1; W <= 3; ++W) {
    for (int t0 = 2012; t0 <= 2021; ++t0) {
      const auto m = build_samples(reg, cfg, W, t0).matrix;
      const auto [solvent, bankrupt] = testutil::census(reg, W, t0);
      CAPTURE(W);
      CAPTURE(t0);
      CHECK(m.positives() == bankrupt);
      CHECK(m.rows() - m.positives() == solvent);
    }
  }
}

TEST_CASE("stratified split partitions the training years") {
  SynthConfig sc;
  sc.n_companies = 400;
  const auto reg = filter_registry(generate_registry(sc, 5).registry, {"finance"}, true);
  FeatureConfig cfg;
  cfg.afe = false;
  std::vector<SampleSet> sets;
  for (int t0 = 2012; t0 <= 2021; ++t0) sets.push_back(build_samples(reg, cfg, 1, t0));
  const auto b = assemble_splits(sets, 0.7, 7);

  std::set<SampleKey> train(b.train.keys().begin(), b.train.keys().end());
  std::set<SampleKey> test(b.test.keys().begin(), b.test.keys().end());
  std::size_t pool = 0;
  for (const auto& s : sets) pool += s.reference_year <= 2018 ? s.matrix.rows() : 0;
  CHECK(train.size() + test.size() == pool);
  for (const auto& k : test) CHECK_FALSE(train.contains(k));
  for (const auto& k : b.pre_covid.keys()) CHECK(k.reference_year == 2019);
  for (const auto& k : b.post_covid.keys()) CHECK((k.reference_year == 2020 || k.reference_year == 2021));

  // Per (year, label) stratum the split is 70/30 up to rounding.
  for (int y = 2012; y <= 2018; ++y) {
    for (std::uint8_t label : {0, 1}) {
      std::size_t tr = 0, te = 0;
      for (std::size_t r = 0; r < b.train.rows(); ++r) tr += b.train.key(r).reference_year == y && b.train.label(r) == label;
      for (std::size_t r = 0; r < b.test.rows(); ++r) te += b.test.key(r).reference_year == y && b.test.label(r) == label;
      CHECK(std::fabs(static_cast<double>(tr) - 0.7 * static_cast<double>(tr + te)) <= 0.5 + 1e-9);
    }
  }

  const auto again = assemble_splits(sets, 0.7, 7);
  CHECK(again.train == b.train);
  CHECK(again.test == b.test);

  SUBCASE("company-grouped split keeps companies on one side") {
    const auto g = assemble_splits(sets, 0.7, 7, {}, true);
    std::set<std::string> tr_ids, te_ids;
    for (const auto& k : g.train.keys()) tr_ids.insert(k.company_id);
    for (const auto& k : g.test.keys()) te_ids.insert(k.company_id);
    for (const auto& id : te_ids) CHECK_FALSE(tr_ids.contains(id));
  }
  SUBCASE("missing year is an error") {
    sets.pop_back();
    CHECK_THROWS_AS(assemble_splits(sets, 0.7, 7), DataError);
  }
}

TEST_CASE("stratified split of 1000 samples with 100 positives") {
  std::vector<SampleSet> sets;
  for (int y = 2012; y <= 2021; ++y) {
    SampleSet s{1, y, FeatureMatrix({{"fr_x", Family::FR}})};
    const std::size_t n = y <= 2018 ? (y == 2012 ? 160 : 140) : 10;
    for (std::size_t i = 0; i < n; ++i) {
      const std::optional<double> v = 1.0;
      const std::uint8_t label = y <= 2018 && i < (y == 2012 ? 40u : 10u);
      s.matrix.add_row({"C" + std::to_string(i), y, 1}, label, std::span(&v, 1));
    }
    sets.push_back(std::move(s));
  }
  const auto b = assemble_splits(sets, 0.7, 1);
  CHECK(b.train.rows() + b.test.rows() == 1000);
  CHECK(b.train.rows() == 700);
  CHECK(b.train.positives() == 70);
}

TEST_CASE("undersampling keeps every positive") {
  const auto m = labelled(2625, 110805);
  const auto u = undersample(m, 0.25, 3);
  CHECK(u.changed);
  CHECK(u.matrix.positives() == 2625);
  CHECK(u.matrix.rows() - u.matrix.positives() == 7875);
  CHECK(format_rate(u.matrix.positives(), u.matrix.rows() - u.matrix.positives()) == "25.00%");
  CHECK(undersample(m, 0.25, 3).matrix == u.matrix);
  CHECK_FALSE(undersample(m, 0.25, 4).matrix == u.matrix);

  const auto balanced = labelled(50, 50);
  const auto same = undersample(balanced, 0.25, 3);
  CHECK_FALSE(same.changed);
  CHECK(same.matrix == balanced);
  CHECK_THROWS_AS(undersample(labelled(0, 10), 0.25, 1), DataError);
}

TEST_CASE("bankruptcy rates format to two decimals") {
  CHECK(format_rate(2625, 110805) == "2.31%");
  CHECK(format_rate(181, 48846) == "0.37%");
  CHECK(format_rate(0, 0) == "0.00%");
}

TEST_CASE("matrix csv round trip") {
  auto m = testutil::matrix({"fr_a", "rb_b"}, {{1.5, NAN, -3}, {0, 2, INFINITY}}, {1, 0, 0});
  std::stringstream io;
  write_matrix_csv(m, io);
  const auto back = read_matrix_csv(io, "mem");
  CHECK(back == m);
}
