#include "doctest.h"

#include <set>
#include <sstream>

#include "brp/error.hpp"
#include "brp/experiment.hpp"
#include "brp/synth.hpp"
#include "brp/windows.hpp"

using namespace brp;

namespace {

SplitBundle synthetic_bundle(std::size_t companies, std::uint64_t seed, int window = 1) {
  SynthConfig sc;
  sc.n_companies = companies;
  const auto reg = filter_registry(generate_registry(sc, seed).registry, {"finance"}, true);
  FeatureConfig fc;
  fc.grammar.max_features = 40;
  std::vector<SampleSet> sets;
  for (int t0 = 2012; t0 <= 2021; ++t0) sets.push_back(build_samples(reg, fc, window, t0));
  return assemble_splits(sets, 0.7, 7);
}

ExperimentConfig quick_config() {
  ExperimentConfig cfg;
  cfg.grid_search = false;
  cfg.seed = 5;
  cfg.base[ModelFamily::gbdt].gbdt.rounds = 60;
  return cfg;
}

}  // namespace

TEST_CASE("feature set names and families") {
  CHECK(to_string(FeatureSet::FR_RB) == "FR+RB");
  CHECK(file_token(FeatureSet::AFE_RB) == "afe_rb");
  CHECK(parse_feature_set("AFE+RB") == FeatureSet::AFE_RB);
  CHECK(parse_feature_set("fr_rb") == FeatureSet::FR_RB);
  CHECK(families_of(FeatureSet::FR_RB) == std::vector<Family>{Family::FR, Family::RB});
  CHECK(format_auc(0.87654321) == "0.876543");
  CHECK(format_auc(std::nullopt).empty());
}

TEST_CASE("ablation matrix shape and drift cardinality") {
  const std::vector<SplitBundle> bundles{synthetic_bundle(900, 3, 1), synthetic_bundle(900, 3, 2)};
  auto cfg = quick_config();
  const auto report = ablation_matrix(bundles, cfg);
  CHECK(report.cells.size() == 2 * 4 * 2);
  CHECK(report.selections.size() == 2);
  for (const auto& c : report.cells) {
    CHECK(c.split(EvalSplit::test).auc.has_value());
    if (c.feature_set == FeatureSet::FR_RB) {
      const auto* fr = report.find(c.family, FeatureSet::FR, c.window);
      REQUIRE(fr != nullptr);
      const std::set<std::string> hybrid(c.features.begin(), c.features.end());
      for (const auto& f : fr->features) CHECK(hybrid.contains(f));
    }
  }
  // FR+RB vs FR and AFE+RB vs AFE, per family, window and split.
  CHECK(report.deltas.size() == 2 * 2 * 2 * 3);
  const auto drift = drift_report(report);
  CHECK(drift.rows.size() == 2 * 4 * 2);

  std::ostringstream csv;
  write_auc_matrix_csv(report, csv);
  const auto text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 16);
  CHECK(ablation_to_json(report)["cells"].size() == 16);

  SUBCASE("repeatable") {
    std::ostringstream again;
    write_auc_matrix_csv(ablation_matrix(bundles, cfg), again);
    CHECK(again.str() == text);
  }
}

TEST_CASE("behavior columns with no signal reproduce the financial model") {
  auto b = synthetic_bundle(900, 4);
  for (auto* m : {&b.train, &b.test, &b.pre_covid, &b.post_covid}) {
    for (auto c : m->columns_of(Family::RB)) {
      for (std::size_t r = 0; r < m->rows(); ++r) m->set(r, c, 0.0);
    }
  }
  auto cfg = quick_config();
  cfg.families = {ModelFamily::logistic};
  cfg.feature_sets = {FeatureSet::FR, FeatureSet::FR_RB};
  const auto report = ablation_matrix(std::vector{b}, cfg);
  const auto* fr = report.find(ModelFamily::logistic, FeatureSet::FR, 1);
  const auto* hy = report.find(ModelFamily::logistic, FeatureSet::FR_RB, 1);
  for (auto s : kEvalSplits) CHECK(fr->split(s).auc == hy->split(s).auc);
}

TEST_CASE("planted behavior signal lifts the hybrid set") {
  const auto b = synthetic_bundle(3000, 42);
  auto cfg = quick_config();
  cfg.families = {ModelFamily::gbdt};
  cfg.feature_sets = {FeatureSet::FR, FeatureSet::FR_RB};
  const auto report = ablation_matrix(std::vector{b}, cfg);
  const auto* fr = report.find(ModelFamily::gbdt, FeatureSet::FR, 1);
  const auto* hy = report.find(ModelFamily::gbdt, FeatureSet::FR_RB, 1);
  CHECK(*hy->split(EvalSplit::test).auc > *fr->split(EvalSplit::test).auc);
}

TEST_CASE("no drift when every split is the test split") {
  auto b = synthetic_bundle(900, 6);
  b.pre_covid = b.test;
  b.post_covid = b.test;
  auto cfg = quick_config();
  cfg.families = {ModelFamily::logistic};
  const auto drift = drift_report(ablation_matrix(std::vector{b}, cfg));
  for (const auto& row : drift.rows) {
    CHECK(row.pre_delta == 0.0);
    CHECK(row.post_delta == 0.0);
    CHECK_FALSE(row.hybrid_degrades_alone);
    CHECK_FALSE(row.hybrid_drops_more);
  }
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.families.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.undersample_rate = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = ExperimentConfig{};
  cfg.cv_folds = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
