// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "brp/experiment.hpp"
#include "brp/metrics.hpp"
#include "brp/models.hpp"
#include "brp/pipeline.hpp"
#include "brp/rng.hpp"
#include "brp/selection.hpp"
#include "brp/synth.hpp"
#include "brp/windows.hpp"
#include "census.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

#ifndef BRP_EXE
#define BRP_EXE "brp"
#endif

using namespace brp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---- 1 -----------------------------------------------------------------------

Outcome auc_matches_concordance() {
  const auto t0 = Clock::now();
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.below(99);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = static_cast<double>(rng.below(10)) / 10.0;  // coarse grid forces ties
      y[k] = rng.bernoulli(0.4);
    }
    y[0] = 0;
    y[1] = 1;
    double num = 0, pairs = 0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (y[a] != 1 || y[b] != 0) continue;
        pairs += 1;
        num += s[a] > s[b] ? 1.0 : s[a] == s[b] ? 0.5 : 0.0;
      }
    }
    worst = std::max(worst, std::fabs(auc(s, y) - num / pairs));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 5.0, "max |trapezoid - concordance| = " + fmt("%.3g", worst) + ", " + fmt("%.2f s", secs)};
}

// ---- 2 -----------------------------------------------------------------------

Outcome iv_fixture() {
  BinningSpec s;
  s.edges = {0.5};
  s.good = {90, 10};
  s.bad = {10, 90};
  const double iv = information_value(s);
  BinningSpec same = s;
  same.bad = {9, 1};
  const double zero = information_value(same);
  return {std::fabs(iv - 3.5156) <= 1e-4 && zero == 0.0,
          "IV = " + fmt("%.6f", iv) + ", identical distributions IV = " + fmt("%g", zero)};
}

// ---- 3 -----------------------------------------------------------------------

Outcome selection_thresholds() {
  Rng rng(3);
  std::size_t violations = 0, rejected = 0, checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 30 + rng.below(300);
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = rng.bernoulli(0.05 + 0.4 * rng.uniform());
    y[0] = 0;
    y[1] = 1;
    const double miss = rng.uniform();
    const double strength = rng.uniform(0, 1.5);
    std::vector<double> col(n);
    std::size_t missing = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && rng.bernoulli(miss)) {
        col[i] = NAN;
        ++missing;
      } else {
        col[i] = std::round(4 * (rng.normal() + strength * y[i])) / 4;
      }
    }
    const auto e = select_features(testutil::matrix({"fr_x"}, {col}, y)).entries.at(0);
    const double rate = static_cast<double>(missing) / static_cast<double>(n);
    ++checked;
    if (rate >= 0.7 || e.iv <= 0.02) {
      ++rejected;
      if (e.selected) ++violations;
    }
  }
  return {violations == 0 && checked == 1000,
          std::to_string(checked) + " cases, " + std::to_string(rejected) + " below a threshold, " +
              std::to_string(violations) + " selected anyway"};
}

// ---- 4 -----------------------------------------------------------------------

Outcome undersampling() {
  FeatureMatrix m({{"fr_x", Family::FR}});
  for (std::size_t i = 0; i < 2625 + 110805; ++i) {
    const std::optional<double> v = static_cast<double>(i % 97);
    m.add_row({"C" + std::to_string(i), 2015, 1}, i < 2625 ? 1 : 0, std::span(&v, 1));
  }
  const auto u = undersample(m, 0.25, 42).matrix;
  const std::size_t pos = u.positives(), neg = u.rows() - pos;
  const auto rate = format_rate(pos, neg);
  return {pos == 2625 && neg == 7875 && rate == "25.00%",
          std::to_string(pos) + " positives, " + std::to_string(neg) + " negatives, rate " + rate};
}

// ---- 5 -----------------------------------------------------------------------

Outcome rate_format() {
  const auto a = format_rate(2625, 110805), b = format_rate(181, 48846);
  return {a == "2.31%" && b == "0.37%", a + ", " + b};
}

// ---- 6 -----------------------------------------------------------------------

Outcome mlp_gradient() {
  double worst = 0.0;
  for (std::uint64_t seed : {11, 22, 33}) worst = std::max(worst, testutil::mlp_gradient_error(seed, 10));
  return {worst <= 1e-4, "max relative error " + fmt("%.3g", worst) + " over 3 seeds"};
}

// ---- 7 -----------------------------------------------------------------------

Outcome gbdt_fixture() {
  const auto t0 = Clock::now();
  const auto X = testutil::planted_monotone(2000, 0, 7);
  ModelConfig cfg;
  cfg.family = ModelFamily::gbdt;
  cfg.gbdt.rounds = 50;
  const double train_auc = auc(predict_proba(fit_model(X, cfg), X), X.labels());
  cfg.gbdt.rounds = 0;
  const double rate = static_cast<double>(X.positives()) / static_cast<double>(X.rows());
  bool exact = true;
  for (double s : predict_proba(fit_model(X, cfg), X)) exact = exact && s == rate;
  const double secs = seconds_since(t0);
  return {train_auc >= 0.95 && exact && secs < 10.0,
          "train AUC " + fmt("%.4f", train_auc) + ", zero rounds " + (exact ? "== base rate" : "!= base rate") + ", " +
              fmt("%.2f s", secs)};
}

// ---- 8 -----------------------------------------------------------------------

Outcome behavior_gain() {
  const auto t0 = Clock::now();
  SynthConfig sc;
  sc.n_companies = 10000;
  const auto reg = filter_registry(generate_registry(sc, 42).registry, {"finance"}, true);
  FeatureConfig fc;
  fc.afe = false;
  std::vector<SampleSet> sets;
  for (int y = 2012; y <= 2021; ++y) sets.push_back(build_samples(reg, fc, 1, y));
  const std::vector<SplitBundle> bundles{assemble_splits(sets, 0.7, 7)};
  ExperimentConfig ec;
  ec.families = {ModelFamily::gbdt, ModelFamily::logistic};
  ec.feature_sets = {FeatureSet::FR, FeatureSet::FR_RB};
  ec.seed = 42;
  const auto report = ablation_matrix(bundles, ec);
  bool ok = true;
  std::string detail;
  for (auto f : ec.families) {
    const double a = *report.find(f, FeatureSet::FR, 1)->split(EvalSplit::test).auc;
    const double b = *report.find(f, FeatureSet::FR_RB, 1)->split(EvalSplit::test).auc;
    ok = ok && b - a >= 0.03;
    detail += std::string(to_string(f)) + " " + fmt("%.4f", a) + " -> " + fmt("%.4f", b) + " (" + fmt("%+.4f", b - a) + "), ";
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 180.0, detail + fmt("%.1f s", secs)};
}

// ---- 9 -----------------------------------------------------------------------

Outcome covid_drift() {
  SynthConfig sc;
  sc.n_companies = 20000;
  sc.covid = CovidRegime{2020, 0.3, 0.5};
  const auto reg = filter_registry(generate_registry(sc, 42).registry, {"finance"}, true);
  FeatureConfig fc;
  fc.afe = false;
  std::vector<SampleSet> sets;
  for (int y = 2012; y <= 2021; ++y) sets.push_back(build_samples(reg, fc, 1, y));
  const std::vector<SplitBundle> bundles{assemble_splits(sets, 0.7, 7)};
  ExperimentConfig ec;
  ec.families = {ModelFamily::gbdt};
  ec.feature_sets = {FeatureSet::FR, FeatureSet::FR_RB};
  ec.grid_search = false;
  ec.seed = 42;
  const auto report = ablation_matrix(bundles, ec);
  auto drop = [&](FeatureSet s) {
    const auto* c = report.find(ModelFamily::gbdt, s, 1);
    return *c->split(EvalSplit::test).auc - *c->split(EvalSplit::post_covid).auc;
  };
  const double fr = drop(FeatureSet::FR), hy = drop(FeatureSet::FR_RB);
  return {hy > fr, "post-Covid AUC drop FR " + fmt("%.4f", fr) + ", FR+RB " + fmt("%.4f", hy)};
}

// ---- 10 ----------------------------------------------------------------------

Outcome run_determinism() {
  const auto base = testutil::scratch_dir("acceptance_runs");
  const auto cfg_path = base / "config.json";
  {
    auto cfg = default_pipeline_config();
    cfg.synth.n_companies = 600;
    cfg.windows = {1, 2};
    cfg.features.grammar.max_features = 40;
    cfg.experiment.grid_search = false;
    write_text_file(cfg_path, to_json(cfg).dump(2));
  }
  for (const char* name : {"a", "b"}) {
    const std::string cmd = std::string("\"") + BRP_EXE + "\" run --config \"" + cfg_path.string() + "\" --output_dir=\"" +
                            (base / name).string() + "\"";
    if (std::system(cmd.c_str()) != 0) return {false, std::string("run ") + name + " failed"};
  }
  std::size_t compared = 0, differing = 0;
  auto same = [&](const fs::path& rel) {
    ++compared;
    if (testutil::slurp(base / "a" / rel) != testutil::slurp(base / "b" / rel) || !fs::exists(base / "a" / rel)) {
      ++differing;
    }
  };
  same("reports/auc_matrix.csv");
  for (const auto& e : fs::directory_iterator(base / "a" / "roc")) same(fs::path("roc") / e.path().filename());
  if (fs::exists(base / "b" / "roc")) {
    std::size_t nb = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(base / "b" / "roc")) ++nb;
    if (nb + 1 != compared) ++differing;
  }
  return {differing == 0 && compared > 1,
          std::to_string(compared) + " files compared, " + std::to_string(differing) + " differ"};
}

// ---- 11 ----------------------------------------------------------------------

Outcome census_counts() {
  SynthConfig sc;
  sc.n_companies = 500;
  const auto reg = generate_registry(sc, 500).registry;
  FeatureConfig fc;
  fc.afe = false;
  std::size_t pairs = 0, mismatches = 0;
  for (int W = 1; W <= 3; ++W) {
    for (int t0 = sc.first_year + W - 1; t0 < reg.horizon_year(); ++t0) {
      const auto m = build_samples(reg, fc, W, t0).matrix;
      const auto [solvent, bankrupt] = testutil::census(reg, W, t0);
      ++pairs;
      if (m.positives() != bankrupt || m.rows() - m.positives() != solvent) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(pairs) + " (W, t0) pairs, " + std::to_string(mismatches) + " mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, auc_matches_concordance}, {2, iv_fixture},    {3, selection_thresholds}, {4, undersampling},
      {5, rate_format},             {6, mlp_gradient},  {7, gbdt_fixture},         {8, behavior_gain},
      {9, covid_drift},             {10, run_determinism}, {11, census_counts}};
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed;
}
