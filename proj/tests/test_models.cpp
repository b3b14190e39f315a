#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "brp/error.hpp"
#include "brp/metrics.hpp"
#include "brp/mlp_net.hpp"
#include "brp/models.hpp"
#include "brp/trees.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace brp;

namespace {

ModelConfig small_config(ModelFamily f, std::uint64_t seed = 1) {
  ModelConfig c;
  c.family = f;
  c.seed = seed;
  c.forest.n_trees = 20;
  c.gbdt.rounds = 30;
  c.mlp.epochs = 10;
  c.mlp.learning_rate = 1e-3;
  return c;
}

FeatureMatrix separable() {
  return testutil::matrix({"fr_x"}, {{-1, -1, 1, 1}}, {0, 0, 1, 1});
}

FeatureMatrix transform_column(const FeatureMatrix& m, std::size_t col) {
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (auto v = m.at(r, col)) out.set(r, col, 2 * *v + 1);
  }
  return out;
}

// Exhaustive cut search over sorted distinct values.
double exact_best_gain(const std::vector<double>& x, const std::vector<double>& g, const std::vector<double>& h,
                       double lambda) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  const double G = std::accumulate(g.begin(), g.end(), 0.0), H = std::accumulate(h.begin(), h.end(), 0.0);
  double gl = 0, hl = 0, best = 0;
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    gl += g[idx[k]];
    hl += h[idx[k]];
    if (x[idx[k]] == x[idx[k + 1]]) continue;
    const double gain = gl * gl / (hl + lambda) + (G - gl) * (G - gl) / (H - hl + lambda) - G * G / (H + lambda);
    best = std::max(best, gain);
  }
  return best;
}

}  // namespace

TEST_CASE("logistic regression on separable data") {
  const auto X = separable();
  const auto m = fit_logistic(X, X.labels(), small_config(ModelFamily::logistic));
  const auto s = predict_proba(m, X);
  CHECK(auc(s, X.labels()) == 1.0);
  CHECK(std::min(s[2], s[3]) > std::max(s[0], s[1]));
  const auto& lm = std::get<LinearModel>(m.params);
  CHECK(std::isfinite(lm.coef[0]));
  CHECK(std::isfinite(lm.intercept));
  const auto& hist = m.metadata.loss_history;
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1]);
}

TEST_CASE("logistic loss decreases on a noisy fixture") {
  const auto X = testutil::planted_monotone(300, 4, 3, true);
  const auto m = fit_model(X, small_config(ModelFamily::logistic));
  const auto& hist = m.metadata.loss_history;
  REQUIRE(hist.size() > 2);
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] <= hist[i - 1]);
  CHECK(auc(predict_proba(m, X), X.labels()) > 0.9);
}

TEST_CASE("training preconditions") {
  const auto one_class = testutil::matrix({"fr_x"}, {{1, 2, 3, 4}}, {1, 1, 1, 1});
  for (auto f : all_model_families()) CHECK_THROWS_AS(fit_model(one_class, small_config(f)), DataError);
  auto bad = small_config(ModelFamily::random_forest);
  bad.forest.n_trees = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(fit_model(separable(), bad), ConfigError);
  const auto inf = testutil::matrix({"fr_x"}, {{-1, INFINITY, 1, 1}}, {0, 0, 1, 1});
  CHECK_THROWS_AS(fit_model(inf, small_config(ModelFamily::gbdt)), NumericError);
}

TEST_CASE("forest stump separates a single feature") {
  const auto X = testutil::matrix({"fr_x"}, {{0.1, 0.3, 0.2, 0.7, 0.9, 0.8}}, {0, 0, 0, 1, 1, 1});
  auto cfg = small_config(ModelFamily::random_forest);
  cfg.forest.n_trees = 1;
  cfg.forest.max_depth = 1;
  cfg.forest.min_leaf = 1;
  cfg.forest.bootstrap = false;
  const auto m = fit_model(X, cfg);
  const auto& tree = std::get<ForestModel>(m.params).trees.at(0);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].threshold > 0.3);
  CHECK(tree.nodes[0].threshold < 0.7);
  const auto s = predict_proba(m, X);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK((s[i] > 0.5) == (X.label(i) == 1));
}

TEST_CASE("gbdt with zero rounds predicts the base rate") {
  const auto X = testutil::planted_monotone(200, 2, 9);
  auto cfg = small_config(ModelFamily::gbdt);
  cfg.gbdt.rounds = 0;
  const auto m = fit_model(X, cfg);
  const double rate = static_cast<double>(X.positives()) / static_cast<double>(X.rows());
  for (double s : predict_proba(m, X)) CHECK(s == rate);
}

TEST_CASE("gbdt learns a planted monotone signal") {
  const auto X = testutil::planted_monotone(2000, 0, 12);
  auto cfg = small_config(ModelFamily::gbdt);
  cfg.gbdt.rounds = 50;
  const auto m = fit_model(X, cfg);
  CHECK(auc(predict_proba(m, X), X.labels()) >= 0.95);
  const auto& hist = m.metadata.loss_history;
  CHECK(hist.back() < hist.front());
}

TEST_CASE("histogram gain matches the exact split gain") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 5 + rng.below(40);
    std::vector<double> x(n), g(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.below(12));
      g[i] = rng.uniform(-1, 1);
      h[i] = rng.uniform(0.05, 0.25);
    }
    const auto bins = trees::make_bins(x, 255);
    std::vector<trees::GradStats> hist(bins.size() + 1);
    for (std::size_t i = 0; i < n; ++i) hist[bins.code(x[i])] += {g[i], h[i], 1.0};
    const trees::GbdtSplitLimits limits{1.0, 1.0, 0.0};
    const auto s = trees::best_gbdt_split(hist, bins, limits, 0);
    const double exact = exact_best_gain(x, g, h, 1.0);
    if (exact > 1e-12) {
      REQUIRE(s.valid());
      CHECK(s.gain == doctest::Approx(exact).epsilon(1e-12));
    } else {
      CHECK_FALSE(s.valid());
    }
  }
}

TEST_CASE("tree ensembles are unchanged by a monotone transform") {
  const auto X = testutil::planted_monotone(400, 3, 4, true);
  for (auto f : {ModelFamily::gbdt, ModelFamily::random_forest}) {
    auto Xt = X;
    for (std::size_t c = 0; c < X.cols(); ++c) Xt = transform_column(Xt, c);
    const auto a = predict_proba(fit_model(X, small_config(f)), X);
    const auto b = predict_proba(fit_model(Xt, small_config(f)), Xt);
    CHECK(std::fabs(auc(a, X.labels()) - auc(b, X.labels())) <= 1e-12);
  }
}

TEST_CASE("every family scores in [0, 1], deterministically, by column name") {
  const auto X = testutil::planted_monotone(300, 4, 6, true);
  std::vector<std::size_t> perm(X.cols());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  const auto permuted = X.select_columns(perm);
  std::vector<std::size_t> rows(X.rows());
  std::iota(rows.begin(), rows.end(), 0);
  Rng(2).shuffle(rows.begin(), rows.end());
  const auto shuffled = X.select_rows(rows);

  for (auto f : all_model_families()) {
    CAPTURE(to_string(f));
    const auto cfg = small_config(f);
    const auto m = fit_model(X, cfg);
    const auto s = predict_proba(m, X);
    REQUIRE(s.size() == X.rows());
    for (double v : s) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(predict_proba(fit_model(X, cfg), X) == s);
    CHECK(predict_proba(m, permuted) == s);
    const auto sr = predict_proba(m, shuffled);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(sr[i] == s[rows[i]]);
    CHECK(predict_proba(m, X.select_rows(std::vector<std::size_t>{})).empty());
  }
}

TEST_CASE("parallel fitting is bit-identical to serial") {
  const auto X = testutil::planted_monotone(300, 6, 8, true);
  for (auto f : {ModelFamily::gbdt, ModelFamily::random_forest}) {
    auto serial = small_config(f);
    auto parallel = serial;
    parallel.threads = 3;
    CHECK(predict_proba(fit_model(X, serial), X) == predict_proba(fit_model(X, parallel), X));
  }
}

TEST_CASE("schema mismatch is rejected") {
  const auto X = testutil::planted_monotone(100, 2, 1);
  const auto m = fit_model(X, small_config(ModelFamily::logistic));
  const auto fewer = X.select_columns(std::vector<std::string>{"fr_signal", "afe_noise0"});
  CHECK_THROWS_AS(predict_proba(m, fewer), DataError);
  const auto renamed = testutil::matrix({"fr_signal", "afe_noise0", "afe_other"}, {{1}, {2}, {3}}, {0});
  try {
    predict_proba(m, renamed);
    FAIL("expected a schema error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("afe_noise1") != std::string::npos);
    CHECK(std::string(e.what()).find("afe_other") != std::string::npos);
  }
}

TEST_CASE("model json round trip reproduces scores") {
  const auto X = testutil::planted_monotone(250, 3, 10, true);
  for (auto f : all_model_families()) {
    CAPTURE(to_string(f));
    const auto m = fit_model(X, small_config(f));
    const auto text = model_to_json(m).dump();
    const auto back = model_from_json(nlohmann::json::parse(text));
    const auto a = predict_proba(m, X), b = predict_proba(back, X);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-12);
    CHECK(back.metadata.data_fingerprint == m.metadata.data_fingerprint);
    CHECK(model_to_json(back) == model_to_json(m));
  }
  auto j = model_to_json(fit_model(X, small_config(ModelFamily::logistic)));
  j["format"] = "brp.model/0";
  CHECK_THROWS_AS(model_from_json(j), DataError);
}

TEST_CASE("model config json and named parameters") {
  auto c = small_config(ModelFamily::gbdt, 77);
  c.set("max_leaves", 7);
  CHECK(c.get("max_leaves") == 7.0);
  CHECK(model_config_from_json(to_json(c)).gbdt.max_leaves == 7);
  CHECK_THROWS_AS(c.set("l2", 1.0), ConfigError);
  CHECK_THROWS_AS(c.set("learning_rate", -1.0), ConfigError);
  auto j = to_json(c);
  j["params"]["bogus"] = 1;
  CHECK_THROWS_AS(model_config_from_json(j), ConfigError);
}

TEST_CASE("mlp with zero weights scores one half") {
  const MlpShape shape{3, 4, 2, 5, 3};
  const MlpNet net(shape);
  std::vector<double> params(shape.param_count(), 0.0), x(6 * shape.input_width(), 1.5), out(6);
  net.logits(params, x, 6, out);
  for (double z : out) CHECK(z == 0.0);

  const auto X = testutil::planted_monotone(100, 3, 2);
  auto m = fit_model(X, small_config(ModelFamily::mlp));
  auto& mm = std::get<MlpModel>(m.params);
  std::fill(mm.params.begin(), mm.params.end(), 0.0);
  for (double s : predict_proba(m, X)) CHECK(s == 0.5);
}

TEST_CASE("mlp analytic gradient matches finite differences") {
  for (std::uint64_t seed : {1, 2, 3}) CHECK(testutil::mlp_gradient_error(seed) <= 1e-4);
}

TEST_CASE("mlp projection is skipped without behavior columns") {
  const MlpShape no_rb{4, 0, 16, 8, 4};
  CHECK_FALSE(no_rb.has_projection());
  CHECK(no_rb.param_count() == 8 * 4 + 8 + 4 * 8 + 4 + 4 + 1);
  const auto X = testutil::planted_monotone(200, 2, 5);
  const auto m = fit_model(X, small_config(ModelFamily::mlp));
  CHECK(std::get<MlpModel>(m.params).rb_columns.empty());
  CHECK(auc(predict_proba(m, X), X.labels()) > 0.8);

  const auto with_rb = testutil::matrix({"fr_a", "rb_count_x", "rb_total_events"},
                                        {{1, 2, 3, 4, 5, 6}, {0, 0, 1, 2, 3, 3}, {0, 1, 1, 2, 4, 5}},
                                        {0, 0, 0, 1, 1, 1});
  const auto m2 = fit_model(with_rb, small_config(ModelFamily::mlp));
  CHECK(std::get<MlpModel>(m2.params).rb_columns.size() == 2);
}

TEST_CASE("stratified folds keep both classes in every fold") {
  std::vector<std::uint8_t> y(103, 0);
  for (std::size_t i = 0; i < 23; ++i) y[i * 4] = 1;
  const auto folds = stratified_folds(y, 5, 3);
  for (int f = 0; f < 5; ++f) {
    std::size_t pos = 0, n = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (folds[i] != f) continue;
      ++n;
      pos += y[i];
    }
    CHECK(pos >= 4);
    CHECK(pos <= 5);
    CHECK(n >= 20);
    CHECK(n <= 21);
  }
  CHECK(stratified_folds(y, 5, 3) == folds);
  auto few = testutil::planted_monotone(40, 1, 2);
  std::vector<std::uint8_t> labels(40, 0);
  labels[0] = labels[1] = 1;
  const HyperGrid g{ModelFamily::logistic, {{"l2", {1.0}}}};
  CHECK_THROWS_AS(grid_search_cv(g, small_config(ModelFamily::logistic), few, labels, 5, 1), DataError);
}

TEST_CASE("grid search") {
  const auto X = testutil::planted_monotone(300, 3, 14);
  SUBCASE("single cell") {
    HyperGrid g{ModelFamily::logistic, {{"l2", {3.0}}}};
    const auto r = grid_search_cv(g, small_config(ModelFamily::logistic), X, X.labels(), 5, 1);
    CHECK(r.cells.size() == 1);
    CHECK(r.best_index == 0);
    CHECK(r.best.logistic.l2 == 3.0);
    CHECK(r.fold_auc[0].size() == 5);
  }
  SUBCASE("stronger cell wins") {
    HyperGrid g{ModelFamily::gbdt, {{"rounds", {0, 40}}}};
    const auto r = grid_search_cv(g, small_config(ModelFamily::gbdt), X, X.labels(), 5, 1);
    CHECK(r.best.gbdt.rounds == 40);
    CHECK(r.mean_auc[0] == 0.5);
    CHECK(r.mean_auc[1] > 0.9);
  }
  SUBCASE("cells are a lexicographic product and runs repeat") {
    HyperGrid g{ModelFamily::gbdt, {{"rounds", {5, 10}}, {"max_leaves", {3, 7, 15}}}};
    const auto cells = g.cells(small_config(ModelFamily::gbdt));
    REQUIRE(cells.size() == 6);
    CHECK(cells[1].gbdt.rounds == 5);
    CHECK(cells[1].gbdt.max_leaves == 7);
    CHECK(cells[3].gbdt.rounds == 10);
    const auto a = grid_search_cv(g, small_config(ModelFamily::gbdt), X, X.labels(), 3, 9);
    const auto b = grid_search_cv(g, small_config(ModelFamily::gbdt), X, X.labels(), 3, 9);
    CHECK(a.best_index == b.best_index);
    CHECK(a.mean_auc == b.mean_auc);
  }
  SUBCASE("default grids are valid for every family") {
    for (auto f : all_model_families()) {
      for (const auto& c : HyperGrid::defaults(f).cells(small_config(f))) CHECK_NOTHROW(c.validate());
    }
  }
}
