#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "brp/error.hpp"
#include "brp/rng.hpp"
#include "brp/selection.hpp"
#include "test_util.hpp"

using namespace brp;

namespace {

BinningSpec two_bins(std::vector<double> good, std::vector<double> bad) {
  BinningSpec s;
  s.feature = "fr_x";
  s.edges = {0.5};
  s.good = std::move(good);
  s.bad = std::move(bad);
  return s;
}

// Direct evaluation over non-empty bins, smoothing every count by `eps`.
double hand_iv(const std::vector<double>& g, const std::vector<double>& b, double eps) {
  double G = 0, B = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] + b[i] > 0) {
      G += g[i] + eps;
      B += b[i] + eps;
    }
  }
  double iv = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] + b[i] == 0) continue;
    const double pg = (g[i] + eps) / G, pb = (b[i] + eps) / B;
    iv += (pg - pb) * std::log(pg / pb);
  }
  return iv;
}

}  // namespace

TEST_CASE("information value of the two-bin fixture") {
  const auto spec = two_bins({90, 10}, {10, 90});
  CHECK(information_value(spec) == doctest::Approx(2 * 0.8 * std::log(9.0)).epsilon(1e-12));
  CHECK(information_value(spec) == doctest::Approx(3.5156).epsilon(1e-4));
}

TEST_CASE("identical distributions give zero IV") {
  CHECK(information_value(two_bins({30, 70}, {3, 7})) == 0.0);
  CHECK(information_value(two_bins({50, 50}, {50, 50})) == 0.0);
}

TEST_CASE("zero bad count is smoothed to a finite IV") {
  const auto spec = two_bins({40, 60}, {0, 10});
  const double iv = information_value(spec, 0.5);
  CHECK(std::isfinite(iv));
  CHECK(iv == doctest::Approx(hand_iv({40, 60}, {0, 10}, 0.5)).epsilon(1e-12));
}

TEST_CASE("IV equals the sum of its per-bin contributions") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    BinningSpec s;
    const std::size_t k = 2 + rng.below(8);
    for (std::size_t i = 0; i < k; ++i) {
      s.good.push_back(static_cast<double>(rng.below(50)));
      s.bad.push_back(static_cast<double>(rng.below(20)));
      if (i + 1 < k) s.edges.push_back(static_cast<double>(i));
    }
    s.good[0] += 1;
    s.bad[0] += 1;
    const auto parts = iv_contributions(s);
    const double sum = std::accumulate(parts.begin(), parts.end(), 0.0);
    CHECK(information_value(s) == doctest::Approx(sum).epsilon(1e-12));
    const bool any_zero = [&] {
      for (std::size_t i = 0; i < k; ++i) {
        if (s.good[i] + s.bad[i] > 0 && (s.good[i] == 0 || s.bad[i] == 0)) return true;
      }
      return false;
    }();
    CHECK(information_value(s) == doctest::Approx(hand_iv(s.good, s.bad, any_zero ? 0.5 : 0.0)).epsilon(1e-12));
    for (double c : parts) CHECK(c >= 0.0);
    // Swapping good and bad leaves IV unchanged.
    BinningSpec swapped = s;
    std::swap(swapped.good, swapped.bad);
    CHECK(information_value(swapped) == doctest::Approx(information_value(s)).epsilon(1e-12));
  }
}

TEST_CASE("information value needs both classes") {
  CHECK_THROWS_AS(information_value(two_bins({5, 5}, {0, 0})), DataError);
}

TEST_CASE("quantile bins on 1..100") {
  std::vector<std::optional<double>> v;
  std::vector<std::uint8_t> y;
  for (int i = 1; i <= 100; ++i) {
    v.push_back(i);
    y.push_back(i % 3 == 0);
  }
  const auto spec = quantile_bins(v, y, 10, "fr_x");
  REQUIRE(spec.bin_count() == 10);
  CHECK_FALSE(spec.has_missing_bin);
  for (std::size_t b = 0; b < 10; ++b) CHECK(spec.good[b] + spec.bad[b] == 10.0);
  CHECK(spec.total_bad() == 33.0);
  CHECK(std::is_sorted(spec.edges.begin(), spec.edges.end()));
}

TEST_CASE("constant column is uninformative") {
  std::vector<std::optional<double>> v(50, 3.0);
  std::vector<std::uint8_t> y(50, 0);
  y[0] = y[1] = 1;
  const auto spec = quantile_bins(v, y, 10);
  CHECK(spec.bin_count() == 1);
  CHECK_FALSE(spec.informative());
  CHECK(information_value(spec) == 0.0);
}

TEST_CASE("missing bin holds exactly the missing rows") {
  std::vector<std::optional<double>> v;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 100; ++i) {
    v.push_back(i % 10 < 3 ? std::nullopt : std::optional<double>(i));
    y.push_back(i % 7 == 0);
  }
  const auto spec = quantile_bins(v, y, 5);
  REQUIRE(spec.has_missing_bin);
  const auto last = spec.bin_count() - 1;
  CHECK(spec.good[last] + spec.bad[last] == 30.0);
  double bad_missing = 0;
  for (int i = 0; i < 100; ++i) bad_missing += (i % 10 < 3 && i % 7 == 0) ? 1 : 0;
  CHECK(spec.bad[last] == bad_missing);
}

TEST_CASE("all-missing feature is unbinnable") {
  std::vector<std::optional<double>> v(10);
  std::vector<std::uint8_t> y(10, 1);
  CHECK_THROWS_AS(quantile_bins(v, y, 10), DataError);
}

TEST_CASE("IV is unchanged by a monotone transform") {
  Rng rng(8);
  std::vector<double> x(400), z(400);
  std::vector<std::uint8_t> y(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::round(rng.normal() * 100) / 10;
    y[i] = rng.bernoulli(x[i] > 0 ? 0.3 : 0.1);
    z[i] = 2 * x[i] + 1;
  }
  const auto a = select_features(testutil::matrix({"fr_x"}, {x}, y));
  const auto b = select_features(testutil::matrix({"fr_x"}, {z}, y));
  CHECK(a.entries[0].iv == doctest::Approx(b.entries[0].iv).epsilon(1e-12));
}

TEST_CASE("selection respects both thresholds") {
  Rng rng(21);
  const std::size_t n = 10000;
  std::vector<std::uint8_t> y(n);
  std::vector<double> sep(n), noise(n), sparse(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.2);
    sep[i] = y[i] ? 1.0 + rng.uniform() : rng.uniform();
    noise[i] = rng.normal();
    sparse[i] = rng.bernoulli(0.8) ? NAN : sep[i];
  }
  const auto m = testutil::matrix({"fr_noise", "fr_sep", "afe_sparse"}, {noise, sep, sparse}, y);
  const auto report = select_features(m);
  REQUIRE(report.entries.size() == 3);
  CHECK(report.entries[0].feature == "fr_sep");
  CHECK(report.entries[0].selected);
  CHECK(report.find("fr_noise")->iv < 0.02);
  CHECK_FALSE(report.find("fr_noise")->selected);
  CHECK(report.find("afe_sparse")->missing_rate == doctest::Approx(0.8).epsilon(0.05));
  CHECK_FALSE(report.find("afe_sparse")->selected);
  CHECK(report.find("afe_sparse")->family == Family::AFE);
  CHECK(report.selected_features() == std::vector<std::string>{"fr_sep"});

  SUBCASE("row order does not matter") {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng(3).shuffle(perm.begin(), perm.end());
    const auto again = select_features(m.select_rows(perm));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(again.entries[i].feature == report.entries[i].feature);
      CHECK(again.entries[i].iv == doctest::Approx(report.entries[i].iv).epsilon(1e-12));
      CHECK(again.entries[i].selected == report.entries[i].selected);
    }
  }
  SUBCASE("csv report") {
    std::ostringstream out;
    write_iv_report_csv(report, out);
    CHECK(out.str().rfind("feature,", 0) == 0);
    const auto text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  }
}

TEST_CASE("randomized selection never admits sparse or weak features") {
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 40 + rng.below(160);
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = rng.bernoulli(0.3);
    y[0] = 0;
    y[1] = 1;
    std::vector<double> col(n);
    const double miss = rng.uniform();
    const double strength = rng.uniform(0, 2);
    for (std::size_t i = 0; i < n; ++i) col[i] = rng.bernoulli(miss) ? NAN : rng.normal() + strength * y[i];
    if (std::all_of(col.begin(), col.end(), [](double v) { return std::isnan(v); })) col[0] = 0.0;
    const auto e = select_features(testutil::matrix({"fr_x"}, {col}, y)).entries.at(0);
    if (e.missing_rate >= 0.7 || e.iv <= 0.02) CHECK_FALSE(e.selected);
    else CHECK(e.selected);
  }
}
