#include "brp/windows.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "brp/error.hpp"
#include "brp/rng.hpp"

namespace brp {

void FeatureConfig::validate() const {
  if (!fr && !afe && !rb) throw ConfigError("at least one feature family must be enabled");
  if (afe) grammar.validate();
}

namespace {

std::string lag_suffix(int k) { return k == 0 ? std::string() : "_lag" + std::to_string(k); }

void check_window(int window_length) {
  if (window_length < 1 || window_length > 3) {
    throw ConfigError("window length must be 1, 2 or 3 (got " + std::to_string(window_length) + ")");
  }
}

}  // namespace

std::vector<ColumnInfo> window_columns(const FeatureConfig& cfg, int window_length) {
  check_window(window_length);
  std::vector<ColumnInfo> cols;
  if (cfg.fr) {
    for (int k = 0; k < window_length; ++k) {
      for (const auto& n : financial_ratio_names()) cols.push_back({n + lag_suffix(k), Family::FR});
    }
    if (window_length > 1) {
      for (auto item : all_line_items()) {
        cols.push_back({"fr_growth_" + std::string(to_string(item)) + "_" + std::to_string(window_length - 1) + "y",
                        Family::FR});
      }
    }
  }
  if (cfg.afe) {
    AfeGenerator gen(cfg.grammar);
    for (int k = 0; k < window_length; ++k) {
      for (const auto& n : gen.names()) cols.push_back({n + lag_suffix(k), Family::AFE});
    }
  }
  if (cfg.rb) {
    for (const auto& n : behavior_feature_names()) cols.push_back({n, Family::RB});
  }
  return cols;
}

SampleSet build_samples(const Registry& registry, const FeatureConfig& cfg, int window_length, int reference_year) {
  cfg.validate();
  check_window(window_length);
  if (reference_year + 1 > registry.horizon_year()) {
    throw DataError("reference year " + std::to_string(reference_year) + ": labels need data through " +
                    std::to_string(reference_year + 1) + " but the registry horizon is " +
                    std::to_string(registry.horizon_year()));
  }
  const int t0 = reference_year;
  const int first_year = t0 - window_length + 1;

  SampleSet out;
  out.window_length = window_length;
  out.reference_year = t0;
  out.matrix = FeatureMatrix(window_columns(cfg, window_length));

  std::optional<AfeGenerator> afe;
  if (cfg.afe) afe.emplace(cfg.grammar);
  std::vector<std::optional<double>> row(out.matrix.cols());
  std::vector<std::optional<double>> scratch;
  const auto& companies = registry.companies();

  for (std::size_t ci = 0; ci < companies.size(); ++ci) {
    const auto& company = companies[ci];
    if (company.bankrupt_date && *company.bankrupt_date <= Date::year_end(t0)) continue;

    // Truncated view: nothing dated after Dec 31 of t0 is visible to features.
    auto all_snaps = registry.snapshots_of(ci);
    const auto snap_end = std::upper_bound(all_snaps.begin(), all_snaps.end(), t0,
                                           [](int y, const BalanceSheetSnapshot& s) { return y < s.fiscal_year; });
    const auto snaps = all_snaps.first(static_cast<std::size_t>(snap_end - all_snaps.begin()));
    auto all_events = registry.events_of(ci);
    const auto ev_end = std::upper_bound(all_events.begin(), all_events.end(), Date::year_end(t0),
                                         [](const Date& d, const FilingEvent& e) { return d < e.event_date; });
    const auto events = all_events.first(static_cast<std::size_t>(ev_end - all_events.begin()));

    auto find_snap = [&](int year) -> const BalanceSheetSnapshot* {
      auto it = std::lower_bound(snaps.begin(), snaps.end(), year,
                                 [](const BalanceSheetSnapshot& s, int y) { return s.fiscal_year < y; });
      return (it != snaps.end() && it->fiscal_year == year) ? &*it : nullptr;
    };
    bool complete = true;
    for (int y = first_year; y <= t0 && complete; ++y) complete = find_snap(y) != nullptr;
    if (!complete) continue;

    std::size_t o = 0;
    if (cfg.fr) {
      for (int k = 0; k < window_length; ++k) {
        const auto* s = find_snap(t0 - k);
        const auto vals = financial_ratio_values(*s, find_snap(t0 - k - 1));
        for (const auto& v : vals) row[o++] = v;
      }
      if (window_length > 1) {
        const auto* cur = find_snap(t0);
        const auto* old = find_snap(first_year);
        for (auto item : all_line_items()) {
          const auto a = cur->get(item), b = old->get(item);
          std::optional<double> g;
          if (a && b) {
            if (*b != 0.0) {
              g = (*a - *b) / std::fabs(*b);
            } else if (*a != 0.0) {
              g = *a > 0 ? HUGE_VAL : -HUGE_VAL;
            }
          }
          row[o++] = g;
        }
      }
    }
    if (afe) {
      scratch.resize(afe->size());
      for (int k = 0; k < window_length; ++k) {
        const auto* s = find_snap(t0 - k);
        const auto history = snaps.first(static_cast<std::size_t>(s - snaps.data()) + 1);
        afe->evaluate(history, scratch);
        for (const auto& v : scratch) row[o++] = v;
      }
    }
    if (cfg.rb) {
      behavior_values(events, first_year, t0, cfg.trend,
                      std::span<std::optional<double>>(row).subspan(o, behavior_feature_names().size()));
      o += behavior_feature_names().size();
    }
    const std::uint8_t label = (company.bankrupt_date && company.bankrupt_date->year == t0 + 1) ? 1 : 0;
    out.matrix.add_row({company.company_id, t0, window_length}, label, row);
  }
  return out;
}

std::vector<int> SplitYears::all_years() const {
  std::set<int> ys;
  for (int y = train_first; y <= train_last; ++y) ys.insert(y);
  ys.insert(pre_covid.begin(), pre_covid.end());
  ys.insert(post_covid.begin(), post_covid.end());
  return {ys.begin(), ys.end()};
}

SplitBundle assemble_splits(std::span<const SampleSet> samplesets, double split_fraction, std::uint64_t split_seed,
                            const SplitYears& years, bool group_by_company) {
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
  if (samplesets.empty()) throw DataError("no sample sets to split");
  const int W = samplesets.front().window_length;
  std::map<int, const SampleSet*> by_year;
  for (const auto& s : samplesets) {
    if (s.window_length != W) throw DataError("sample sets mix window lengths");
    if (!by_year.emplace(s.reference_year, &s).second) {
      throw DataError("duplicate sample set for reference year " + std::to_string(s.reference_year));
    }
  }
  std::string absent;
  for (int y : years.all_years()) {
    if (!by_year.contains(y)) absent += (absent.empty() ? "" : ", ") + std::to_string(y);
  }
  if (!absent.empty()) throw DataError("sample sets missing for reference years: " + absent);

  auto gather = [&](const std::vector<int>& ys) {
    std::vector<FeatureMatrix> parts;
    for (int y : ys) parts.push_back(by_year.at(y)->matrix);
    return FeatureMatrix::concat_rows(parts);
  };
  std::vector<int> train_years;
  for (int y = years.train_first; y <= years.train_last; ++y) train_years.push_back(y);
  const FeatureMatrix pool = gather(train_years);

  std::vector<std::size_t> train_rows, test_rows;
  if (group_by_company) {
    std::set<std::string> ids;
    for (const auto& k : pool.keys()) ids.insert(k.company_id);
    std::vector<std::string> order(ids.begin(), ids.end());
    Rng rng(derive_seed(split_seed, "company-split"));
    rng.shuffle(order.begin(), order.end());
    const auto n_train = static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(order.size())));
    const std::set<std::string> train_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    for (std::size_t r = 0; r < pool.rows(); ++r) {
      (train_ids.contains(pool.key(r).company_id) ? train_rows : test_rows).push_back(r);
    }
  } else {
    std::map<std::pair<int, int>, std::vector<std::size_t>> strata;
    for (std::size_t r = 0; r < pool.rows(); ++r) strata[{pool.key(r).reference_year, pool.label(r)}].push_back(r);
    for (auto& [stratum, rows] : strata) {
      Rng rng(derive_seed(split_seed, static_cast<std::uint64_t>(stratum.first) * 2 + stratum.second));
      rng.shuffle(rows.begin(), rows.end());
      const auto n_train = static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(rows.size())));
      train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
      test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
  }

  SplitBundle b;
  b.window_length = W;
  b.split_fraction = split_fraction;
  b.split_seed = split_seed;
  b.group_by_company = group_by_company;
  b.train = pool.select_rows(train_rows);
  b.test = pool.select_rows(test_rows);
  b.pre_covid = gather(years.pre_covid);
  b.post_covid = gather(years.post_covid);
  return b;
}

UndersampleResult undersample(const FeatureMatrix& train, double target_rate, std::uint64_t seed) {
  if (!(target_rate > 0.0 && target_rate < 1.0)) throw ConfigError("undersampling target rate must lie in (0, 1)");
  const std::size_t pos = train.positives();
  if (pos == 0) throw DataError("cannot undersample a training set without positives");
  const std::size_t neg = train.rows() - pos;
  const double current = static_cast<double>(pos) / static_cast<double>(train.rows());
  UndersampleResult out;
  if (target_rate <= current) {
    out.matrix = train;
    out.notice = "positive rate " + format_rate(pos, neg) + " already at or above target; training set unchanged";
    return out;
  }
  const auto keep = std::min<std::size_t>(
      neg, static_cast<std::size_t>(std::llround(static_cast<double>(pos) * (1.0 - target_rate) / target_rate)));
  std::vector<std::size_t> negatives, kept;
  for (std::size_t r = 0; r < train.rows(); ++r) (train.label(r) ? kept : negatives).push_back(r);
  Rng rng(derive_seed(seed, "undersample"));
  // Partial Fisher-Yates: the first `keep` slots form a uniform sample.
  for (std::size_t i = 0; i < keep; ++i) {
    const auto j = i + rng.below(negatives.size() - i);
    std::swap(negatives[i], negatives[j]);
  }
  kept.insert(kept.end(), negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(keep));
  std::sort(kept.begin(), kept.end());
  out.matrix = train.select_rows(kept);
  out.changed = true;
  out.notice = "kept " + std::to_string(pos) + " positives and " + std::to_string(keep) + " of " +
               std::to_string(neg) + " negatives (" + format_rate(pos, keep) + ")";
  return out;
}

std::string format_rate(std::size_t positives, std::size_t negatives) {
  const std::size_t n = positives + negatives;
  const double pct = n == 0 ? 0.0 : 100.0 * static_cast<double>(positives) / static_cast<double>(n);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", pct);
  return buf;
}

nlohmann::json split_manifest(const SplitBundle& bundle) {
  auto describe = [](const FeatureMatrix& m) {
    const std::size_t pos = m.positives();
    const std::size_t neg = m.rows() - pos;
    return nlohmann::json{{"samples", m.rows()},
                          {"positives", pos},
                          {"negatives", neg},
                          {"bankruptcy_rate", format_rate(pos, neg)}};
  };
  return nlohmann::json{{"window_length", bundle.window_length},
                        {"split_fraction", bundle.split_fraction},
                        {"split_seed", bundle.split_seed},
                        {"group_by_company", bundle.group_by_company},
                        {"splits",
                         {{"train", describe(bundle.train)},
                          {"test", describe(bundle.test)},
                          {"pre_covid", describe(bundle.pre_covid)},
                          {"post_covid", describe(bundle.post_covid)}}}};
}

}  // namespace brp
