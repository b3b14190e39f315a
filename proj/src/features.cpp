#include "brp/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "brp/error.hpp"

namespace brp {

namespace {

using Opt = std::optional<double>;

Opt divide(Opt a, Opt b) {
  if (!a || !b) return std::nullopt;
  if (*b == 0.0) {
    if (*a == 0.0) return std::nullopt;
    return *a > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return *a / *b;
}

Opt subtract(Opt a, Opt b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

Opt add(Opt a, Opt b) {
  if (!a || !b) return std::nullopt;
  return *a + *b;
}

Opt absolute(Opt a) {
  if (!a) return std::nullopt;
  return std::fabs(*a);
}

Opt item(const BalanceSheetSnapshot& s, LineItem i) { return s.get(i); }

}  // namespace

const std::array<std::string, kFinancialRatioCount>& financial_ratio_names() {
  static const std::array<std::string, kFinancialRatioCount> names = {
      "fr_current_ratio",
      "fr_debt_to_equity",
      "fr_working_capital_to_total_assets",
      "fr_total_liabilities_to_total_assets",
      "fr_equity_to_total_assets",
      "fr_quick_ratio",
      "fr_current_assets_to_total_assets",
      "fr_cash_to_total_assets",
      "fr_cash_to_current_liabilities",
      "fr_long_term_debt_to_equity",
      "fr_total_assets_growth_rate",
      "fr_quick_assets_to_total_assets",
      "fr_current_assets_to_current_liabilities",
      "fr_cash_or_marketable_securities_to_total_assets",
      "fr_total_debt_to_total_assets",
      "fr_equity_to_fixed_assets",
      "fr_current_assets_to_total_liabilities",
      "fr_short_term_liabilities_to_total_assets",
  };
  return names;
}

std::array<Opt, kFinancialRatioCount> financial_ratio_values(const BalanceSheetSnapshot& s,
                                                             const BalanceSheetSnapshot* prior) {
  using L = LineItem;
  const Opt ta = item(s, L::total_assets), ca = item(s, L::current_assets), qa = item(s, L::quick_assets),
            cash = item(s, L::cash), ms = item(s, L::marketable_securities), fa = item(s, L::fixed_assets),
            tl = item(s, L::total_liabilities), cl = item(s, L::current_liabilities),
            ltd = item(s, L::long_term_debt), eq = item(s, L::equity);
  const Opt total_debt = add(cl, ltd);
  const Opt prior_ta = prior ? item(*prior, L::total_assets) : Opt{};
  return {
      divide(ca, cl),
      divide(tl, eq),
      divide(subtract(ca, cl), ta),
      divide(tl, ta),
      divide(eq, ta),
      divide(qa, cl),
      divide(ca, ta),
      divide(cash, ta),
      divide(cash, cl),
      divide(ltd, eq),
      divide(subtract(ta, prior_ta), prior_ta),
      divide(qa, ta),
      divide(ca, cl),
      divide(add(cash, ms), ta),
      divide(total_debt, ta),
      divide(eq, fa),
      divide(ca, tl),
      divide(cl, ta),
  };
}

FeatureVector financial_ratios(const BalanceSheetSnapshot& snapshot, const std::optional<BalanceSheetSnapshot>& prior) {
  const auto values = financial_ratio_values(snapshot, prior ? &*prior : nullptr);
  FeatureVector fv;
  const auto& names = financial_ratio_names();
  for (std::size_t i = 0; i < kFinancialRatioCount; ++i) fv.push(names[i], Family::FR, values[i]);
  return fv;
}

// ---- AFE ----------------------------------------------------------------------

const std::array<std::string, kOperandCount>& afe_operand_names() {
  static const std::array<std::string, kOperandCount> names = [] {
    std::array<std::string, kOperandCount> n;
    for (std::size_t i = 0; i < kLineItemCount; ++i) n[i] = std::string(to_string(static_cast<LineItem>(i)));
    n[10] = "working_capital";
    n[11] = "total_debt";
    return n;
  }();
  return names;
}

Opt afe_operand(const BalanceSheetSnapshot& s, std::size_t operand) {
  if (operand < kLineItemCount) return s.items[operand];
  if (operand == 10) return subtract(s.get(LineItem::current_assets), s.get(LineItem::current_liabilities));
  if (operand == 11) return add(s.get(LineItem::current_liabilities), s.get(LineItem::long_term_debt));
  throw std::out_of_range("afe operand");
}

void AfeGrammar::validate() const {
  if (max_features < 1) throw ConfigError("AFE grammar: max_features must be >= 1");
  if (lag_depth < 0 || lag_depth > 10) throw ConfigError("AFE grammar: lag_depth must be in [0, 10]");
  const auto& all = afe_operand_names();
  for (const auto& o : operands) {
    if (std::find(all.begin(), all.end(), o) == all.end()) throw ConfigError("AFE grammar: unknown operand " + o);
  }
}

AfeGenerator::AfeGenerator(const AfeGrammar& grammar) {
  grammar.validate();
  const auto& all = afe_operand_names();
  std::vector<std::uint8_t> ops;
  if (grammar.operands.empty()) {
    for (std::size_t i = 0; i < kOperandCount; ++i) ops.push_back(static_cast<std::uint8_t>(i));
  } else {
    for (const auto& o : grammar.operands) {
      const auto idx = static_cast<std::uint8_t>(std::find(all.begin(), all.end(), o) - all.begin());
      if (std::find(ops.begin(), ops.end(), idx) == ops.end()) ops.push_back(idx);
    }
  }

  auto emit = [&](AfeRecipe r, std::string name) {
    if (recipes_.size() >= grammar.max_features) return;
    recipes_.push_back(r);
    names_.push_back(std::move(name));
  };

  if (grammar.identity) {
    for (auto a : ops) emit({AfeOp::identity, a}, "afe_id_" + all[a]);
  }
  if (grammar.log1p) {
    for (auto a : ops) emit({AfeOp::log1p, a}, "afe_log1p_" + all[a]);
  }
  for (int k = 1; k <= grammar.lag_depth; ++k) {
    for (auto a : ops) {
      emit({AfeOp::lag_delta, a, 0, 0, static_cast<std::uint8_t>(k)}, "afe_lag" + std::to_string(k) + "_delta_" + all[a]);
    }
  }
  if (grammar.ratio) {
    for (auto a : ops) {
      for (auto b : ops) {
        if (a != b) emit({AfeOp::ratio, a, b}, "afe_div_" + all[a] + "_" + all[b]);
      }
    }
  }
  if (grammar.difference) {
    for (std::size_t i = 0; i < ops.size(); ++i) {
      for (std::size_t j = i + 1; j < ops.size(); ++j) {
        emit({AfeOp::difference, ops[i], ops[j]}, "afe_sub_" + all[ops[i]] + "_" + all[ops[j]]);
      }
    }
  }
  if (grammar.normalized_difference) {
    for (std::size_t i = 0; i < ops.size(); ++i) {
      for (std::size_t j = i + 1; j < ops.size(); ++j) {
        for (auto c : ops) {
          if (c == ops[i] || c == ops[j]) continue;
          emit({AfeOp::normalized_difference, ops[i], ops[j], c},
               "afe_nsub_" + all[ops[i]] + "_" + all[ops[j]] + "_" + all[c]);
        }
      }
    }
  }
}

void AfeGenerator::evaluate(std::span<const BalanceSheetSnapshot> history, std::span<Opt> out) const {
  if (history.empty()) throw DataError("afe: at least one snapshot required");
  if (out.size() != recipes_.size()) throw std::invalid_argument("afe: output span size mismatch");
  const auto& cur = history.back();
  auto lagged = [&](int k) -> const BalanceSheetSnapshot* {
    const int want = cur.fiscal_year - k;
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
      if (it->fiscal_year == want) return &*it;
      if (it->fiscal_year < want) break;
    }
    return nullptr;
  };
  std::array<Opt, kOperandCount> v;
  for (std::size_t i = 0; i < kOperandCount; ++i) v[i] = afe_operand(cur, i);

  for (std::size_t i = 0; i < recipes_.size(); ++i) {
    const auto& r = recipes_[i];
    Opt x;
    switch (r.op) {
      case AfeOp::identity:
        x = v[r.a];
        break;
      case AfeOp::log1p:
        if (v[r.a] && *v[r.a] >= 0.0) x = std::log1p(*v[r.a]);
        break;
      case AfeOp::lag_delta: {
        const auto* prev = lagged(r.lag);
        if (prev) {
          const Opt old = afe_operand(*prev, r.a);
          x = divide(subtract(v[r.a], old), absolute(old));
        }
        break;
      }
      case AfeOp::ratio:
        x = divide(v[r.a], v[r.b]);
        break;
      case AfeOp::difference:
        x = subtract(v[r.a], v[r.b]);
        break;
      case AfeOp::normalized_difference:
        x = divide(subtract(v[r.a], v[r.b]), absolute(v[r.c]));
        break;
    }
    out[i] = x;
  }
}

FeatureVector afe_candidates(std::span<const BalanceSheetSnapshot> history, const AfeGrammar& grammar) {
  AfeGenerator gen(grammar);
  std::vector<Opt> values(gen.size());
  gen.evaluate(history, values);
  FeatureVector fv;
  for (std::size_t i = 0; i < gen.size(); ++i) fv.push(gen.names()[i], Family::AFE, values[i]);
  return fv;
}

// ---- RB -------------------------------------------------------------------------

std::optional<TrendKind> parse_trend_kind(std::string_view s) noexcept {
  if (s == "difference") return TrendKind::difference;
  if (s == "slope") return TrendKind::slope;
  return std::nullopt;
}

std::string_view to_string(TrendKind k) noexcept { return k == TrendKind::slope ? "slope" : "difference"; }

const std::vector<std::string>& behavior_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (auto tok : event_catalog()) n.push_back("rb_count_" + std::string(tok));
    n.push_back("rb_total_events");
    n.push_back("rb_distinct_types");
    n.push_back("rb_months_since_last");
    for (auto tok : event_catalog()) n.push_back("rb_trend_" + std::string(tok));
    return n;
  }();
  return names;
}

void behavior_values(std::span<const FilingEvent> events, int start_year, int end_year, TrendKind trend,
                     std::span<Opt> out) {
  if (end_year < start_year) throw DataError("behavior window is empty");
  if (out.size() != behavior_feature_names().size()) throw std::invalid_argument("behavior: output size mismatch");
  const int years = end_year - start_year + 1;
  // counts[type * years + (year - start_year)]
  std::vector<double> counts(kEventTypeCount * static_cast<std::size_t>(years), 0.0);
  const Date lo = Date::year_start(start_year), hi = Date::year_end(end_year);
  std::optional<Date> latest;
  double total = 0.0;
  for (const auto& e : events) {
    if (e.event_date < lo || e.event_date > hi) continue;
    counts[e.event_type * static_cast<std::size_t>(years) + static_cast<std::size_t>(e.event_date.year - start_year)] += 1.0;
    total += 1.0;
    if (!latest || e.event_date > *latest) latest = e.event_date;
  }

  std::size_t o = 0;
  double distinct = 0.0;
  for (std::size_t t = 0; t < kEventTypeCount; ++t) {
    double c = 0.0;
    for (int y = 0; y < years; ++y) c += counts[t * years + y];
    out[o++] = c;
    if (c > 0.0) distinct += 1.0;
  }
  out[o++] = total;
  out[o++] = distinct;
  out[o++] = latest ? Opt(static_cast<double>(months_until_year_end(*latest, end_year))) : Opt{};

  for (std::size_t t = 0; t < kEventTypeCount; ++t) {
    const double* row = &counts[t * years];
    if (years < 2) {
      out[o++] = std::nullopt;
      continue;
    }
    if (trend == TrendKind::difference) {
      double earlier = 0.0;
      for (int y = 0; y + 1 < years; ++y) earlier += row[y];
      out[o++] = row[years - 1] - earlier / (years - 1);
    } else {
      const double xbar = (years - 1) / 2.0;
      double ybar = 0.0;
      for (int y = 0; y < years; ++y) ybar += row[y];
      ybar /= years;
      double sxy = 0.0, sxx = 0.0;
      for (int y = 0; y < years; ++y) {
        sxy += (y - xbar) * (row[y] - ybar);
        sxx += (y - xbar) * (y - xbar);
      }
      out[o++] = sxy / sxx;
    }
  }
}

FeatureVector behavior_features(std::span<const FilingEvent> events, int start_year, int end_year, TrendKind trend) {
  const auto& names = behavior_feature_names();
  std::vector<Opt> values(names.size());
  behavior_values(events, start_year, end_year, trend, values);
  FeatureVector fv;
  for (std::size_t i = 0; i < names.size(); ++i) fv.push(names[i], Family::RB, values[i]);
  return fv;
}

// ---- Sanitize ------------------------------------------------------------------

SanitizeStats fit_sanitizer(const FeatureMatrix& m) {
  SanitizeStats s;
  s.max_finite.resize(m.cols());
  s.min_finite.resize(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto vals = m.column_values(c);
    const auto miss = m.column_missing(c);
    for (std::size_t r = 0; r < vals.size(); ++r) {
      if (miss[r] || !std::isfinite(vals[r])) continue;
      if (!s.max_finite[c] || vals[r] > *s.max_finite[c]) s.max_finite[c] = vals[r];
      if (!s.min_finite[c] || vals[r] < *s.min_finite[c]) s.min_finite[c] = vals[r];
    }
  }
  return s;
}

FeatureMatrix apply_sanitizer(const FeatureMatrix& m, const SanitizeStats& stats, SanitizeReport* report) {
  if (stats.max_finite.size() != m.cols()) throw DataError("sanitizer fitted on a different column set");
  FeatureMatrix out = m;
  if (report) {
    report->missing_rate.assign(m.cols(), 0.0);
    report->infinities_replaced.assign(m.cols(), 0);
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto vals = m.column_values(c);
    const auto miss = m.column_missing(c);
    const bool no_finite = !stats.max_finite[c].has_value();
    for (std::size_t r = 0; r < vals.size(); ++r) {
      if (miss[r]) continue;
      if (no_finite) {
        out.set(r, c, std::nullopt);
      } else if (std::isinf(vals[r])) {
        out.set(r, c, vals[r] > 0 ? stats.max_finite[c] : stats.min_finite[c]);
        if (report) ++report->infinities_replaced[c];
      }
    }
    if (report) report->missing_rate[c] = out.missing_rate(c);
  }
  return out;
}

FeatureMatrix sanitize_matrix(const FeatureMatrix& m, SanitizeReport* report) {
  return apply_sanitizer(m, fit_sanitizer(m), report);
}

}  // namespace brp
