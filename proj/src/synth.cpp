#include "brp/synth.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <cstdio>

#include "brp/error.hpp"
#include "brp/parallel.hpp"
#include "brp/rng.hpp"

namespace brp {

using nlohmann::json;

void SynthConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("synth: " + m); };
  if (n_companies == 0) fail("n_companies must be positive");
  if (first_year < 1900 || last_year > 9998 || last_year - first_year < 2) {
    fail("year range must span at least three years");
  }
  if (sectors.empty()) fail("sector mix is empty");
  double total = 0.0;
  for (const auto& [name, w] : sectors) {
    if (name.empty() || name.find_first_of(",\"\r\n") != std::string::npos) fail("bad sector name '" + name + "'");
    if (!(w >= 0.0) || !std::isfinite(w)) fail("sector weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) fail("sector weights sum to zero");
  if (!(entrant_share >= 0.0 && entrant_share <= 1.0)) fail("entrant_share must be in [0, 1]");
  if (!(base_hazard > 0.0 && base_hazard < 1.0)) fail("base_hazard must be in (0, 1)");
  if (!std::isfinite(hazard_slope)) fail("hazard_slope must be finite");
  if (!(phi >= 0.0 && phi < 1.0)) fail("phi must be in [0, 1)");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail("sigma must be positive");
  if (!(financial_noise >= 0.0) || !std::isfinite(financial_noise)) fail("financial_noise must be >= 0");
  if (!(item_missing_prob >= 0.0 && item_missing_prob < 1.0)) fail("item_missing_prob must be in [0, 1)");
  if (!(statement_gap_prob >= 0.0 && statement_gap_prob < 1.0)) fail("statement_gap_prob must be in [0, 1)");
  if (!(event_rate >= 0.0) || !std::isfinite(event_rate)) fail("event_rate must be >= 0");
  if (!std::isfinite(event_slope)) fail("event_slope must be finite");
  if (!(event_lead >= 0.0 && event_lead <= 1.0)) fail("event_lead must be in [0, 1]");
  if (covid) {
    if (covid->start_year <= first_year || covid->start_year > last_year) fail("covid.start_year outside the year range");
    // 0 is allowed: it switches bankruptcies off for the regime years.
    if (!(covid->hazard_multiplier >= 0.0) || !std::isfinite(covid->hazard_multiplier)) {
      fail("covid.hazard_multiplier must be >= 0");
    }
    if (!(covid->delay_prob >= 0.0 && covid->delay_prob <= 1.0)) fail("covid.delay_prob must be in [0, 1]");
  }
}

json to_json(const SynthConfig& c) {
  json order = json::array();
  for (const auto& [name, w] : c.sectors) order.push_back({name, w});
  json j{{"n_companies", c.n_companies},
         {"first_year", c.first_year},
         {"last_year", c.last_year},
         {"sectors", order},
         {"entrant_share", c.entrant_share},
         {"base_hazard", c.base_hazard},
         {"hazard_slope", c.hazard_slope},
         {"phi", c.phi},
         {"sigma", c.sigma},
         {"financial_noise", c.financial_noise},
         {"item_missing_prob", c.item_missing_prob},
         {"statement_gap_prob", c.statement_gap_prob},
         {"event_rate", c.event_rate},
         {"event_slope", c.event_slope},
         {"event_lead", c.event_lead}};
  if (c.covid) {
    j["covid"] = {{"start_year", c.covid->start_year},
                  {"hazard_multiplier", c.covid->hazard_multiplier},
                  {"delay_prob", c.covid->delay_prob}};
  } else {
    j["covid"] = nullptr;
  }
  return j;
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("synth: bad value for '") + key + "'");
  }
}

}  // namespace

SynthConfig synth_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth: config must be an object");
  static const std::vector<std::string> known{"n_companies",   "first_year",        "last_year",
                                              "sectors",       "entrant_share",     "base_hazard",
                                              "hazard_slope",  "phi",               "sigma",
                                              "financial_noise", "item_missing_prob", "statement_gap_prob",
                                              "event_rate",    "event_slope",       "event_lead",
                                              "covid"};
  for (const auto& [key, v] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("synth: unknown key '" + key + "'");
    }
  }
  SynthConfig c;
  read(j, "n_companies", c.n_companies);
  read(j, "first_year", c.first_year);
  read(j, "last_year", c.last_year);
  if (j.contains("sectors")) {
    c.sectors.clear();
    const auto& s = j["sectors"];
    try {
      if (s.is_object()) {
        for (const auto& [name, w] : s.items()) c.sectors.emplace_back(name, w.get<double>());
      } else {
        for (const auto& pair : s) c.sectors.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<double>());
      }
    } catch (const json::exception&) {
      throw ConfigError("synth: sectors must be [[name, weight], ...] or {name: weight}");
    }
  }
  read(j, "entrant_share", c.entrant_share);
  read(j, "base_hazard", c.base_hazard);
  read(j, "hazard_slope", c.hazard_slope);
  read(j, "phi", c.phi);
  read(j, "sigma", c.sigma);
  read(j, "financial_noise", c.financial_noise);
  read(j, "item_missing_prob", c.item_missing_prob);
  read(j, "statement_gap_prob", c.statement_gap_prob);
  read(j, "event_rate", c.event_rate);
  read(j, "event_slope", c.event_slope);
  read(j, "event_lead", c.event_lead);
  if (j.contains("covid")) {
    const auto& cj = j["covid"];
    if (cj.is_null()) {
      c.covid.reset();
    } else if (cj.is_object()) {
      CovidRegime r;
      for (const auto& [key, v] : cj.items()) {
        if (key != "start_year" && key != "hazard_multiplier" && key != "delay_prob") {
          throw ConfigError("synth: unknown key 'covid." + key + "'");
        }
      }
      read(cj, "start_year", r.start_year);
      read(cj, "hazard_multiplier", r.hazard_multiplier);
      read(cj, "delay_prob", r.delay_prob);
      c.covid = r;
    } else {
      throw ConfigError("synth: covid must be an object or null");
    }
  }
  c.validate();
  return c;
}

namespace {

// Filing types whose intensity climbs steeply with distress; the rest are routine.
bool is_distress_type(std::string_view token) {
  static const std::vector<std::string_view> distress{
      "administrator_manager_change",     "daily_management_delegate_change", "auditor_change",
      "social_capital_change",            "registered_office_change",         "legal_form_change",
      "managing_director_committee_change", "merger_demerger",                "transfer_of_business_assets",
      "transfer_of_business_sectors",     "authorized_signatory_change",      "commitment_power_change"};
  return std::find(distress.begin(), distress.end(), token) != distress.end();
}

struct TypeProfile {
  double weight;
  double slope_factor;
};

const std::array<TypeProfile, kEventTypeCount>& type_profiles() {
  static const auto profiles = [] {
    std::array<TypeProfile, kEventTypeCount> p{};
    std::size_t distress = 0;
    for (std::size_t k = 0; k < kEventTypeCount; ++k) distress += is_distress_type(event_catalog()[k]) ? 1 : 0;
    const std::size_t routine = kEventTypeCount - distress;
    for (std::size_t k = 0; k < kEventTypeCount; ++k) {
      if (is_distress_type(event_catalog()[k])) {
        p[k] = {0.45 / static_cast<double>(distress), 1.0};
      } else {
        p[k] = {0.55 / static_cast<double>(routine), 0.2};
      }
    }
    return p;
  }();
  return profiles;
}

Date random_date(Rng& rng, int year, int first_month = 1, int last_month = 12) {
  int days = 0;
  for (int m = first_month; m <= last_month; ++m) days += days_in_month(year, m);
  auto d = static_cast<int>(rng.below(static_cast<std::uint64_t>(days)));
  int m = first_month;
  while (d >= days_in_month(year, m)) {
    d -= days_in_month(year, m);
    ++m;
  }
  return {year, m, d + 1};
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct CompanyDraw {
  CompanyRecord record;
  std::vector<BalanceSheetSnapshot> snapshots;
  std::vector<FilingEvent> events;
  CompanyTruth truth;
};

CompanyDraw simulate_company(const SynthConfig& cfg, std::uint64_t seed, const std::string& id, double sector_total) {
  Rng rng(seed);
  CompanyDraw out;
  out.record.company_id = id;
  {
    double u = rng.uniform() * sector_total;
    out.record.sector = cfg.sectors.back().first;
    for (const auto& [name, w] : cfg.sectors) {
      if (u < w) {
        out.record.sector = name;
        break;
      }
      u -= w;
    }
  }
  const bool entrant = rng.bernoulli(cfg.entrant_share);
  int start = cfg.first_year;
  double h;
  const double stationary_sd = cfg.sigma / std::sqrt(1.0 - cfg.phi * cfg.phi);
  if (entrant) {
    start = cfg.first_year + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.last_year - cfg.first_year - 1)));
    out.record.incorporated_year = start;
    h = -0.3 + stationary_sd * rng.normal();
  } else {
    out.record.incorporated_year = cfg.first_year - 1 - static_cast<int>(rng.below(40));
    h = stationary_sd * rng.normal();
  }
  const double size = std::exp(12.0 + 1.5 * rng.normal());
  const double logit_base = std::log(cfg.base_hazard / (1.0 - cfg.base_hazard));
  const double nz = cfg.financial_noise;
  const auto& profiles = type_profiles();
  out.truth.company_id = id;
  out.truth.first_year = start;

  // Health path, one year past the horizon so filings can look ahead.
  std::vector<double> path{h};
  for (int y = start + 1; y <= cfg.last_year + 1; ++y) path.push_back(cfg.phi * path.back() + cfg.sigma * rng.normal());

  std::vector<FilingEvent> pending;
  for (int y = start; y <= cfg.last_year; ++y) {
    const auto t = static_cast<std::size_t>(y - start);
    h = path[t];
    const double h_event = (1.0 - cfg.event_lead) * h + cfg.event_lead * path[t + 1];
    const bool regime = cfg.covid && y >= cfg.covid->start_year;
    // No bankruptcy in the first simulated year, so every company files at least once.
    double hazard = 0.0;
    if (y > start) {
      hazard = logistic(logit_base - cfg.hazard_slope * h);
      if (regime) hazard *= cfg.covid->hazard_multiplier;
    }
    const bool bankrupt = y > start && rng.uniform() < hazard;

    double intensity = 0.0;
    for (std::size_t k = 0; k < kEventTypeCount; ++k) {
      const double lambda = cfg.event_rate * profiles[k].weight * std::exp(-cfg.event_slope * profiles[k].slope_factor * h_event);
      intensity += lambda;
      const auto count = rng.poisson(lambda);
      for (std::uint32_t e = 0; e < count; ++e) {
        Date d = random_date(rng, y);
        if (regime && rng.bernoulli(cfg.covid->delay_prob)) d = random_date(rng, y + 1, 1, 6);
        pending.push_back({id, d, static_cast<EventType>(k)});
      }
    }
    out.truth.health.push_back(h);
    out.truth.hazard.push_back(hazard);
    out.truth.event_intensity.push_back(intensity);

    if (bankrupt) {
      out.record.bankrupt_date = random_date(rng, y);
      break;
    }
    if (y > start && rng.bernoulli(cfg.statement_gap_prob)) continue;

    BalanceSheetSnapshot s;
    s.company_id = id;
    s.fiscal_year = y;
    const double ta = size * std::exp(0.03 * (y - start) + 0.1 * h + 0.05 * rng.normal());
    const double er = std::clamp(0.30 + 0.12 * h + 0.12 * nz * rng.normal(), -0.5, 0.9);
    const double eq = ta * er;
    const double tl = ta - eq;
    const double cls = std::clamp(0.55 - 0.06 * h + 0.10 * nz * rng.normal(), 0.1, 0.95);
    const double cl = tl * cls;
    const double ca = ta * std::clamp(0.45 + 0.05 * h + 0.10 * nz * rng.normal(), 0.05, 0.95);
    const double qa = ca * std::clamp(0.65 + 0.05 * h + 0.10 * nz * rng.normal(), 0.1, 1.0);
    const double cash = qa * std::clamp(0.35 + 0.07 * h + 0.10 * nz * rng.normal(), 0.01, 1.0);
    const double ms = cash * std::clamp(0.2 + 0.1 * rng.normal(), 0.0, 1.0);
    const std::array<double, kLineItemCount> items{ta, ca, qa, cash, ms, ta - ca, tl, cl, tl - cl, eq};
    for (std::size_t k = 0; k < kLineItemCount; ++k) {
      if (rng.bernoulli(cfg.item_missing_prob)) continue;
      s.items[k] = std::round(items[k]);
    }
    out.snapshots.push_back(std::move(s));
  }
  for (auto& e : pending) {
    if (e.event_date.year > cfg.last_year) continue;
    if (out.record.bankrupt_date && e.event_date > *out.record.bankrupt_date) continue;
    out.events.push_back(std::move(e));
  }
  return out;
}

}  // namespace

SynthResult generate_registry(const SynthConfig& cfg, std::uint64_t seed, int threads) {
  cfg.validate();
  double sector_total = 0.0;
  for (const auto& [name, w] : cfg.sectors) sector_total += w;
  const int width = std::max(6, static_cast<int>(std::to_string(cfg.n_companies).size()));
  std::vector<CompanyDraw> draws(cfg.n_companies);
  parallel_for(cfg.n_companies, threads, [&](std::size_t i) {
    char id[32];
    std::snprintf(id, sizeof id, "C%0*zu", width, i + 1);
    draws[i] = simulate_company(cfg, derive_seed(seed, static_cast<std::uint64_t>(i)), id, sector_total);
  });
  std::vector<CompanyRecord> companies;
  std::vector<BalanceSheetSnapshot> snapshots;
  std::vector<FilingEvent> events;
  SynthResult result;
  for (auto& d : draws) {
    companies.push_back(std::move(d.record));
    for (auto& s : d.snapshots) snapshots.push_back(std::move(s));
    for (auto& e : d.events) events.push_back(std::move(e));
    result.truth.companies.push_back(std::move(d.truth));
  }
  result.registry = Registry(std::move(companies), std::move(snapshots), std::move(events), cfg.last_year);
  return result;
}

std::vector<YearRate> annual_bankruptcy_rates(const Registry& registry) {
  std::map<int, YearRate> by_year;
  const auto& companies = registry.companies();
  for (std::size_t ci = 0; ci < companies.size(); ++ci) {
    const auto snaps = registry.snapshots_of(ci);
    if (snaps.empty()) continue;
    const int first = snaps.front().fiscal_year;
    const auto& bd = companies[ci].bankrupt_date;
    const int last = bd ? bd->year : registry.horizon_year();
    for (int y = first + 1; y <= last; ++y) {
      auto& r = by_year[y];
      r.year = y;
      ++r.at_risk;
      if (bd && bd->year == y) ++r.bankrupt;
    }
  }
  std::vector<YearRate> out;
  for (const auto& [y, r] : by_year) out.push_back(r);
  return out;
}

}  // namespace brp
