#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brp/registry.hpp"
#include "json.hpp"

namespace brp {

struct CovidRegime {
  int start_year = 2020;
  double hazard_multiplier = 0.3;  // applied to bankruptcy hazard from start_year on
  double delay_prob = 0.5;         // chance a filing slips into the next calendar year
};

struct SynthConfig {
  std::size_t n_companies = 2000;
  int first_year = 2009;
  int last_year = 2022;  // also the registry horizon
  std::vector<std::pair<std::string, double>> sectors{
      {"manufacturing", 0.30}, {"retail", 0.20}, {"services", 0.30}, {"construction", 0.12}, {"finance", 0.08}};
  double entrant_share = 0.15;  // companies incorporated inside the year range

  // Annual bankruptcy probability logistic(logit(base_hazard) - hazard_slope * h).
  double base_hazard = 0.008;
  double hazard_slope = 1.6;

  // Health: h_t = phi * h_{t-1} + sigma * eps.
  double phi = 0.8;
  double sigma = 0.6;

  // Noise on the ratio drivers of the balance sheet.
  double financial_noise = 2.0;
  double item_missing_prob = 0.01;
  double statement_gap_prob = 0.01;

  // Expected filings per company-year at h = 0, and how fast they rise as h falls.
  double event_rate = 0.15;
  double event_slope = 1.8;
  // Filings in year t respond to (1 - event_lead) * h_t + event_lead * h_{t+1}:
  // management sees distress before it reaches the balance sheet.
  double event_lead = 1.0;

  std::optional<CovidRegime> covid = CovidRegime{};

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct CompanyTruth {
  std::string company_id;
  int first_year = 0;                  // first simulated year
  std::vector<double> health;          // per simulated year
  std::vector<double> hazard;          // bankruptcy probability per year (0 where not at risk)
  std::vector<double> event_intensity;  // expected filings per year, summed over types
};

struct GroundTruth {
  std::vector<CompanyTruth> companies;  // same order as the registry's companies
};

struct SynthResult {
  Registry registry;
  GroundTruth truth;
};

SynthResult generate_registry(const SynthConfig& cfg, std::uint64_t seed, int threads = 1);

// Bankruptcies in year y over companies alive and at risk on Jan 1 of y.
struct YearRate {
  int year = 0;
  std::size_t at_risk = 0;
  std::size_t bankrupt = 0;
};
std::vector<YearRate> annual_bankruptcy_rates(const Registry& registry);

}  // namespace brp
