#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "brp/feature_matrix.hpp"
#include "brp/registry.hpp"

namespace brp {

// ---- Financial ratios -------------------------------------------------------

inline constexpr std::size_t kFinancialRatioCount = 18;
const std::array<std::string, kFinancialRatioCount>& financial_ratio_names();

// Missing operand -> missing; x/0 -> signed infinity; 0/0 -> missing.
std::array<std::optional<double>, kFinancialRatioCount> financial_ratio_values(
    const BalanceSheetSnapshot& snapshot, const BalanceSheetSnapshot* prior);

FeatureVector financial_ratios(const BalanceSheetSnapshot& snapshot,
                               const std::optional<BalanceSheetSnapshot>& prior = std::nullopt);

// ---- Automatically engineered accounting features -------------------------

// The 10 balance-sheet items plus two derived operands.
inline constexpr std::size_t kOperandCount = 12;
const std::array<std::string, kOperandCount>& afe_operand_names();
std::optional<double> afe_operand(const BalanceSheetSnapshot& s, std::size_t operand);

struct AfeGrammar {
  std::vector<std::string> operands;  // empty = all 12
  bool identity = false;
  bool log1p = false;
  bool ratio = true;                  // a / b
  bool difference = false;            // a - b
  bool normalized_difference = true;  // (a - b) / |c|
  int lag_depth = 1;                  // year-over-year relative deltas (x_t - x_{t-k}) / |x_{t-k}|
  std::size_t max_features = 200;

  void validate() const;
};

enum class AfeOp : std::uint8_t { identity, log1p, lag_delta, ratio, difference, normalized_difference };

struct AfeRecipe {
  AfeOp op;
  std::uint8_t a = 0;
  std::uint8_t b = 0;
  std::uint8_t c = 0;
  std::uint8_t lag = 0;
};

// Expands a grammar into its ordered recipe list once; evaluation is then
// a pure function of a company's snapshot history.
class AfeGenerator {
 public:
  explicit AfeGenerator(const AfeGrammar& grammar);

  const std::vector<AfeRecipe>& recipes() const noexcept { return recipes_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return recipes_.size(); }

  // `history` is year-ordered; features describe its last snapshot.
  void evaluate(std::span<const BalanceSheetSnapshot> history, std::span<std::optional<double>> out) const;

 private:
  std::vector<AfeRecipe> recipes_;
  std::vector<std::string> names_;
};

FeatureVector afe_candidates(std::span<const BalanceSheetSnapshot> history, const AfeGrammar& grammar);

// ---- Reported restructuring behavior ----------------------------------------

enum class TrendKind : std::uint8_t {
  difference,  // final-year count minus mean of earlier years
  slope,       // least-squares slope of yearly counts
};
std::optional<TrendKind> parse_trend_kind(std::string_view s) noexcept;
std::string_view to_string(TrendKind k) noexcept;

const std::vector<std::string>& behavior_feature_names();

// Only events dated within [Jan 1 start_year, Dec 31 end_year] are counted.
void behavior_values(std::span<const FilingEvent> events, int start_year, int end_year, TrendKind trend,
                     std::span<std::optional<double>> out);

FeatureVector behavior_features(std::span<const FilingEvent> events, int start_year, int end_year,
                                TrendKind trend = TrendKind::difference);

// ---- Sanitizing ---------------------------------------------------------------

// Per-column finite bounds used to replace infinities.
struct SanitizeStats {
  std::vector<std::optional<double>> max_finite;
  std::vector<std::optional<double>> min_finite;
};

struct SanitizeReport {
  std::vector<double> missing_rate;
  std::vector<std::size_t> infinities_replaced;
};

SanitizeStats fit_sanitizer(const FeatureMatrix& m);
// +inf -> max finite, -inf -> min finite; columns without finite values in
// the fitted data become all-missing.
FeatureMatrix apply_sanitizer(const FeatureMatrix& m, const SanitizeStats& stats, SanitizeReport* report = nullptr);
FeatureMatrix sanitize_matrix(const FeatureMatrix& m, SanitizeReport* report = nullptr);

}  // namespace brp
