#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "brp/feature_matrix.hpp"
#include "brp/rng.hpp"
#include "test_util.hpp"

namespace testutil {

// One informative column (P(y=1) rises steeply with x) plus `noise` pure-noise
// columns. A few cells are left missing when `with_missing` is set.
inline brp::FeatureMatrix planted_monotone(std::size_t n, std::size_t noise, std::uint64_t seed,
                                           bool with_missing = false) {
  brp::Rng rng(seed);
  std::vector<std::string> names{"fr_signal"};
  for (std::size_t k = 0; k < noise; ++k) names.push_back("afe_noise" + std::to_string(k));
  std::vector<std::vector<double>> cols(names.size(), std::vector<double>(n));
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform();
    cols[0][i] = x;
    y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-30.0 * (x - 0.5))));
    for (std::size_t k = 1; k < names.size(); ++k) {
      cols[k][i] = (with_missing && rng.bernoulli(0.05)) ? NAN : rng.normal();
    }
  }
  return matrix(names, cols, y);
}

}  // namespace testutil
