#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "brp/mlp_net.hpp"
#include "brp/rng.hpp"

namespace testutil {

// Largest relative gap between the analytic gradient and central finite
// differences, on a random batch of `n` rows.
inline double mlp_gradient_error(std::uint64_t seed, std::size_t n = 10) {
  const brp::MlpShape shape{5, 7, 4, 8, 6};
  const brp::MlpNet net(shape);
  brp::Rng rng(seed);
  auto params = net.initial_params(seed);
  for (auto& p : params) p += 0.05 * rng.normal();  // non-zero biases too
  std::vector<double> x(n * shape.input_width());
  for (auto& v : x) v = rng.normal();
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 2 == 0 ? 1 : rng.bernoulli(0.3);

  std::vector<double> grad(params.size());
  net.loss_and_gradient(params, x, y, grad);
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double keep = params[k];
    params[k] = keep + h;
    const double up = net.loss(params, x, y);
    params[k] = keep - h;
    const double down = net.loss(params, x, y);
    params[k] = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::fabs(numeric), std::fabs(grad[k]), 1e-6});
    worst = std::max(worst, std::fabs(numeric - grad[k]) / scale);
  }
  return worst;
}

}  // namespace testutil
