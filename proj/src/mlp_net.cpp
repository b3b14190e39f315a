#include "brp/mlp_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "brp/rng.hpp"

namespace brp {

std::size_t MlpShape::param_count() const noexcept {
  std::size_t n = 0;
  if (has_projection()) n += embed_width * rb_inputs + embed_width;
  n += hidden1 * concat_width() + hidden1;
  n += hidden2 * hidden1 + hidden2;
  n += hidden2 + 1;
  return n;
}

MlpNet::MlpNet(MlpShape shape) : shape_(shape) {
  if (shape_.hidden1 == 0 || shape_.hidden2 == 0) throw std::invalid_argument("mlp: hidden layers must be non-empty");
  std::size_t o = 0;
  off_.P = o;
  if (shape_.has_projection()) o += shape_.embed_width * shape_.rb_inputs;
  off_.bp = o;
  if (shape_.has_projection()) o += shape_.embed_width;
  off_.W1 = o;
  o += shape_.hidden1 * shape_.concat_width();
  off_.b1 = o;
  o += shape_.hidden1;
  off_.W2 = o;
  o += shape_.hidden2 * shape_.hidden1;
  off_.b2 = o;
  o += shape_.hidden2;
  off_.w3 = o;
  o += shape_.hidden2;
  off_.b3 = o;
}

std::vector<double> MlpNet::initial_params(std::uint64_t seed) const {
  std::vector<double> p(shape_.param_count(), 0.0);
  Rng rng(derive_seed(seed, "mlp-init"));
  auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (std::size_t i = 0; i < count; ++i) p[offset + i] = rng.uniform(-limit, limit);
  };
  if (shape_.has_projection()) fill(off_.P, shape_.embed_width * shape_.rb_inputs, shape_.rb_inputs);
  fill(off_.W1, shape_.hidden1 * shape_.concat_width(), shape_.concat_width());
  fill(off_.W2, shape_.hidden2 * shape_.hidden1, shape_.hidden1);
  fill(off_.w3, shape_.hidden2, shape_.hidden2);
  return p;
}

namespace {

struct Activations {
  std::vector<double> u;   // concat input
  std::vector<double> a1;  // post-ReLU
  std::vector<double> a2;
};

}  // namespace

void MlpNet::logits(std::span<const double> params, std::span<const double> x, std::size_t n,
                    std::span<double> out) const {
  const auto& s = shape_;
  const std::size_t in_w = s.input_width(), cw = s.concat_width();
  if (params.size() != s.param_count() || x.size() != n * in_w || out.size() != n) {
    throw std::invalid_argument("mlp: dimension mismatch");
  }
  std::vector<double> u(cw), a1(s.hidden1), a2(s.hidden2);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * in_w;
    std::copy(xi, xi + s.other_inputs, u.begin());
    if (s.has_projection()) {
      const double* xr = xi + s.other_inputs;
      for (std::size_t e = 0; e < s.embed_width; ++e) {
        double z = params[off_.bp + e];
        const double* row = &params[off_.P + e * s.rb_inputs];
        for (std::size_t k = 0; k < s.rb_inputs; ++k) z += row[k] * xr[k];
        u[s.other_inputs + e] = z;
      }
    }
    for (std::size_t h = 0; h < s.hidden1; ++h) {
      double z = params[off_.b1 + h];
      const double* row = &params[off_.W1 + h * cw];
      for (std::size_t k = 0; k < cw; ++k) z += row[k] * u[k];
      a1[h] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t h = 0; h < s.hidden2; ++h) {
      double z = params[off_.b2 + h];
      const double* row = &params[off_.W2 + h * s.hidden1];
      for (std::size_t k = 0; k < s.hidden1; ++k) z += row[k] * a1[k];
      a2[h] = z > 0.0 ? z : 0.0;
    }
    double z = params[off_.b3];
    for (std::size_t k = 0; k < s.hidden2; ++k) z += params[off_.w3 + k] * a2[k];
    out[i] = z;
  }
}

namespace {
double bce_with_logit(double z, std::uint8_t y) {
  // max(z, 0) - z y + log(1 + exp(-|z|))
  return std::max(z, 0.0) - z * (y ? 1.0 : 0.0) + std::log1p(std::exp(-std::fabs(z)));
}
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

double MlpNet::loss(std::span<const double> params, std::span<const double> x, std::span<const std::uint8_t> y) const {
  std::vector<double> z(y.size());
  logits(params, x, y.size(), z);
  double l = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) l += bce_with_logit(z[i], y[i]);
  return y.empty() ? 0.0 : l / static_cast<double>(y.size());
}

double MlpNet::loss_and_gradient(std::span<const double> params, std::span<const double> x,
                                 std::span<const std::uint8_t> y, std::span<double> grad) const {
  const auto& s = shape_;
  const std::size_t n = y.size(), in_w = s.input_width(), cw = s.concat_width();
  if (params.size() != s.param_count() || grad.size() != params.size() || x.size() != n * in_w) {
    throw std::invalid_argument("mlp: dimension mismatch");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> u(cw), a1(s.hidden1), a2(s.hidden2), d1(s.hidden1), d2(s.hidden2), du(cw);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * in_w;
    const double* xr = xi + s.other_inputs;
    std::copy(xi, xi + s.other_inputs, u.begin());
    if (s.has_projection()) {
      for (std::size_t e = 0; e < s.embed_width; ++e) {
        double z = params[off_.bp + e];
        const double* row = &params[off_.P + e * s.rb_inputs];
        for (std::size_t k = 0; k < s.rb_inputs; ++k) z += row[k] * xr[k];
        u[s.other_inputs + e] = z;
      }
    }
    for (std::size_t h = 0; h < s.hidden1; ++h) {
      double z = params[off_.b1 + h];
      const double* row = &params[off_.W1 + h * cw];
      for (std::size_t k = 0; k < cw; ++k) z += row[k] * u[k];
      a1[h] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t h = 0; h < s.hidden2; ++h) {
      double z = params[off_.b2 + h];
      const double* row = &params[off_.W2 + h * s.hidden1];
      for (std::size_t k = 0; k < s.hidden1; ++k) z += row[k] * a1[k];
      a2[h] = z > 0.0 ? z : 0.0;
    }
    double logit = params[off_.b3];
    for (std::size_t k = 0; k < s.hidden2; ++k) logit += params[off_.w3 + k] * a2[k];
    total += bce_with_logit(logit, y[i]);

    const double dz = (sigmoid(logit) - (y[i] ? 1.0 : 0.0)) * inv_n;
    grad[off_.b3] += dz;
    for (std::size_t k = 0; k < s.hidden2; ++k) {
      grad[off_.w3 + k] += dz * a2[k];
      d2[k] = a2[k] > 0.0 ? dz * params[off_.w3 + k] : 0.0;
    }
    std::fill(d1.begin(), d1.end(), 0.0);
    for (std::size_t h = 0; h < s.hidden2; ++h) {
      if (d2[h] == 0.0) continue;
      grad[off_.b2 + h] += d2[h];
      double* grow = &grad[off_.W2 + h * s.hidden1];
      const double* prow = &params[off_.W2 + h * s.hidden1];
      for (std::size_t k = 0; k < s.hidden1; ++k) {
        grow[k] += d2[h] * a1[k];
        d1[k] += d2[h] * prow[k];
      }
    }
    std::fill(du.begin(), du.end(), 0.0);
    for (std::size_t h = 0; h < s.hidden1; ++h) {
      if (a1[h] <= 0.0 || d1[h] == 0.0) continue;
      grad[off_.b1 + h] += d1[h];
      double* grow = &grad[off_.W1 + h * cw];
      const double* prow = &params[off_.W1 + h * cw];
      for (std::size_t k = 0; k < cw; ++k) {
        grow[k] += d1[h] * u[k];
        du[k] += d1[h] * prow[k];
      }
    }
    if (s.has_projection()) {
      for (std::size_t e = 0; e < s.embed_width; ++e) {
        const double de = du[s.other_inputs + e];
        if (de == 0.0) continue;
        grad[off_.bp + e] += de;
        double* grow = &grad[off_.P + e * s.rb_inputs];
        for (std::size_t k = 0; k < s.rb_inputs; ++k) grow[k] += de * xr[k];
      }
    }
  }
  return total * inv_n;
}

}  // namespace brp
