#include <algorithm>
#include <cmath>
#include <numeric>

#include "brp/error.hpp"
#include "brp/mlp_net.hpp"
#include "brp/models.hpp"
#include "brp/rng.hpp"
#include "model_internal.hpp"

namespace brp {

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }

}  // namespace

TrainedModel fit_logistic(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg) {
  if (cfg.family != ModelFamily::logistic) throw ConfigError("fit_logistic called with a non-logistic config");
  cfg.validate();
  detail::check_training_data(X, y);
  TrainedModel model;
  model.family = cfg.family;
  model.config = cfg;
  model.schema = detail::fit_schema(X);
  model.metadata = detail::base_metadata(X, y, cfg);

  const std::size_t n = X.rows(), p = X.cols();
  std::vector<std::size_t> cols(p);
  std::iota(cols.begin(), cols.end(), 0);
  const auto Z = detail::standardized_rows(model.schema, X, cols);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double l2 = cfg.logistic.l2 * inv_n;  // penalty l2/(2n) |w|^2

  std::vector<double> w(p, 0.0);
  const double rate = static_cast<double>(model.metadata.positives) * inv_n;
  double b = std::log(rate / (1.0 - rate));
  std::vector<double> z(n, b), zd(n);

  auto objective = [&](const std::vector<double>& zz, const std::vector<double>& ww) {
    double l = 0.0;
    for (std::size_t i = 0; i < n; ++i) l += softplus(zz[i]) - (y[i] ? zz[i] : 0.0);
    double reg = 0.0;
    for (double v : ww) reg += v * v;
    return l * inv_n + 0.5 * l2 * reg;
  };

  // Gradient over (w, b); the intercept is the last entry.
  auto gradient = [&](std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = detail::sigmoid(z[i]) - (y[i] ? 1.0 : 0.0);
      gb += r;
      const double* zi = Z.data() + i * p;
      for (std::size_t j = 0; j < p; ++j) out[j] += r * zi[j];
    }
    for (std::size_t j = 0; j < p; ++j) out[j] = out[j] * inv_n + l2 * w[j];
    out[p] = gb * inv_n;
  };
  auto dot = [](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
    return s;
  };

  // L-BFGS two-loop recursion with Armijo backtracking; every accepted step
  // strictly lowers the objective.
  constexpr std::size_t kMemory = 10;
  std::vector<std::vector<double>> S, Yd;
  std::vector<double> rho;
  std::vector<double> gvec(p + 1), gnew(p + 1), dir(p + 1), alpha(kMemory);
  double loss = objective(z, w);
  model.metadata.loss_history.push_back(loss);
  gradient(gvec);
  std::size_t iter = 0;
  std::vector<double> z_try(n), w_try(p);
  for (; iter < static_cast<std::size_t>(cfg.logistic.max_iter); ++iter) {
    double gmax = 0.0;
    for (double v : gvec) gmax = std::max(gmax, std::fabs(v));
    if (!std::isfinite(gmax)) throw NumericError("logistic regression diverged");
    if (gmax < cfg.logistic.tol) break;

    for (std::size_t k = 0; k <= p; ++k) dir[k] = -gvec[k];
    const std::size_t m = S.size();
    for (std::size_t k = m; k-- > 0;) {
      alpha[k] = rho[k] * dot(S[k], dir);
      for (std::size_t j = 0; j <= p; ++j) dir[j] -= alpha[k] * Yd[k][j];
    }
    if (m > 0) {
      const double gamma = dot(S[m - 1], Yd[m - 1]) / dot(Yd[m - 1], Yd[m - 1]);
      for (auto& v : dir) v *= gamma;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho[k] * dot(Yd[k], dir);
      for (std::size_t j = 0; j <= p; ++j) dir[j] += (alpha[k] - beta) * S[k][j];
    }
    double slope = dot(gvec, dir);
    if (!(slope < 0.0)) {
      for (std::size_t k = 0; k <= p; ++k) dir[k] = -gvec[k];
      slope = dot(gvec, dir);
      S.clear();
      Yd.clear();
      rho.clear();
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double* zi = Z.data() + i * p;
      double s = dir[p];
      for (std::size_t j = 0; j < p; ++j) s += dir[j] * zi[j];
      zd[i] = s;
    }
    bool accepted = false;
    double trial = 0.0;
    double step = m == 0 ? std::min(1.0, 1.0 / gmax) : 1.0;
    while (step > 1e-20) {
      for (std::size_t i = 0; i < n; ++i) z_try[i] = z[i] + step * zd[i];
      for (std::size_t j = 0; j < p; ++j) w_try[j] = w[j] + step * dir[j];
      trial = objective(z_try, w_try);
      if (trial <= loss + 1e-4 * step * slope && trial < loss) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable decrease left
    z.swap(z_try);
    w.swap(w_try);
    b += step * dir[p];
    loss = trial;
    model.metadata.loss_history.push_back(loss);

    gradient(gnew);
    std::vector<double> sk(p + 1), yk(p + 1);
    for (std::size_t k = 0; k <= p; ++k) {
      sk[k] = step * dir[k];
      yk[k] = gnew[k] - gvec[k];
    }
    const double sy = dot(sk, yk);
    if (sy > 1e-12 * dot(yk, yk)) {
      if (S.size() == kMemory) {
        S.erase(S.begin());
        Yd.erase(Yd.begin());
        rho.erase(rho.begin());
      }
      S.push_back(std::move(sk));
      Yd.push_back(std::move(yk));
      rho.push_back(1.0 / sy);
    }
    gvec.swap(gnew);
  }
  model.metadata.iterations = iter;
  model.params = LinearModel{std::move(w), b};
  return model;
}

TrainedModel fit_mlp(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg) {
  if (cfg.family != ModelFamily::mlp) throw ConfigError("fit_mlp called with a non-mlp config");
  cfg.validate();
  detail::check_training_data(X, y);
  TrainedModel model;
  model.family = cfg.family;
  model.config = cfg;
  model.schema = detail::fit_schema(X);
  model.metadata = detail::base_metadata(X, y, cfg);

  const std::size_t n = X.rows(), p = X.cols();
  std::vector<std::size_t> cols(p);
  std::iota(cols.begin(), cols.end(), 0);
  const auto Z = detail::standardized_rows(model.schema, X, cols);

  MlpModel mm;
  mm.embed_width = static_cast<std::size_t>(cfg.mlp.embed_width);
  mm.hidden1 = static_cast<std::size_t>(cfg.mlp.hidden1);
  mm.hidden2 = static_cast<std::size_t>(cfg.mlp.hidden2);
  for (std::size_t j = 0; j < p; ++j) {
    (model.schema.columns[j].family == Family::RB ? mm.rb_columns : mm.other_columns).push_back(j);
  }
  const MlpShape shape{mm.other_columns.size(), mm.rb_columns.size(), mm.embed_width, mm.hidden1, mm.hidden2};
  const MlpNet net(shape);
  const std::size_t w = shape.input_width();
  std::vector<double> x(n * w);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t k = 0;
    for (auto j : mm.other_columns) x[r * w + k++] = Z[r * p + j];
    for (auto j : mm.rb_columns) x[r * w + k++] = Z[r * p + j];
  }

  auto params = net.initial_params(cfg.seed);
  const std::size_t np = params.size();
  std::vector<double> m(np, 0.0), v(np, 0.0), grad(np);
  const auto& hp = cfg.mlp;
  const auto batch = static_cast<std::size_t>(hp.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> xb;
  std::vector<std::uint8_t> yb;
  double b1t = 1.0, b2t = 1.0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      xb.assign((end - start) * w, 0.0);
      yb.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(order[i] * w), w,
                    xb.begin() + static_cast<std::ptrdiff_t>((i - start) * w));
        yb[i - start] = y[order[i]];
      }
      const double l = net.loss_and_gradient(params, xb, yb, grad);
      epoch_loss += l * static_cast<double>(end - start);
      b1t *= hp.beta1;
      b2t *= hp.beta2;
      for (std::size_t k = 0; k < np; ++k) {
        m[k] = hp.beta1 * m[k] + (1.0 - hp.beta1) * grad[k];
        v[k] = hp.beta2 * v[k] + (1.0 - hp.beta2) * grad[k] * grad[k];
        const double mh = m[k] / (1.0 - b1t);
        const double vh = v[k] / (1.0 - b2t);
        params[k] -= hp.learning_rate * mh / (std::sqrt(vh) + hp.epsilon);
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw NumericError("mlp training diverged");
    model.metadata.loss_history.push_back(epoch_loss);
  }
  model.metadata.iterations = static_cast<std::size_t>(hp.epochs);
  mm.params = std::move(params);
  model.params = std::move(mm);
  return model;
}

}  // namespace brp
