#include <algorithm>
#include <numeric>

#include "brp/error.hpp"
#include "brp/metrics.hpp"
#include "brp/models.hpp"
#include "brp/parallel.hpp"
#include "brp/rng.hpp"

namespace brp {

std::vector<ModelConfig> HyperGrid::cells(const ModelConfig& base) const {
  ModelConfig start = base;
  start.family = family;
  std::vector<ModelConfig> out{start};
  for (const auto& [name, values] : axes) {
    if (values.empty()) throw ConfigError("grid axis '" + name + "' has no values");
    std::vector<ModelConfig> next;
    next.reserve(out.size() * values.size());
    for (const auto& cell : out) {
      for (double v : values) {
        ModelConfig c = cell;
        c.set(name, v);
        next.push_back(c);
      }
    }
    out = std::move(next);
  }
  for (const auto& c : out) c.validate();
  return out;
}

HyperGrid HyperGrid::defaults(ModelFamily family) {
  HyperGrid g;
  g.family = family;
  switch (family) {
    case ModelFamily::logistic:
      g.axes = {{"l2", {0.1, 1.0, 10.0}}};
      break;
    case ModelFamily::random_forest:
      g.axes = {{"n_trees", {100}}, {"max_depth", {8, 12}}, {"min_leaf", {5}}};
      break;
    case ModelFamily::gbdt:
      g.axes = {{"rounds", {100, 200}}, {"max_leaves", {15, 31}}, {"learning_rate", {0.05}}};
      break;
    case ModelFamily::mlp:
      g.axes = {{"learning_rate", {1e-5, 1e-3}}};
      break;
  }
  return g;
}

std::vector<int> stratified_folds(std::span<const std::uint8_t> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::vector<int> out(labels.size(), 0);
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if ((labels[i] != 0) == (cls != 0)) idx.push_back(i);
    }
    Rng rng(derive_seed(seed, cls == 0 ? "folds-negative" : "folds-positive"));
    rng.shuffle(idx.begin(), idx.end());
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }
  return out;
}

GridResult grid_search_cv(const HyperGrid& grid, const ModelConfig& base, const FeatureMatrix& X,
                          std::span<const std::uint8_t> y, int folds, std::uint64_t seed) {
  if (y.size() != X.rows()) throw DataError("label count does not match matrix rows");
  GridResult result;
  result.cells = grid.cells(base);
  const auto k = static_cast<std::size_t>(folds);
  const auto assignment = stratified_folds(y, folds, seed);
  std::size_t pos = 0;
  for (auto v : y) pos += v ? 1 : 0;
  const std::size_t neg = y.size() - pos;
  // Every validation fold needs both classes; every training part needs two of each.
  if (pos < k || neg < k || pos - (pos + k - 1) / k < 2 || neg - (neg + k - 1) / k < 2) {
    throw DataError("degenerate folds: " + std::to_string(pos) + " positives and " + std::to_string(neg) +
                    " negatives cannot fill " + std::to_string(folds) + " stratified folds");
  }
  std::vector<std::vector<std::size_t>> train_rows(k), valid_rows(k);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto f = static_cast<std::size_t>(assignment[i]);
    valid_rows[f].push_back(i);
    for (std::size_t o = 0; o < k; ++o) {
      if (o != f) train_rows[o].push_back(i);
    }
  }
  std::vector<FeatureMatrix> train_X(k), valid_X(k);
  std::vector<std::vector<std::uint8_t>> train_y(k), valid_y(k);
  for (std::size_t f = 0; f < k; ++f) {
    train_X[f] = X.select_rows(train_rows[f]);
    valid_X[f] = X.select_rows(valid_rows[f]);
    for (auto r : train_rows[f]) train_y[f].push_back(y[r]);
    for (auto r : valid_rows[f]) valid_y[f].push_back(y[r]);
  }

  const std::size_t cells = result.cells.size();
  std::vector<double> scores(cells * k);
  parallel_for(cells * k, base.threads, [&](std::size_t unit) {
    const std::size_t c = unit / k, f = unit % k;
    ModelConfig cfg = result.cells[c];
    cfg.threads = 1;
    const auto model = fit_model(train_X[f], train_y[f], cfg);
    scores[unit] = auc(predict_proba(model, valid_X[f]), valid_y[f]);
  });
  result.fold_auc.assign(cells, std::vector<double>(k));
  result.mean_auc.assign(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    double s = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      result.fold_auc[c][f] = scores[c * k + f];
      s += scores[c * k + f];
    }
    result.mean_auc[c] = s / static_cast<double>(k);
    if (c == 0 || result.mean_auc[c] > result.mean_auc[result.best_index]) result.best_index = c;
  }
  result.best = result.cells[result.best_index];
  result.best.threads = base.threads;
  return result;
}

}  // namespace brp
