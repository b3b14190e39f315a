#include <algorithm>
#include <cmath>
#include <numeric>

#include "brp/error.hpp"
#include "brp/models.hpp"
#include "brp/parallel.hpp"
#include "brp/rng.hpp"
#include "brp/trees.hpp"
#include "model_internal.hpp"

namespace brp {

namespace {

using trees::BinnedData;
using trees::SplitChoice;

TrainedModel start_model(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg) {
  cfg.validate();
  detail::check_training_data(X, y);
  TrainedModel model;
  model.family = cfg.family;
  model.config = cfg;
  model.schema = detail::fit_schema(X);
  model.metadata = detail::base_metadata(X, y, cfg);
  return model;
}

BinnedData bin_training(const FeatureMatrix& X, int max_bins) {
  std::vector<std::size_t> cols(X.cols());
  std::iota(cols.begin(), cols.end(), 0);
  return trees::bin_columns(detail::raw_columns(X, cols), max_bins);
}

// Rows whose code goes left under `s`.
bool goes_left(const BinnedData& d, const SplitChoice& s, std::uint32_t row) {
  const auto f = static_cast<std::size_t>(s.feature);
  const auto code = d.codes[f][row];
  if (code == d.bins[f].missing_code()) return s.missing_left;
  return code <= s.last_left_bin;
}

TreeNode split_node(const SplitChoice& s, std::int32_t left, std::int32_t right) {
  TreeNode n;
  n.feature = s.feature;
  n.threshold = s.threshold;
  n.missing_left = s.missing_left;
  n.left = left;
  n.right = right;
  return n;
}

// ---- random forest -----------------------------------------------------------

Tree grow_forest_tree(const BinnedData& d, std::span<const std::uint8_t> y, const ForestParams& fp,
                      std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = d.rows, p = d.cols();
  std::vector<double> weight(n, fp.bootstrap ? 0.0 : 1.0);
  if (fp.bootstrap) {
    for (std::size_t i = 0; i < n; ++i) weight[rng.below(n)] += 1.0;
  }
  std::vector<std::uint32_t> root;
  for (std::size_t i = 0; i < n; ++i) {
    if (weight[i] > 0.0) root.push_back(static_cast<std::uint32_t>(i));
  }
  const std::size_t mtry = std::min<std::size_t>(p, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p)))));
  std::vector<std::size_t> features(p);

  struct Pending {
    std::int32_t node;
    int depth;
    std::vector<std::uint32_t> rows;
  };
  Tree tree;
  tree.nodes.emplace_back();
  std::vector<Pending> stack;
  stack.push_back({0, 0, std::move(root)});
  std::vector<trees::ClassStats> hist;
  trees::ClassHistogram compact;
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    trees::ClassStats total;
    for (auto r : cur.rows) {
      total.n += weight[r];
      total.pos += y[r] ? weight[r] : 0.0;
    }
    tree.nodes[static_cast<std::size_t>(cur.node)].value = total.n > 0.0 ? total.pos / total.n : 0.0;
    if (cur.depth >= fp.max_depth || total.pos <= 0.0 || total.pos >= total.n || mtry == 0) continue;

    std::iota(features.begin(), features.end(), 0);
    for (std::size_t k = 0; k < mtry; ++k) {
      const auto j = k + rng.below(p - k);
      std::swap(features[k], features[j]);
    }
    std::vector<std::size_t> chosen(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(mtry));
    std::sort(chosen.begin(), chosen.end());

    SplitChoice best;
    for (auto f : chosen) {
      const auto& bins = d.bins[f];
      const auto& codes = d.codes[f];
      const auto missing = bins.missing_code();
      if (hist.size() < bins.size() + 1) hist.resize(bins.size() + 1);
      for (auto r : cur.rows) {
        const auto c = codes[r];
        auto& h = hist[c];
        if (h.n == 0.0 && c != missing) compact.codes.push_back(c);
        h.n += weight[r];
        h.pos += y[r] ? weight[r] : 0.0;
      }
      std::sort(compact.codes.begin(), compact.codes.end());
      for (auto c : compact.codes) {
        compact.stats.push_back(hist[c]);
        hist[c] = {};
      }
      compact.missing = hist[missing];
      hist[missing] = {};
      const auto s = trees::best_gini_split(compact, bins, fp.min_leaf, static_cast<int>(f));
      compact.codes.clear();
      compact.stats.clear();
      if (s.valid() && s.gain > best.gain) best = s;
    }
    if (!best.valid()) continue;

    std::vector<std::uint32_t> left, right;
    for (auto r : cur.rows) (goes_left(d, best, r) ? left : right).push_back(r);
    const auto li = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(cur.node)] = split_node(best, li, li + 1);
    // Right pushed first so the left subtree is grown first (stable node order).
    stack.push_back({li + 1, cur.depth + 1, std::move(right)});
    stack.push_back({li, cur.depth + 1, std::move(left)});
  }
  return tree;
}

}  // namespace

TrainedModel fit_random_forest(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg) {
  if (cfg.family != ModelFamily::random_forest) throw ConfigError("fit_random_forest called with a non-forest config");
  TrainedModel model = start_model(X, y, cfg);
  const auto data = bin_training(X, cfg.forest.max_bins);
  ForestModel fm;
  fm.trees.resize(static_cast<std::size_t>(cfg.forest.n_trees));
  parallel_for(fm.trees.size(), cfg.threads, [&](std::size_t t) {
    fm.trees[t] = grow_forest_tree(data, y, cfg.forest, derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
  });
  model.metadata.iterations = fm.trees.size();
  model.params = std::move(fm);
  return model;
}

// ---- gradient boosting -------------------------------------------------------

namespace {

struct GbdtLeaf {
  std::int32_t node;
  int depth;
  std::vector<std::uint32_t> rows;
  std::vector<trees::GradHistogram> hists;  // per feature; dropped once the leaf cannot split
  SplitChoice best;
};

std::vector<trees::GradHistogram> build_histograms(const BinnedData& d, const std::vector<std::uint32_t>& rows,
                                                   const std::vector<trees::GradStats>& gh, int threads) {
  std::vector<trees::GradHistogram> out(d.cols());
  parallel_for(d.cols(), threads, [&](std::size_t f) {
    // Scratch reused across calls; only touched entries are reset.
    thread_local std::vector<trees::GradStats> hist;
    const auto& bins = d.bins[f];
    if (hist.size() < bins.size() + 1) hist.resize(bins.size() + 1);
    const auto& codes = d.codes[f];
    const auto missing = bins.missing_code();
    auto& h = out[f];
    for (auto r : rows) {
      const auto c = codes[r];
      auto& s = hist[c];
      if (s.n == 0.0 && c != missing) h.codes.push_back(c);
      s += gh[r];
    }
    std::sort(h.codes.begin(), h.codes.end());
    h.stats.reserve(h.codes.size());
    for (auto c : h.codes) {
      h.stats.push_back(hist[c]);
      hist[c] = {};
    }
    h.missing = hist[missing];
    hist[missing] = {};
  });
  return out;
}

SplitChoice best_split_for(const BinnedData& d, const std::vector<trees::GradHistogram>& hists,
                           const trees::GbdtSplitLimits& limits, int threads) {
  std::vector<SplitChoice> per_feature(d.cols());
  parallel_for(d.cols(), threads, [&](std::size_t f) {
    per_feature[f] = trees::best_gbdt_split(hists[f], d.bins[f], limits, static_cast<int>(f));
  });
  SplitChoice best;
  for (const auto& s : per_feature) {
    if (s.valid() && s.gain > best.gain) best = s;
  }
  return best;
}

}  // namespace

TrainedModel fit_gbdt(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg) {
  if (cfg.family != ModelFamily::gbdt) throw ConfigError("fit_gbdt called with a non-gbdt config");
  TrainedModel model = start_model(X, y, cfg);
  const auto& gp = cfg.gbdt;
  const std::size_t n = X.rows();
  GbdtModel gm;
  gm.base_rate = static_cast<double>(model.metadata.positives) / static_cast<double>(n);
  gm.base_score = std::log(gm.base_rate / (1.0 - gm.base_rate));
  if (gp.rounds > 0) {
    const auto data = bin_training(X, gp.max_bins);
    const trees::GbdtSplitLimits limits{gp.lambda, static_cast<double>(gp.min_child_samples), gp.min_child_hessian};
    std::vector<double> raw(n, gm.base_score), g(n), h(n);
    std::vector<trees::GradStats> gh(n);
    std::vector<std::uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0u);
    for (int round = 0; round < gp.rounds; ++round) {
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double pr = detail::sigmoid(raw[i]);
        g[i] = pr - (y[i] ? 1.0 : 0.0);
        h[i] = std::max(pr * (1.0 - pr), 1e-16);
        gh[i] = {g[i], h[i], 1.0};
        loss += std::max(raw[i], 0.0) - (y[i] ? raw[i] : 0.0) + std::log1p(std::exp(-std::fabs(raw[i])));
      }
      model.metadata.loss_history.push_back(loss / static_cast<double>(n));

      Tree tree;
      tree.nodes.emplace_back();
      std::vector<GbdtLeaf> leaves;
      auto can_split = [&](int depth) { return gp.max_depth < 0 || depth < gp.max_depth; };
      // A leaf is searched only if it may split; its histograms are kept
      // while a split exists so children can reuse them.
      auto search = [&](GbdtLeaf& leaf) {
        leaf.best = best_split_for(data, leaf.hists, limits, cfg.threads);
        if (!leaf.best.valid()) leaf.hists.clear();
      };
      leaves.push_back({0, 0, all, {}, {}});
      if (can_split(0) && gp.max_leaves > 1) {
        leaves[0].hists = build_histograms(data, all, gh, cfg.threads);
        search(leaves[0]);
      }
      while (static_cast<int>(leaves.size()) < gp.max_leaves) {
        // Highest gain first; ties go to the leaf created earliest.
        std::size_t pick = leaves.size();
        for (std::size_t k = 0; k < leaves.size(); ++k) {
          if (!leaves[k].best.valid()) continue;
          if (pick == leaves.size() || leaves[k].best.gain > leaves[pick].best.gain ||
              (leaves[k].best.gain == leaves[pick].best.gain && leaves[k].node < leaves[pick].node)) {
            pick = k;
          }
        }
        if (pick == leaves.size()) break;
        GbdtLeaf parent = std::move(leaves[pick]);
        leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
        std::vector<std::uint32_t> left, right;
        for (auto r : parent.rows) (goes_left(data, parent.best, r) ? left : right).push_back(r);
        const auto li = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(parent.node)] = split_node(parent.best, li, li + 1);
        GbdtLeaf l{li, parent.depth + 1, std::move(left), {}, {}};
        GbdtLeaf r{li + 1, parent.depth + 1, std::move(right), {}, {}};
        if (can_split(l.depth)) {
          // Build the smaller child directly; the larger one is parent minus smaller.
          GbdtLeaf& small = l.rows.size() <= r.rows.size() ? l : r;
          GbdtLeaf& large = l.rows.size() <= r.rows.size() ? r : l;
          small.hists = build_histograms(data, small.rows, gh, cfg.threads);
          large.hists.resize(data.cols());
          for (std::size_t f = 0; f < data.cols(); ++f) large.hists[f] = trees::subtract(parent.hists[f], small.hists[f]);
          search(l);
          search(r);
        }
        leaves.push_back(std::move(l));
        leaves.push_back(std::move(r));
      }
      for (const auto& leaf : leaves) {
        double G = 0.0, H = 0.0;
        for (auto r : leaf.rows) {
          G += g[r];
          H += h[r];
        }
        const double value = -G / (H + gp.lambda) * gp.learning_rate;
        tree.nodes[static_cast<std::size_t>(leaf.node)].value = value;
        for (auto r : leaf.rows) raw[r] += value;
      }
      gm.trees.push_back(std::move(tree));
    }
  }
  model.metadata.iterations = static_cast<std::size_t>(gp.rounds);
  model.params = std::move(gm);
  return model;
}

}  // namespace brp
