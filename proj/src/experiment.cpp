#include "brp/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <set>

#include "brp/error.hpp"
#include "brp/parallel.hpp"
#include "brp/rng.hpp"

namespace brp {

using nlohmann::json;

std::string_view to_string(FeatureSet s) noexcept {
  switch (s) {
    case FeatureSet::FR: return "FR";
    case FeatureSet::AFE: return "AFE";
    case FeatureSet::FR_RB: return "FR+RB";
    case FeatureSet::AFE_RB: return "AFE+RB";
  }
  return "?";
}

std::string_view file_token(FeatureSet s) noexcept {
  switch (s) {
    case FeatureSet::FR: return "fr";
    case FeatureSet::AFE: return "afe";
    case FeatureSet::FR_RB: return "fr_rb";
    case FeatureSet::AFE_RB: return "afe_rb";
  }
  return "?";
}

std::optional<FeatureSet> parse_feature_set(std::string_view s) noexcept {
  for (auto f : all_feature_sets()) {
    if (to_string(f) == s || file_token(f) == s) return f;
  }
  return std::nullopt;
}

std::vector<Family> families_of(FeatureSet s) {
  switch (s) {
    case FeatureSet::FR: return {Family::FR};
    case FeatureSet::AFE: return {Family::AFE};
    case FeatureSet::FR_RB: return {Family::FR, Family::RB};
    case FeatureSet::AFE_RB: return {Family::AFE, Family::RB};
  }
  return {};
}

const std::vector<FeatureSet>& all_feature_sets() {
  static const std::vector<FeatureSet> v{FeatureSet::FR, FeatureSet::AFE, FeatureSet::FR_RB, FeatureSet::AFE_RB};
  return v;
}

std::string_view to_string(EvalSplit s) noexcept {
  switch (s) {
    case EvalSplit::test: return "test";
    case EvalSplit::pre_covid: return "pre_covid";
    case EvalSplit::post_covid: return "post_covid";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (families.empty()) throw ConfigError("experiment: no model families");
  if (feature_sets.empty()) throw ConfigError("experiment: no feature sets");
  if (!(undersample_rate >= 0.0 && undersample_rate < 1.0)) throw ConfigError("experiment: undersample rate must be in [0, 1)");
  if (cv_folds < 2) throw ConfigError("experiment: cv_folds must be >= 2");
  if (threads < 1) throw ConfigError("experiment: threads must be >= 1");
  if (!(selection.iv_threshold >= 0.0)) throw ConfigError("experiment: iv_threshold must be >= 0");
  if (!(selection.missing_threshold > 0.0 && selection.missing_threshold <= 1.0)) {
    throw ConfigError("experiment: missing_threshold must be in (0, 1]");
  }
  if (selection.n_bins < 2) throw ConfigError("experiment: n_bins must be >= 2");
  for (auto f : families) {
    base_for(f).validate();
    grid_for(f).cells(base_for(f));
  }
}

HyperGrid ExperimentConfig::grid_for(ModelFamily f) const {
  auto it = grids.find(f);
  return it == grids.end() ? HyperGrid::defaults(f) : it->second;
}

ModelConfig ExperimentConfig::base_for(ModelFamily f) const {
  auto it = base.find(f);
  ModelConfig c;
  if (it != base.end()) c = it->second;
  c.family = f;
  c.seed = derive_seed(seed, to_string(f));
  c.threads = 1;
  return c;
}

const AblationCell* AblationReport::find(ModelFamily f, FeatureSet s, int window) const {
  for (const auto& c : cells) {
    if (c.family == f && c.feature_set == s && c.window == window) return &c;
  }
  return nullptr;
}

namespace {

SplitEval evaluate_split(const TrainedModel& model, const FeatureMatrix& X) {
  SplitEval e;
  e.rows = X.rows();
  e.positives = X.positives();
  if (e.positives == 0 || e.positives == e.rows) return e;
  const auto scores = predict_proba(model, X);
  e.roc = roc_curve(scores, X.labels());
  e.auc = e.roc.area();
  return e;
}

bool is_subset(const std::vector<std::string>& small, const std::vector<std::string>& big) {
  const std::set<std::string> b(big.begin(), big.end());
  return std::all_of(small.begin(), small.end(), [&](const std::string& s) { return b.count(s) > 0; });
}

std::optional<FeatureSet> single_of(FeatureSet s) {
  if (s == FeatureSet::FR_RB) return FeatureSet::FR;
  if (s == FeatureSet::AFE_RB) return FeatureSet::AFE;
  return std::nullopt;
}

}  // namespace

AblationReport ablation_matrix(std::span<const SplitBundle> bundles, const ExperimentConfig& cfg) {
  cfg.validate();
  AblationReport report;
  for (const auto& bundle : bundles) {
    const int W = bundle.window_length;
    const auto names = bundle.train.column_names();
    for (const FeatureMatrix* m : {&bundle.test, &bundle.pre_covid, &bundle.post_covid}) {
      if (m->column_names() != names) throw DataError("ablation: splits of the " + std::to_string(W) + "y bundle disagree in columns");
    }
    if (bundle.train.positives() == 0 || bundle.train.positives() == bundle.train.rows()) {
      throw DataError("ablation: training split of the " + std::to_string(W) + "y bundle has a single class");
    }

    WindowSelection sel;
    sel.window = W;
    const auto stats = fit_sanitizer(bundle.train);
    const auto train = apply_sanitizer(bundle.train, stats, &sel.sanitize);
    const std::array<FeatureMatrix, 3> eval{apply_sanitizer(bundle.test, stats), apply_sanitizer(bundle.pre_covid, stats),
                                            apply_sanitizer(bundle.post_covid, stats)};
    sel.iv = select_features(train, cfg.selection);
    const auto chosen = sel.iv.selected_features();
    const std::set<std::string> chosen_set(chosen.begin(), chosen.end());

    std::map<FeatureSet, std::vector<std::string>> columns;
    for (auto fs : cfg.feature_sets) {
      const auto fams = families_of(fs);
      auto& cols = columns[fs];
      for (const auto& c : train.columns()) {
        if (chosen_set.count(c.name) && std::find(fams.begin(), fams.end(), c.family) != fams.end()) cols.push_back(c.name);
      }
    }
    for (auto fs : cfg.feature_sets) {
      const auto single = single_of(fs);
      if (single && columns.count(*single) && !is_subset(columns[*single], columns[fs])) {
        throw DataError("ablation: " + std::string(to_string(fs)) + " does not contain the columns of " +
                        std::string(to_string(*single)));
      }
    }

    UndersampleResult us{train, false, ""};
    if (cfg.undersample_rate > 0.0) us = undersample(train, cfg.undersample_rate, derive_seed(cfg.seed, static_cast<std::uint64_t>(W)));
    sel.undersample_notice = us.notice;
    const auto y = us.matrix.labels();
    report.selections.push_back(std::move(sel));

    struct Task {
      ModelFamily family;
      FeatureSet fs;
    };
    std::mutex cell_mutex;
    std::vector<Task> tasks;
    for (auto f : cfg.families) {
      for (auto fs : cfg.feature_sets) tasks.push_back({f, fs});
    }
    std::vector<AblationCell> cells(tasks.size());
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t t) {
      const auto& task = tasks[t];
      AblationCell& cell = cells[t];
      cell.family = task.family;
      cell.feature_set = task.fs;
      cell.window = W;
      cell.features = columns.at(task.fs);
      const auto X = us.matrix.select_columns(cell.features);
      cell.train_rows = X.rows();
      cell.train_positives = X.positives();
      ModelConfig best = cfg.base_for(task.family);
      if (cfg.grid_search) {
        const auto grid = grid_search_cv(cfg.grid_for(task.family), best, X, y, cfg.cv_folds,
                                         derive_seed(cfg.seed, "cv" + std::to_string(W)));
        best = grid.best;
        cell.cv_auc = grid.mean_auc[grid.best_index];
      }
      best.threads = 1;
      cell.chosen = best;
      cell.model = fit_model(X, y, best);
      for (auto s : kEvalSplits) {
        const auto& m = eval[static_cast<std::size_t>(s)];
        const auto Xs = m.select_columns(cell.features);
        if (Xs.keys() != m.keys()) throw DataError("ablation: sample keys changed under column selection");
        cell.splits[static_cast<std::size_t>(s)] = evaluate_split(cell.model, Xs);
      }
      if (cfg.on_cell) {
        const std::lock_guard lock(cell_mutex);
        cfg.on_cell(cell);
      }
    });
    for (auto& c : cells) report.cells.push_back(std::move(c));
  }

  for (const auto& cell : report.cells) {
    const auto single = single_of(cell.feature_set);
    if (!single) continue;
    const auto* base = report.find(cell.family, *single, cell.window);
    if (!base) continue;
    for (auto s : kEvalSplits) {
      const auto& h = cell.split(s).auc;
      const auto& b = base->split(s).auc;
      if (!h || !b) continue;
      HybridDelta d;
      d.family = cell.family;
      d.window = cell.window;
      d.hybrid = cell.feature_set;
      d.single = *single;
      d.split = s;
      d.absolute = *h - *b;
      d.relative_pct = *b > 0.0 ? 100.0 * d.absolute / *b : 0.0;
      report.deltas.push_back(d);
    }
  }
  return report;
}

DriftReport drift_report(const AblationReport& ablation) {
  DriftReport report;
  auto delta = [](const AblationCell& c, EvalSplit s) -> std::optional<double> {
    const auto& t = c.split(EvalSplit::test).auc;
    const auto& v = c.split(s).auc;
    if (!t || !v) return std::nullopt;
    return *v - *t;
  };
  for (const auto& cell : ablation.cells) {
    DriftRow row;
    row.family = cell.family;
    row.feature_set = cell.feature_set;
    row.window = cell.window;
    row.test = cell.split(EvalSplit::test).auc;
    row.pre_delta = delta(cell, EvalSplit::pre_covid);
    row.post_delta = delta(cell, EvalSplit::post_covid);
    const auto single = single_of(cell.feature_set);
    if (single && row.post_delta) {
      if (const auto* base = ablation.find(cell.family, *single, cell.window)) {
        const auto base_post = delta(*base, EvalSplit::post_covid);
        if (base_post) {
          row.hybrid_degrades_alone = *row.post_delta < 0.0 && *base_post >= 0.0;
          row.hybrid_drops_more = *row.post_delta < *base_post;
        }
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string format_auc(std::optional<double> auc) {
  if (!auc) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *auc);
  return buf;
}

void write_auc_matrix_csv(const AblationReport& report, std::ostream& out) {
  out << "family,feature_set,window,test,pre_covid,post_covid\n";
  for (const auto& c : report.cells) {
    out << to_string(c.family) << ',' << to_string(c.feature_set) << ',' << c.window;
    for (auto s : kEvalSplits) out << ',' << format_auc(c.split(s).auc);
    out << '\n';
  }
}

void write_drift_csv(const DriftReport& report, std::ostream& out) {
  out << "family,feature_set,window,test,pre_delta,post_delta,hybrid_degrades_alone,hybrid_drops_more\n";
  for (const auto& r : report.rows) {
    out << to_string(r.family) << ',' << to_string(r.feature_set) << ',' << r.window << ',' << format_auc(r.test) << ','
        << format_auc(r.pre_delta) << ',' << format_auc(r.post_delta) << ',' << (r.hybrid_degrades_alone ? 1 : 0) << ','
        << (r.hybrid_drops_more ? 1 : 0) << '\n';
  }
}

namespace {
json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
}  // namespace

json ablation_to_json(const AblationReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json splits = json::object();
    for (auto s : kEvalSplits) {
      const auto& e = c.split(s);
      splits[std::string(to_string(s))] = {{"rows", e.rows}, {"positives", e.positives}, {"auc", opt(e.auc)}};
    }
    cells.push_back({{"family", to_string(c.family)},
                     {"feature_set", to_string(c.feature_set)},
                     {"window", c.window},
                     {"n_features", c.features.size()},
                     {"features", c.features},
                     {"train_rows", c.train_rows},
                     {"train_positives", c.train_positives},
                     {"model_config", to_json(c.chosen)},
                     {"cv_auc", opt(c.cv_auc)},
                     {"splits", splits}});
  }
  json deltas = json::array();
  for (const auto& d : report.deltas) {
    deltas.push_back({{"family", to_string(d.family)},
                      {"window", d.window},
                      {"hybrid", to_string(d.hybrid)},
                      {"single", to_string(d.single)},
                      {"split", to_string(d.split)},
                      {"absolute", d.absolute},
                      {"relative_pct", d.relative_pct}});
  }
  json selections = json::array();
  for (const auto& s : report.selections) {
    selections.push_back({{"window", s.window},
                          {"selected", s.iv.selected_features().size()},
                          {"candidates", s.iv.entries.size()},
                          {"undersample", s.undersample_notice}});
  }
  return {{"cells", cells}, {"deltas", deltas}, {"selection", selections}};
}

json drift_to_json(const DriftReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"family", to_string(r.family)},
                    {"feature_set", to_string(r.feature_set)},
                    {"window", r.window},
                    {"test", opt(r.test)},
                    {"pre_delta", opt(r.pre_delta)},
                    {"post_delta", opt(r.post_delta)},
                    {"hybrid_degrades_alone", r.hybrid_degrades_alone},
                    {"hybrid_drops_more", r.hybrid_drops_more}});
  }
  return {{"rows", rows}};
}

}  // namespace brp
