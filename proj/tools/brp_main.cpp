// brp: bankruptcy-prediction pipeline front end.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "brp/csv.hpp"
#include "brp/error.hpp"
#include "brp/experiment.hpp"
#include "brp/pipeline.hpp"
#include "brp/rng.hpp"
#include "brp/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

brp::FeatureMatrix read_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw brp::ConfigError("cannot read " + path.string());
  return brp::read_matrix_csv(in, path.string());
}

void write_matrix(const fs::path& path, const brp::FeatureMatrix& m) {
  std::ostringstream ss;
  brp::write_matrix_csv(m, ss);
  brp::write_text_file(path, ss.str());
}

// "2012-2021" or "2015"
std::vector<int> parse_year_range(const std::string& s) {
  const auto dash = s.find('-');
  try {
    if (dash == std::string::npos) return {std::stoi(s)};
    const int a = std::stoi(s.substr(0, dash)), b = std::stoi(s.substr(dash + 1));
    if (a > b) throw brp::ConfigError("empty year range " + s);
    std::vector<int> out;
    for (int y = a; y <= b; ++y) out.push_back(y);
    return out;
  } catch (const std::logic_error&) {
    throw brp::ConfigError("bad year range '" + s + "'");
  }
}

struct FeatureFlags {
  bool no_fr = false, no_afe = false, no_rb = false;
  std::string trend = "difference";

  void attach(CLI::App* cmd) {
    cmd->add_flag("--no-fr", no_fr, "Disable financial ratios");
    cmd->add_flag("--no-afe", no_afe, "Disable engineered accounting features");
    cmd->add_flag("--no-rb", no_rb, "Disable reported-behavior features");
    cmd->add_option("--trend", trend, "Behavior trend: difference or slope")->capture_default_str();
  }
  brp::FeatureConfig config() const {
    brp::FeatureConfig c;
    c.fr = !no_fr;
    c.afe = !no_afe;
    c.rb = !no_rb;
    const auto t = brp::parse_trend_kind(trend);
    if (!t) throw brp::ConfigError("--trend must be difference or slope");
    c.trend = *t;
    c.validate();
    return c;
  }
};

brp::Registry load_input(const fs::path& dir, int horizon) {
  return brp::load_registry(brp::RegistryPaths::in_directory(dir),
                            horizon > 0 ? std::optional<int>(horizon) : std::nullopt);
}

std::vector<brp::ModelFamily> parse_families(const std::vector<std::string>& names) {
  std::vector<brp::ModelFamily> out;
  for (const auto& n : names) {
    const auto f = brp::parse_model_family(n);
    if (!f) throw brp::ConfigError("unknown model family '" + n + "'");
    out.push_back(*f);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brp - corporate bankruptcy prediction from financial statements and filing behavior"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Print stage progress");
  std::string stage = "cli";

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic registry");
  fs::path synth_out, synth_cfg;
  std::uint64_t synth_seed = 42;
  std::size_t synth_n = 0;
  bool synth_no_covid = false;
  std::vector<std::string> synth_set;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--config", synth_cfg, "Synthetic registry config (JSON)");
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--n-companies", synth_n, "Number of companies");
  synth->add_flag("--no-covid", synth_no_covid, "Disable the Covid regime");
  synth->add_option("--set", synth_set, "Override a config value, key=value");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and filter a registry");
  fs::path ingest_in, ingest_out;
  std::vector<std::string> excluded{"finance"};
  bool keep_anomalous = false;
  int horizon = 0;
  ingest->add_option("--input", ingest_in, "Registry directory")->required();
  ingest->add_option("--out", ingest_out, "Output directory")->required();
  ingest->add_option("--exclude-sector", excluded, "Sectors to drop")->capture_default_str();
  ingest->add_flag("--keep-anomalous", keep_anomalous, "Keep companies flagged by validation");
  ingest->add_option("--horizon-year", horizon, "Last fully observed year (default: latest record)");

  // featurize
  auto* featurize = app.add_subcommand("featurize", "Build the sample x feature matrix for one window length");
  fs::path feat_in, feat_out;
  int feat_window = 1;
  std::string feat_years = "2012-2021";
  FeatureFlags feat_flags;
  featurize->add_option("--input", feat_in, "Registry directory")->required();
  featurize->add_option("--out", feat_out, "Matrix CSV")->required();
  featurize->add_option("--window", feat_window, "Window length in years (1-3)")->capture_default_str();
  featurize->add_option("--years", feat_years, "Reference years, e.g. 2012-2021")->capture_default_str();
  featurize->add_option("--horizon-year", horizon, "Last fully observed year");
  feat_flags.attach(featurize);

  // select
  auto* select = app.add_subcommand("select", "Rank features by information value");
  fs::path sel_matrix, sel_out, sel_selected;
  brp::SelectionParams sel_params;
  select->add_option("--matrix", sel_matrix, "Matrix CSV")->required();
  select->add_option("--out", sel_out, "IV report CSV")->required();
  select->add_option("--selected-out", sel_selected, "Write the matrix restricted to selected features");
  select->add_option("--n-bins", sel_params.n_bins, "Quantile bins")->capture_default_str();
  select->add_option("--iv-threshold", sel_params.iv_threshold, "Keep IV above this")->capture_default_str();
  select->add_option("--missing-threshold", sel_params.missing_threshold, "Keep missing rate below this")
      ->capture_default_str();

  // windows
  auto* windows = app.add_subcommand("windows", "Build train/test/pre-Covid/post-Covid splits");
  fs::path win_in, win_out;
  std::vector<int> win_lengths{1, 2, 3};
  double win_fraction = 0.7;
  std::uint64_t win_seed = 7;
  bool win_group = false;
  FeatureFlags win_flags;
  windows->add_option("--input", win_in, "Registry directory")->required();
  windows->add_option("--out", win_out, "Output directory")->required();
  windows->add_option("--window", win_lengths, "Window lengths")->capture_default_str();
  windows->add_option("--split-fraction", win_fraction, "Training share")->capture_default_str();
  windows->add_option("--split-seed", win_seed, "Split seed")->capture_default_str();
  windows->add_flag("--group-by-company", win_group, "Keep each company on one side of the split");
  windows->add_option("--horizon-year", horizon, "Last fully observed year");
  win_flags.attach(windows);

  // train
  auto* train = app.add_subcommand("train", "Fit one model on a training matrix");
  fs::path train_in, train_out;
  std::string train_family = "gbdt";
  std::uint64_t train_seed = 0;
  std::vector<std::string> train_params;
  bool train_grid = false;
  int train_folds = 5;
  double train_rate = 0.25;
  train->add_option("--train", train_in, "Training matrix CSV")->required();
  train->add_option("--out", train_out, "Model JSON")->required();
  train->add_option("--family", train_family, "logistic, random_forest, gbdt or mlp")->capture_default_str();
  train->add_option("--seed", train_seed, "Model seed")->capture_default_str();
  train->add_option("--param", train_params, "Hyperparameter, name=value");
  train->add_flag("--grid", train_grid, "Pick hyperparameters by cross-validated grid search");
  train->add_option("--folds", train_folds, "Cross-validation folds")->capture_default_str();
  train->add_option("--undersample", train_rate, "Target positive rate (0 = off)")->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a matrix and report AUC");
  fs::path eval_model, eval_matrix, eval_roc, eval_scores;
  evaluate->add_option("--model", eval_model, "Model JSON")->required();
  evaluate->add_option("--matrix", eval_matrix, "Matrix CSV")->required();
  evaluate->add_option("--roc", eval_roc, "Write ROC vertices (fpr,tpr,threshold)");
  evaluate->add_option("--scores", eval_scores, "Write per-row scores");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run the four-feature-set comparison on prepared splits");
  fs::path abl_in, abl_out;
  std::vector<std::string> abl_families{"logistic", "gbdt"};
  std::uint64_t abl_seed = 1;
  bool abl_no_grid = false;
  double abl_rate = 0.25;
  int threads = 1;
  ablate->add_option("--splits", abl_in, "Directory written by 'windows'")->required();
  ablate->add_option("--out", abl_out, "Report directory")->required();
  ablate->add_option("--families", abl_families, "Model families")->capture_default_str();
  ablate->add_option("--seed", abl_seed, "Experiment seed")->capture_default_str();
  ablate->add_flag("--no-grid", abl_no_grid, "Use default hyperparameters");
  ablate->add_option("--undersample", abl_rate, "Target positive rate (0 = off)")->capture_default_str();
  ablate->add_option("--threads", threads, "Worker threads")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run the whole pipeline from a config file");
  fs::path run_cfg;
  bool print_config = false;
  run->add_option("--config", run_cfg, "Pipeline config (JSON); a run manifest also works");
  run->add_flag("--print-config", print_config, "Print the resolved config and exit");
  run->allow_extras();
  run->footer("Any config value can be overridden with --<dotted.key>=<value>, e.g. --synth.n_companies=500");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  brp::StageLog log(std::cerr, verbose);

  try {
    if (*synth) {
      stage = "synth";
      json j = synth_cfg.empty() ? brp::to_json(brp::SynthConfig{}) : brp::read_json_file(synth_cfg);
      if (synth_n) j["n_companies"] = synth_n;
      if (synth_no_covid) j["covid"] = nullptr;
      for (const auto& s : synth_set) brp::apply_override(j, s);
      const auto cfg = brp::synth_config_from_json(j);
      const auto result = brp::generate_registry(cfg, synth_seed);
      brp::write_registry(result.registry, brp::RegistryPaths::in_directory(synth_out));
      std::ostringstream truth;
      truth << "company_id,year,health,hazard,event_intensity\n";
      for (const auto& c : result.truth.companies) {
        for (std::size_t i = 0; i < c.health.size(); ++i) {
          truth << c.company_id << ',' << c.first_year + static_cast<int>(i) << ','
                << brp::csv::format_double(c.health[i]) << ',' << brp::csv::format_double(c.hazard[i]) << ','
                << brp::csv::format_double(c.event_intensity[i]) << '\n';
        }
      }
      brp::write_text_file(synth_out / "ground_truth.csv", truth.str());
      log.progress(stage, std::to_string(result.registry.companies().size()) + " companies written to " +
                              synth_out.string());
    } else if (*ingest) {
      stage = "ingest";
      const auto reg = load_input(ingest_in, horizon);
      const auto report = brp::validate_registry(reg);
      std::ostringstream ss;
      brp::write_validation_report(report, ss);
      brp::write_text_file(ingest_out / "validation_report.csv", ss.str());
      const auto filtered =
          brp::filter_registry(reg, {excluded.begin(), excluded.end()}, !keep_anomalous);
      brp::write_registry(filtered, brp::RegistryPaths::in_directory(ingest_out));
      std::cout << "companies_in=" << reg.companies().size() << " anomalies=" << report.size()
                << " companies_out=" << filtered.companies().size() << '\n';
    } else if (*featurize) {
      stage = "featurize";
      const auto cfg = feat_flags.config();
      const auto reg = load_input(feat_in, horizon);
      std::vector<brp::FeatureMatrix> parts;
      for (int t0 : parse_year_range(feat_years)) {
        parts.push_back(brp::build_samples(reg, cfg, feat_window, t0).matrix);
      }
      const auto m = brp::FeatureMatrix::concat_rows(parts);
      write_matrix(feat_out, m);
      std::cout << "rows=" << m.rows() << " columns=" << m.cols() << " positives=" << m.positives() << '\n';
    } else if (*select) {
      stage = "select";
      const auto m = brp::sanitize_matrix(read_matrix(sel_matrix));
      const auto report = brp::select_features(m, sel_params);
      std::ostringstream ss;
      brp::write_iv_report_csv(report, ss);
      brp::write_text_file(sel_out, ss.str());
      const auto chosen = report.selected_features();
      if (!sel_selected.empty()) write_matrix(sel_selected, m.select_columns(chosen));
      std::cout << "candidates=" << report.entries.size() << " selected=" << chosen.size() << '\n';
    } else if (*windows) {
      stage = "windows";
      const auto cfg = win_flags.config();
      const auto reg = load_input(win_in, horizon);
      const brp::SplitYears years;
      for (int W : win_lengths) {
        stage = "featurize";
        std::vector<brp::SampleSet> sets;
        for (int t0 : years.all_years()) sets.push_back(brp::build_samples(reg, cfg, W, t0));
        stage = "windows";
        const auto b = brp::assemble_splits(sets, win_fraction, win_seed, years, win_group);
        const fs::path dir = win_out / (std::to_string(W) + "y");
        write_matrix(dir / "train.csv", b.train);
        write_matrix(dir / "test.csv", b.test);
        write_matrix(dir / "pre_covid.csv", b.pre_covid);
        write_matrix(dir / "post_covid.csv", b.post_covid);
        brp::write_text_file(dir / "split_manifest.json", brp::split_manifest(b).dump(2) + "\n");
        std::cout << W << "y: train=" << b.train.rows() << " test=" << b.test.rows()
                  << " pre_covid=" << b.pre_covid.rows() << " post_covid=" << b.post_covid.rows() << '\n';
      }
    } else if (*train) {
      stage = "train";
      const auto family = brp::parse_model_family(train_family);
      if (!family) throw brp::ConfigError("unknown model family '" + train_family + "'");
      brp::ModelConfig cfg;
      cfg.family = *family;
      cfg.seed = train_seed;
      for (const auto& p : train_params) {
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw brp::ConfigError("--param expects name=value, got '" + p + "'");
        try {
          cfg.set(p.substr(0, eq), std::stod(p.substr(eq + 1)));
        } catch (const std::logic_error&) {
          throw brp::ConfigError("--param value is not a number: '" + p + "'");
        }
      }
      cfg.validate();
      const auto raw = read_matrix(train_in);
      const auto stats = brp::fit_sanitizer(raw);
      auto m = brp::apply_sanitizer(raw, stats);
      if (train_rate > 0.0) {
        auto us = brp::undersample(m, train_rate, brp::derive_seed(train_seed, "undersample"));
        log.progress(stage, us.notice);
        m = std::move(us.matrix);
      }
      if (train_grid) {
        const auto grid = brp::grid_search_cv(brp::HyperGrid::defaults(cfg.family), cfg, m, m.labels(), train_folds,
                                              brp::derive_seed(train_seed, "cv"));
        cfg = grid.best;
        log.progress(stage, "grid search picked cell " + std::to_string(grid.best_index) + " (mean AUC " +
                                brp::format_auc(grid.mean_auc[grid.best_index]) + ")");
      }
      const auto model = brp::fit_model(m, cfg);
      auto j = brp::model_to_json(model);
      // Infinity replacement bounds, reused by 'evaluate'.
      json bounds = json::array();
      for (std::size_t c = 0; c < raw.cols(); ++c) {
        bounds.push_back({{"column", raw.column(c).name},
                          {"min", stats.min_finite[c] ? json(*stats.min_finite[c]) : json(nullptr)},
                          {"max", stats.max_finite[c] ? json(*stats.max_finite[c]) : json(nullptr)}});
      }
      j["sanitizer"] = bounds;
      brp::write_text_file(train_out, j.dump(2) + "\n");
      std::cout << "family=" << brp::to_string(cfg.family) << " rows=" << m.rows() << " positives=" << m.positives()
                << '\n';
    } else if (*evaluate) {
      stage = "evaluate";
      const auto j = brp::read_json_file(eval_model);
      const auto model = brp::model_from_json(j);
      auto m = read_matrix(eval_matrix);
      if (j.contains("sanitizer")) {
        brp::SanitizeStats stats;
        for (std::size_t c = 0; c < m.cols(); ++c) {
          std::optional<double> lo, hi;
          for (const auto& b : j["sanitizer"]) {
            if (b.at("column").get<std::string>() == m.column(c).name) {
              if (!b.at("min").is_null()) lo = b.at("min").get<double>();
              if (!b.at("max").is_null()) hi = b.at("max").get<double>();
            }
          }
          stats.min_finite.push_back(lo);
          stats.max_finite.push_back(hi);
        }
        m = brp::apply_sanitizer(m, stats);
      } else {
        m = brp::sanitize_matrix(m);
      }
      const auto scores = brp::predict_proba(model, m);
      if (!eval_scores.empty()) {
        std::ostringstream ss;
        ss << "company_id,reference_year,window_length,label,score\n";
        for (std::size_t r = 0; r < m.rows(); ++r) {
          const auto& k = m.key(r);
          ss << k.company_id << ',' << k.reference_year << ',' << k.window_length << ',' << int(m.label(r)) << ','
             << brp::csv::format_double(scores[r]) << '\n';
        }
        brp::write_text_file(eval_scores, ss.str());
      }
      const std::size_t pos = m.positives();
      if (pos == 0 || pos == m.rows()) {
        std::cout << "rows=" << m.rows() << " positives=" << pos << " auc=undefined\n";
      } else {
        const auto roc = brp::roc_curve(scores, m.labels());
        if (!eval_roc.empty()) {
          std::ostringstream ss;
          brp::write_roc_csv(roc, ss);
          brp::write_text_file(eval_roc, ss.str());
        }
        std::cout << "rows=" << m.rows() << " positives=" << pos << " auc=" << brp::format_auc(roc.area()) << '\n';
      }
    } else if (*ablate) {
      stage = "ablate";
      std::vector<brp::SplitBundle> bundles;
      for (int W = 1; W <= 3; ++W) {
        const fs::path dir = abl_in / (std::to_string(W) + "y");
        if (!fs::is_directory(dir)) continue;
        brp::SplitBundle b;
        b.window_length = W;
        b.train = read_matrix(dir / "train.csv");
        b.test = read_matrix(dir / "test.csv");
        b.pre_covid = read_matrix(dir / "pre_covid.csv");
        b.post_covid = read_matrix(dir / "post_covid.csv");
        bundles.push_back(std::move(b));
      }
      if (bundles.empty()) throw brp::ConfigError("no <W>y split directories under " + abl_in.string());
      brp::ExperimentConfig cfg;
      cfg.families = parse_families(abl_families);
      cfg.seed = abl_seed;
      cfg.grid_search = !abl_no_grid;
      cfg.undersample_rate = abl_rate;
      cfg.threads = threads;
      const auto report = brp::ablation_matrix(bundles, cfg);
      const auto drift = brp::drift_report(report);
      std::ostringstream auc, dr;
      brp::write_auc_matrix_csv(report, auc);
      brp::write_drift_csv(drift, dr);
      brp::write_text_file(abl_out / "auc_matrix.csv", auc.str());
      brp::write_text_file(abl_out / "drift.csv", dr.str());
      brp::write_text_file(abl_out / "ablation.json", brp::ablation_to_json(report).dump(2) + "\n");
      brp::emit_roc_csv(report, abl_out / "roc");
      std::cout << auc.str();
    } else if (*run) {
      stage = "config";
      json doc = brp::to_json(brp::default_pipeline_config());
      if (!run_cfg.empty()) {
        json file = brp::read_json_file(run_cfg);
        // A run manifest carries the config it ran with.
        if (file.contains("config") && file.contains("config_hash")) file = file["config"];
        doc = brp::to_json(brp::pipeline_config_from_json(file));
      }
      for (const auto& extra : run->remaining()) {
        if (extra == "-v" || extra == "--verbose") {
          log.set_verbose(true);
          continue;
        }
        if (extra.rfind("--", 0) != 0) throw brp::ConfigError("unexpected argument '" + extra + "'");
        brp::apply_override(doc, extra.substr(2));
      }
      const auto cfg = brp::pipeline_config_from_json(doc);
      if (print_config) {
        std::cout << brp::to_json(cfg).dump(2) << '\n';
        return 0;
      }
      return brp::run_pipeline(cfg, log);
    }
    return 0;
  } catch (const std::exception& e) {
    log.error(stage, e.what());
    return brp::exit_code_for(e);
  }
}
