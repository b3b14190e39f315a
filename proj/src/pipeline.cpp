#include "brp/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "brp/csv.hpp"
#include "brp/error.hpp"
#include "brp/registry.hpp"
#include "brp/rng.hpp"

namespace brp {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- config (de)serialization ------------------------------------------------

namespace {

// Reads one JSON object, rejecting unknown keys and wrong value types.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& at(const char* key) const { return j_.at(key); }
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void get(const char* key, bool& out) {
    if (!has(key)) return;
    if (!at(key).is_boolean()) fail(key, "a boolean");
    out = at(key).get<bool>();
  }
  void get(const char* key, int& out) {
    if (!has(key)) return;
    if (!at(key).is_number_integer()) fail(key, "an integer");
    out = at(key).get<int>();
  }
  void get(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    if (!at(key).is_number_unsigned()) fail(key, "a non-negative integer");
    out = at(key).get<std::uint64_t>();
  }
  void get(const char* key, std::size_t& out, int) {
    std::uint64_t v = out;
    get(key, v);
    out = static_cast<std::size_t>(v);
  }
  void get(const char* key, double& out) {
    if (!has(key)) return;
    if (!at(key).is_number()) fail(key, "a number");
    out = at(key).get<double>();
  }
  void get(const char* key, std::string& out) {
    if (!has(key)) return;
    if (!at(key).is_string()) fail(key, "a string");
    out = at(key).get<std::string>();
  }
  void get(const char* key, std::vector<int>& out) {
    if (!has(key)) return;
    const auto& a = at(key);
    if (!a.is_array()) fail(key, "an array of integers");
    out.clear();
    for (const auto& v : a) {
      if (!v.is_number_integer()) fail(key, "an array of integers");
      out.push_back(v.get<int>());
    }
  }
  void get(const char* key, std::vector<std::string>& out) {
    if (!has(key)) return;
    const auto& a = at(key);
    if (!a.is_array()) fail(key, "an array of strings");
    out.clear();
    for (const auto& v : a) {
      if (!v.is_string()) fail(key, "an array of strings");
      out.push_back(v.get<std::string>());
    }
  }

  void finish() const {
    for (const auto& [key, v] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + child(key.c_str()) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? std::string("config") : "'" + path_ + "'"; }
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError("config key '" + child(key) + "' must be " + what);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json grammar_to_json(const AfeGrammar& g) {
  return {{"operands", g.operands},
          {"identity", g.identity},
          {"log1p", g.log1p},
          {"ratio", g.ratio},
          {"difference", g.difference},
          {"normalized_difference", g.normalized_difference},
          {"lag_depth", g.lag_depth},
          {"max_features", g.max_features}};
}

AfeGrammar grammar_from_json(const json& j, const std::string& path) {
  AfeGrammar g;
  ObjectReader r(j, path);
  r.get("operands", g.operands);
  r.get("identity", g.identity);
  r.get("log1p", g.log1p);
  r.get("ratio", g.ratio);
  r.get("difference", g.difference);
  r.get("normalized_difference", g.normalized_difference);
  r.get("lag_depth", g.lag_depth);
  r.get("max_features", g.max_features, 0);
  r.finish();
  return g;
}

ModelFamily family_from(const std::string& name) {
  const auto f = parse_model_family(name);
  if (!f) throw ConfigError("unknown model family '" + name + "'");
  return *f;
}

}  // namespace

PipelineConfig default_pipeline_config() { return PipelineConfig{}; }

void PipelineConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (input_dir) {
    const auto paths = RegistryPaths::in_directory(*input_dir);
    for (const auto& p : {paths.companies, paths.balance_sheets, paths.filings}) {
      if (!fs::is_regular_file(p)) throw ConfigError("input file not found: " + p.string());
    }
  } else {
    synth.validate();
  }
  features.validate();
  if (windows.empty()) throw ConfigError("no windows requested");
  for (int w : windows) {
    if (w < 1 || w > 3) throw ConfigError("window lengths must be 1, 2 or 3 (got " + std::to_string(w) + ")");
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split.fraction must lie in (0, 1)");
  if (years.train_first > years.train_last) throw ConfigError("split.train_first is after split.train_last");
  experiment.validate();
  for (auto fs : experiment.feature_sets) {
    for (auto fam : families_of(fs)) {
      const bool on = fam == Family::FR ? features.fr : fam == Family::AFE ? features.afe : features.rb;
      if (!on) {
        throw ConfigError("feature set " + std::string(to_string(fs)) + " needs the " + std::string(to_string(fam)) +
                          " family, which is disabled");
      }
    }
  }
}

json to_json(const PipelineConfig& c) {
  json grids = json::object(), params = json::object();
  for (auto f : c.experiment.families) {
    json axes = json::object();
    for (const auto& [name, values] : c.experiment.grid_for(f).axes) axes[name] = values;
    grids[std::string(to_string(f))] = axes;
    params[std::string(to_string(f))] = to_json(c.experiment.base_for(f))["params"];
  }
  std::vector<std::string> families, sets;
  for (auto f : c.experiment.families) families.emplace_back(to_string(f));
  for (auto s : c.experiment.feature_sets) sets.emplace_back(to_string(s));
  return {
      {"output_dir", c.output_dir.string()},
      {"input",
       {{"directory", c.input_dir ? json(c.input_dir->string()) : json(nullptr)},
        {"horizon_year", c.horizon_year ? json(*c.horizon_year) : json(nullptr)}}},
      {"synth", to_json(c.synth)},
      {"synth_seed", c.synth_seed},
      {"registry", {{"excluded_sectors", c.excluded_sectors}, {"drop_anomalous", c.drop_anomalous}}},
      {"features",
       {{"fr", c.features.fr},
        {"afe", c.features.afe},
        {"rb", c.features.rb},
        {"trend", to_string(c.features.trend)},
        {"afe_grammar", grammar_to_json(c.features.grammar)}}},
      {"windows", c.windows},
      {"split",
       {{"fraction", c.split_fraction},
        {"seed", c.split_seed},
        {"group_by_company", c.group_by_company},
        {"train_first", c.years.train_first},
        {"train_last", c.years.train_last},
        {"pre_covid", c.years.pre_covid},
        {"post_covid", c.years.post_covid}}},
      {"selection",
       {{"n_bins", c.experiment.selection.n_bins},
        {"iv_threshold", c.experiment.selection.iv_threshold},
        {"missing_threshold", c.experiment.selection.missing_threshold},
        {"smoothing", c.experiment.selection.smoothing}}},
      {"undersample_rate", c.experiment.undersample_rate},
      {"models",
       {{"families", families},
        {"feature_sets", sets},
        {"grid_search", c.experiment.grid_search},
        {"cv_folds", c.experiment.cv_folds},
        {"grids", grids},
        {"params", params},
        {"write", c.write_models}}},
      {"seed", c.experiment.seed},
      {"threads", c.experiment.threads},
  };
}

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  ObjectReader r(j, "");
  std::string s;
  if (r.has("output_dir")) {
    r.get("output_dir", s);
    c.output_dir = s;
  }
  if (r.has("input")) {
    ObjectReader in(r.at("input"), "input");
    if (in.has("directory")) {
      std::string d;
      in.get("directory", d);
      c.input_dir = d;
    }
    if (in.has("horizon_year")) {
      int h = 0;
      in.get("horizon_year", h);
      c.horizon_year = h;
    }
    in.finish();
  }
  if (r.has("synth")) c.synth = synth_config_from_json(r.at("synth"));
  r.get("synth_seed", c.synth_seed);
  if (r.has("registry")) {
    ObjectReader reg(r.at("registry"), "registry");
    std::vector<std::string> ex(c.excluded_sectors.begin(), c.excluded_sectors.end());
    reg.get("excluded_sectors", ex);
    c.excluded_sectors = {ex.begin(), ex.end()};
    reg.get("drop_anomalous", c.drop_anomalous);
    reg.finish();
  }
  if (r.has("features")) {
    ObjectReader f(r.at("features"), "features");
    f.get("fr", c.features.fr);
    f.get("afe", c.features.afe);
    f.get("rb", c.features.rb);
    std::string trend(to_string(c.features.trend));
    f.get("trend", trend);
    const auto tk = parse_trend_kind(trend);
    if (!tk) throw ConfigError("features.trend must be 'difference' or 'slope'");
    c.features.trend = *tk;
    if (f.has("afe_grammar")) c.features.grammar = grammar_from_json(f.at("afe_grammar"), "features.afe_grammar");
    f.finish();
  }
  r.get("windows", c.windows);
  if (r.has("split")) {
    ObjectReader sp(r.at("split"), "split");
    sp.get("fraction", c.split_fraction);
    sp.get("seed", c.split_seed);
    sp.get("group_by_company", c.group_by_company);
    sp.get("train_first", c.years.train_first);
    sp.get("train_last", c.years.train_last);
    sp.get("pre_covid", c.years.pre_covid);
    sp.get("post_covid", c.years.post_covid);
    sp.finish();
  }
  if (r.has("selection")) {
    ObjectReader se(r.at("selection"), "selection");
    se.get("n_bins", c.experiment.selection.n_bins, 0);
    se.get("iv_threshold", c.experiment.selection.iv_threshold);
    se.get("missing_threshold", c.experiment.selection.missing_threshold);
    se.get("smoothing", c.experiment.selection.smoothing);
    se.finish();
  }
  r.get("undersample_rate", c.experiment.undersample_rate);
  if (r.has("models")) {
    ObjectReader m(r.at("models"), "models");
    std::vector<std::string> families, sets;
    for (auto f : c.experiment.families) families.emplace_back(to_string(f));
    for (auto fs : c.experiment.feature_sets) sets.emplace_back(to_string(fs));
    m.get("families", families);
    m.get("feature_sets", sets);
    c.experiment.families.clear();
    for (const auto& f : families) c.experiment.families.push_back(family_from(f));
    c.experiment.feature_sets.clear();
    for (const auto& fs : sets) {
      const auto parsed = parse_feature_set(fs);
      if (!parsed) throw ConfigError("unknown feature set '" + fs + "'");
      c.experiment.feature_sets.push_back(*parsed);
    }
    m.get("grid_search", c.experiment.grid_search);
    m.get("cv_folds", c.experiment.cv_folds);
    m.get("write", c.write_models);
    if (m.has("grids")) {
      ObjectReader g(m.at("grids"), "models.grids");
      for (const auto& [name, axes] : m.at("grids").items()) {
        g.has(name.c_str());
        HyperGrid grid;
        grid.family = family_from(name);
        if (!axes.is_object()) throw ConfigError("models.grids." + name + " must be an object of value lists");
        // Object keys come back sorted, so axes run in name order.
        for (const auto& [axis, values] : axes.items()) {
          if (!values.is_array() || values.empty()) {
            throw ConfigError("models.grids." + name + "." + axis + " must be a non-empty array");
          }
          std::vector<double> v;
          for (const auto& x : values) {
            if (x.is_boolean()) {
              v.push_back(x.get<bool>() ? 1.0 : 0.0);
            } else if (x.is_number()) {
              v.push_back(x.get<double>());
            } else {
              throw ConfigError("models.grids." + name + "." + axis + " must hold numbers");
            }
          }
          grid.axes.emplace_back(axis, std::move(v));
        }
        c.experiment.grids[grid.family] = std::move(grid);
      }
      g.finish();
    }
    if (m.has("params")) {
      ObjectReader p(m.at("params"), "models.params");
      for (const auto& [name, values] : m.at("params").items()) {
        p.has(name.c_str());
        const auto fam = family_from(name);
        c.experiment.base[fam] = model_config_from_json({{"family", name}, {"params", values}});
      }
      p.finish();
    }
    m.finish();
  }
  r.get("seed", c.experiment.seed);
  r.get("threads", c.experiment.threads);
  c.synth.validate();
  r.finish();
  return c;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like key.path=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override key '" + key + "' descends into a non-object value");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::string config_hash(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
  return buf;
}

// ---- logging, files, locks ---------------------------------------------------

void StageLog::progress(std::string_view stage, std::string_view message) {
  if (verbose_) out_ << '[' << stage << "] " << message << '\n';
}
void StageLog::warn(std::string_view stage, std::string_view message) {
  out_ << '[' << stage << "] warning: " << message << '\n';
}
void StageLog::error(std::string_view stage, std::string_view message) {
  out_ << '[' << stage << "] error: " << message << '\n';
}

int exit_code_for(const std::exception& e) noexcept {
  if (const auto* be = dynamic_cast<const Error*>(&e)) return be->exit_code();
  return 4;
}

void write_text_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

OutputLock::OutputLock(const fs::path& dir) : path_(dir / ".lock") {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (!f) {
    const auto p = path_;
    path_.clear();
    throw ConfigError("output directory is in use by another run (" + p.string() + " exists)");
  }
  std::fclose(f);
}

OutputLock::~OutputLock() {
  if (!path_.empty()) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
}

// ---- artifacts ---------------------------------------------------------------

std::vector<fs::path> emit_roc_csv(const AblationReport& report, const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& c : report.cells) {
    for (auto s : kEvalSplits) {
      const auto& e = c.split(s);
      if (e.roc.points.empty()) continue;
      std::ostringstream ss;
      write_roc_csv(e.roc, ss);
      const auto path = dir / ("roc_" + std::string(to_string(c.family)) + "_" + std::string(file_token(c.feature_set)) +
                               "_" + std::to_string(c.window) + "y_" + std::string(to_string(s)) + ".csv");
      write_text_file(path, ss.str());
      out.push_back(path);
    }
  }
  return out;
}

namespace {

std::string to_text(const json& j) { return j.dump(2) + "\n"; }

template <typename Fn>
std::string capture(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

// Tracks written files so the manifest can list them with content hashes.
struct ArtifactWriter {
  fs::path root;
  std::map<std::string, std::string> hashes;

  void write(const fs::path& rel, std::string_view content) {
    write_text_file(root / rel, content);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(content)));
    hashes[rel.generic_string()] = buf;
  }
};

void write_truth_csv(const GroundTruth& truth, std::ostream& out) {
  out << "company_id,year,health,hazard,event_intensity\n";
  for (const auto& c : truth.companies) {
    for (std::size_t i = 0; i < c.health.size(); ++i) {
      out << c.company_id << ',' << c.first_year + static_cast<int>(i) << ',' << csv::format_double(c.health[i]) << ','
          << csv::format_double(c.hazard[i]) << ',' << csv::format_double(c.event_intensity[i]) << '\n';
    }
  }
}

}  // namespace

int run_pipeline(const PipelineConfig& cfg, StageLog& log) {
  std::string stage = "config";
  try {
    cfg.validate();
    OutputLock lock(cfg.output_dir);
    const fs::path incomplete = cfg.output_dir / ".incomplete";
    write_text_file(incomplete, "run started; artifacts in this directory may be partial\n");
    ArtifactWriter out{cfg.output_dir, {}};

    stage = "ingest";
    Registry raw;
    if (cfg.input_dir) {
      log.progress(stage, "loading registry from " + cfg.input_dir->string());
      raw = load_registry(RegistryPaths::in_directory(*cfg.input_dir), cfg.horizon_year);
    } else {
      stage = "synth";
      log.progress(stage, "generating " + std::to_string(cfg.synth.n_companies) + " companies");
      auto synth = generate_registry(cfg.synth, cfg.synth_seed, cfg.experiment.threads);
      raw = std::move(synth.registry);
      const auto tmp = cfg.output_dir / "registry";
      write_registry(raw, RegistryPaths::in_directory(tmp));
      for (const char* name : {"companies.csv", "balance_sheets.csv", "filings.csv"}) {
        out.write(fs::path("registry") / name, read_text_file(tmp / name));
      }
      out.write("registry/ground_truth.csv", capture([&](std::ostream& s) { write_truth_csv(synth.truth, s); }));
      stage = "ingest";
    }
    const auto report = validate_registry(raw);
    out.write("registry/validation_report.csv", capture([&](std::ostream& s) { write_validation_report(report, s); }));
    if (!report.empty()) log.progress(stage, std::to_string(report.size()) + " anomalies recorded");
    const Registry reg = filter_registry(raw, cfg.excluded_sectors, cfg.drop_anomalous);
    log.progress(stage, std::to_string(reg.companies().size()) + " companies after filtering");

    stage = "windows";
    std::vector<SplitBundle> bundles;
    for (int W : cfg.windows) {
      stage = "featurize";
      std::vector<SampleSet> sets;
      for (int t0 : cfg.years.all_years()) sets.push_back(build_samples(reg, cfg.features, W, t0));
      stage = "windows";
      bundles.push_back(assemble_splits(sets, cfg.split_fraction, cfg.split_seed, cfg.years, cfg.group_by_company));
      out.write("splits/split_manifest_" + std::to_string(W) + "y.json", to_text(split_manifest(bundles.back())));
      log.progress(stage, std::to_string(W) + "y: " + std::to_string(bundles.back().train.rows()) + " training samples");
    }

    stage = "train";
    log.progress(stage, "running the ablation matrix");
    auto experiment = cfg.experiment;
    experiment.on_cell = [&](const AblationCell& c) {
      char auc[32];
      const auto& t = c.split(EvalSplit::test).auc;
      std::snprintf(auc, sizeof auc, "%.4f", t ? *t : std::nan(""));
      log.progress(stage, std::string(to_string(c.family)) + " " + std::string(to_string(c.feature_set)) + " " +
                              std::to_string(c.window) + "y: test AUC " + auc);
    };
    const auto ablation = ablation_matrix(bundles, experiment);

    stage = "select";
    for (const auto& sel : ablation.selections) {
      out.write("selection/iv_report_" + std::to_string(sel.window) + "y.csv",
                capture([&](std::ostream& s) { write_iv_report_csv(sel.iv, s); }));
      if (!sel.undersample_notice.empty()) log.progress("train", std::to_string(sel.window) + "y: " + sel.undersample_notice);
    }

    stage = "train";
    if (cfg.write_models) {
      for (const auto& c : ablation.cells) {
        out.write("models/" + std::string(to_string(c.family)) + "_" + std::string(file_token(c.feature_set)) + "_" +
                      std::to_string(c.window) + "y.json",
                  to_text(model_to_json(c.model)));
      }
    }

    stage = "evaluate";
    const auto drift = drift_report(ablation);
    out.write("reports/auc_matrix.csv", capture([&](std::ostream& s) { write_auc_matrix_csv(ablation, s); }));
    out.write("reports/ablation.json", to_text(ablation_to_json(ablation)));
    out.write("reports/drift.csv", capture([&](std::ostream& s) { write_drift_csv(drift, s); }));
    out.write("reports/drift.json", to_text(drift_to_json(drift)));
    for (const auto& c : ablation.cells) {
      for (auto s : kEvalSplits) {
        const auto& e = c.split(s);
        if (e.roc.points.empty()) continue;
        out.write("roc/roc_" + std::string(to_string(c.family)) + "_" + std::string(file_token(c.feature_set)) + "_" +
                      std::to_string(c.window) + "y_" + std::string(to_string(s)) + ".csv",
                  capture([&](std::ostream& os) { write_roc_csv(e.roc, os); }));
      }
      if (!c.split(EvalSplit::post_covid).auc) {
        log.warn(stage, std::string(to_string(c.family)) + " " + std::string(to_string(c.feature_set)) + " " +
                            std::to_string(c.window) + "y: post_covid split lacks a class; AUC left empty");
      }
    }

    const json manifest{{"tool", "brp"},
                        {"version", kToolVersion},
                        {"model_format", kModelFormatVersion},
                        {"config_hash", config_hash(cfg)},
                        {"seeds",
                         {{"synth", cfg.input_dir ? json(nullptr) : json(cfg.synth_seed)},
                          {"split", cfg.split_seed},
                          {"experiment", cfg.experiment.seed}}},
                        {"config", to_json(cfg)},
                        {"artifacts", out.hashes}};
    write_text_file(cfg.output_dir / "run_manifest.json", to_text(manifest));
    std::error_code ec;
    fs::remove(incomplete, ec);
    log.progress("run", "done; artifacts in " + cfg.output_dir.string());
    return 0;
  } catch (const std::exception& e) {
    log.error(stage, e.what());
    return exit_code_for(e);
  }
}

}  // namespace brp
