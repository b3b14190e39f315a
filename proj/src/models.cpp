#include "brp/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>

#include "brp/csv.hpp"
#include "brp/error.hpp"
#include "brp/mlp_net.hpp"
#include "brp/rng.hpp"
#include "model_internal.hpp"

namespace brp {

using nlohmann::json;

std::string_view to_string(ModelFamily f) noexcept {
  switch (f) {
    case ModelFamily::logistic: return "logistic";
    case ModelFamily::random_forest: return "random_forest";
    case ModelFamily::gbdt: return "gbdt";
    case ModelFamily::mlp: return "mlp";
  }
  return "?";
}

std::optional<ModelFamily> parse_model_family(std::string_view s) noexcept {
  for (auto f : all_model_families()) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

const std::vector<ModelFamily>& all_model_families() {
  static const std::vector<ModelFamily> v{ModelFamily::logistic, ModelFamily::random_forest, ModelFamily::gbdt,
                                          ModelFamily::mlp};
  return v;
}

// ---- hyperparameter table ----------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Slot {
  std::string_view name;
  std::variant<int*, double*, bool*> ref;
  double lo;
  double hi;
  bool lo_open = false;
  bool hi_open = false;
};

std::vector<Slot> slots(ModelConfig& c, ModelFamily f) {
  switch (f) {
    case ModelFamily::logistic:
      return {{"l2", &c.logistic.l2, 0, kInf},
              {"tol", &c.logistic.tol, 0, kInf, true},
              {"max_iter", &c.logistic.max_iter, 1, 1e9}};
    case ModelFamily::random_forest:
      return {{"n_trees", &c.forest.n_trees, 1, 1e6},
              {"max_depth", &c.forest.max_depth, 1, 64},
              {"min_leaf", &c.forest.min_leaf, 1, 1e9},
              {"max_bins", &c.forest.max_bins, 2, 255},
              {"bootstrap", &c.forest.bootstrap, 0, 1}};
    case ModelFamily::gbdt:
      return {{"rounds", &c.gbdt.rounds, 0, 1e6},
              {"max_leaves", &c.gbdt.max_leaves, 2, 65536},
              {"learning_rate", &c.gbdt.learning_rate, 0, 1, true},
              {"max_bins", &c.gbdt.max_bins, 2, 255},
              {"min_child_samples", &c.gbdt.min_child_samples, 1, 1e9},
              {"lambda", &c.gbdt.lambda, 0, kInf},
              {"min_child_hessian", &c.gbdt.min_child_hessian, 0, kInf},
              {"max_depth", &c.gbdt.max_depth, -1, 64}};
    case ModelFamily::mlp:
      return {{"embed_width", &c.mlp.embed_width, 0, 4096},
              {"hidden1", &c.mlp.hidden1, 1, 4096},
              {"hidden2", &c.mlp.hidden2, 1, 4096},
              {"batch_size", &c.mlp.batch_size, 1, 1e9},
              {"epochs", &c.mlp.epochs, 0, 1e6},
              {"learning_rate", &c.mlp.learning_rate, 0, kInf, true},
              {"beta1", &c.mlp.beta1, 0, 1, false, true},
              {"beta2", &c.mlp.beta2, 0, 1, false, true},
              {"epsilon", &c.mlp.epsilon, 0, kInf, true}};
  }
  return {};
}

double read_slot(const Slot& s) {
  return std::visit([](auto* p) { return static_cast<double>(*p); }, s.ref);
}

std::string describe_range(const Slot& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%c%g, %g%c", s.lo_open ? '(' : '[', s.lo, s.hi, s.hi_open ? ')' : ']');
  return buf;
}

void check_range(const Slot& s, double v) {
  const bool ok = std::isfinite(v);
  bool in = ok && (s.lo_open ? v > s.lo : v >= s.lo) && (s.hi_open ? v < s.hi : v <= s.hi);
  if (std::holds_alternative<int*>(s.ref) || std::holds_alternative<bool*>(s.ref)) {
    in = in && std::floor(v) == v;
  }
  if (!in) {
    throw ConfigError(std::string(s.name) + " = " + csv::format_double(v) + " outside legal range " + describe_range(s));
  }
}

const Slot& find_slot(const std::vector<Slot>& table, std::string_view name, ModelFamily f) {
  for (const auto& s : table) {
    if (s.name == name) return s;
  }
  throw ConfigError("unknown hyperparameter '" + std::string(name) + "' for family " + std::string(to_string(f)));
}

}  // namespace

void ModelConfig::validate() const {
  auto& self = const_cast<ModelConfig&>(*this);
  for (const auto& s : slots(self, family)) check_range(s, read_slot(s));
  if (family == ModelFamily::gbdt && gbdt.max_depth == 0) {
    throw ConfigError("max_depth = 0 outside legal range (-1 for unlimited, or >= 1)");
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

const std::vector<std::string>& ModelConfig::parameter_names(ModelFamily family) {
  static const auto table = [] {
    std::map<ModelFamily, std::vector<std::string>> m;
    ModelConfig c;
    for (auto f : all_model_families()) {
      for (const auto& s : slots(c, f)) m[f].emplace_back(s.name);
    }
    return m;
  }();
  return table.at(family);
}

void ModelConfig::set(std::string_view name, double value) {
  const auto table = slots(*this, family);
  const Slot& s = find_slot(table, name, family);
  check_range(s, value);
  std::visit(
      [value](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          *p = value != 0.0;
        } else {
          *p = static_cast<T>(value);
        }
      },
      s.ref);
  if (family == ModelFamily::gbdt && gbdt.max_depth == 0) {
    throw ConfigError("max_depth = 0 outside legal range (-1 for unlimited, or >= 1)");
  }
}

double ModelConfig::get(std::string_view name) const {
  auto& self = const_cast<ModelConfig&>(*this);
  const auto table = slots(self, family);
  return read_slot(find_slot(table, name, family));
}

json to_json(const ModelConfig& cfg) {
  json params = json::object();
  auto& self = const_cast<ModelConfig&>(cfg);
  for (const auto& s : slots(self, cfg.family)) {
    std::visit([&](auto* p) { params[std::string(s.name)] = *p; }, s.ref);
  }
  return json{{"family", to_string(cfg.family)}, {"seed", cfg.seed}, {"params", params}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key != "family" && key != "seed" && key != "params" && key != "threads") {
      throw ConfigError("unknown model config key '" + key + "'");
    }
  }
  if (!j.contains("family") || !j["family"].is_string()) throw ConfigError("model config needs a string 'family'");
  const auto fam = parse_model_family(j["family"].get<std::string>());
  if (!fam) throw ConfigError("unknown model family '" + j["family"].get<std::string>() + "'");
  cfg.family = *fam;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer()) throw ConfigError("threads must be an integer");
    cfg.threads = j["threads"].get<int>();
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ConfigError("params must be an object");
    for (const auto& [key, value] : j["params"].items()) {
      if (value.is_boolean()) {
        cfg.set(key, value.get<bool>() ? 1.0 : 0.0);
      } else if (value.is_number()) {
        cfg.set(key, value.get<double>());
      } else {
        throw ConfigError("hyperparameter '" + key + "' must be a number");
      }
    }
  }
  cfg.validate();
  return cfg;
}

// ---- trees -------------------------------------------------------------------

double Tree::predict(std::span<const double> row) const {
  std::int32_t i = 0;
  while (true) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    if (n.feature < 0) return n.value;
    const double x = row[static_cast<std::size_t>(n.feature)];
    const bool left = std::isnan(x) ? n.missing_left : x <= n.threshold;
    i = left ? n.left : n.right;
  }
}

std::size_t Tree::leaves() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

// ---- schema ------------------------------------------------------------------

namespace detail {

void check_training_data(const FeatureMatrix& X, std::span<const std::uint8_t> y) {
  if (y.size() != X.rows()) throw DataError("label count does not match matrix rows");
  std::size_t pos = 0;
  for (auto v : y) pos += v ? 1 : 0;
  const std::size_t neg = y.size() - pos;
  if (pos < 2 || neg < 2) {
    throw DataError("training needs at least two samples of each class (got " + std::to_string(pos) + " positive, " +
                    std::to_string(neg) + " negative)");
  }
  for (std::size_t c = 0; c < X.cols(); ++c) {
    const auto vals = X.column_values(c);
    const auto miss = X.column_missing(c);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      if (!miss[r] && !std::isfinite(vals[r])) {
        throw NumericError("non-finite value in column '" + X.column(c).name + "' (sanitize the matrix first)");
      }
    }
  }
}

InputSchema fit_schema(const FeatureMatrix& X) {
  InputSchema s;
  s.columns = X.columns();
  const std::size_t n = X.rows();
  for (std::size_t c = 0; c < X.cols(); ++c) {
    const auto vals = X.column_values(c);
    const auto miss = X.column_missing(c);
    std::vector<double> present;
    for (std::size_t r = 0; r < n; ++r) {
      if (!miss[r]) present.push_back(vals[r]);
    }
    double med = 0.0;
    if (!present.empty()) {
      std::sort(present.begin(), present.end());
      const std::size_t m = present.size();
      med = m % 2 ? present[m / 2] : present[m / 2 - 1] + (present[m / 2] - present[m / 2 - 1]) * 0.5;
    }
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += miss[r] ? med : vals[r];
    mean = n ? mean / static_cast<double>(n) : 0.0;
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = (miss[r] ? med : vals[r]) - mean;
      var += d * d;
    }
    double sd = n ? std::sqrt(var / static_cast<double>(n)) : 0.0;
    if (!(sd > 1e-12) || !std::isfinite(sd)) sd = 1.0;
    s.impute.push_back(med);
    s.mean.push_back(mean);
    s.scale.push_back(sd);
  }
  return s;
}

std::vector<std::size_t> align_columns(const InputSchema& schema, const FeatureMatrix& X) {
  std::map<std::string_view, std::size_t> index;
  for (std::size_t c = 0; c < X.cols(); ++c) index.emplace(X.column(c).name, c);
  std::vector<std::size_t> out;
  std::vector<std::string> missing;
  std::map<std::string_view, bool> used;
  for (const auto& col : schema.columns) {
    auto it = index.find(col.name);
    if (it == index.end()) {
      missing.push_back(col.name);
    } else {
      out.push_back(it->second);
      used[col.name] = true;
    }
  }
  std::vector<std::string> extra;
  for (const auto& col : X.columns()) {
    if (!used.count(col.name)) extra.push_back(col.name);
  }
  if (!missing.empty() || !extra.empty() || X.cols() != schema.columns.size()) {
    auto list = [](const std::vector<std::string>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size() && i < 20; ++i) s += (i ? "," : "") + v[i];
      if (v.size() > 20) s += ",... (" + std::to_string(v.size()) + " total)";
      return s.empty() ? std::string("none") : s;
    };
    throw DataError("schema mismatch: missing columns [" + list(missing) + "], extra columns [" + list(extra) + "]");
  }
  return out;
}

std::vector<double> standardized_rows(const InputSchema& schema, const FeatureMatrix& X,
                                      std::span<const std::size_t> cols) {
  const std::size_t n = X.rows(), p = cols.size();
  std::vector<double> z(n * p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto vals = X.column_values(cols[j]);
    const auto miss = X.column_missing(cols[j]);
    for (std::size_t r = 0; r < n; ++r) {
      const double v = miss[r] ? schema.impute[j] : vals[r];
      z[r * p + j] = (v - schema.mean[j]) / schema.scale[j];
    }
  }
  return z;
}

std::vector<std::vector<double>> raw_columns(const FeatureMatrix& X, std::span<const std::size_t> cols) {
  std::vector<std::vector<double>> out;
  out.reserve(cols.size());
  for (auto c : cols) {
    const auto vals = X.column_values(c);
    const auto miss = X.column_missing(c);
    std::vector<double> col(X.rows());
    for (std::size_t r = 0; r < X.rows(); ++r) col[r] = miss[r] ? std::numeric_limits<double>::quiet_NaN() : vals[r];
    out.push_back(std::move(col));
  }
  return out;
}

TrainingMetadata base_metadata(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg) {
  TrainingMetadata m;
  m.seed = cfg.seed;
  m.data_fingerprint = data_fingerprint(X, y);
  m.rows = X.rows();
  for (auto v : y) m.positives += v ? 1 : 0;
  return m;
}

}  // namespace detail

std::string data_fingerprint(const FeatureMatrix& X, std::span<const std::uint8_t> y) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& c : X.columns()) {
    feed(c.name.data(), c.name.size());
    feed("\x1f", 1);
  }
  for (std::size_t c = 0; c < X.cols(); ++c) {
    const auto vals = X.column_values(c);
    const auto miss = X.column_missing(c);
    for (std::size_t r = 0; r < X.rows(); ++r) {
      const double v = miss[r] ? 0.0 : vals[r];
      feed(&v, sizeof v);
      feed(&miss[r], 1);
    }
  }
  feed(y.data(), y.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- dispatch and scoring ----------------------------------------------------

TrainedModel fit_model(const FeatureMatrix& X, std::span<const std::uint8_t> y, const ModelConfig& cfg) {
  switch (cfg.family) {
    case ModelFamily::logistic: return fit_logistic(X, y, cfg);
    case ModelFamily::random_forest: return fit_random_forest(X, y, cfg);
    case ModelFamily::gbdt: return fit_gbdt(X, y, cfg);
    case ModelFamily::mlp: return fit_mlp(X, y, cfg);
  }
  throw ConfigError("unknown model family");
}

namespace {

std::vector<double> row_major_raw(const FeatureMatrix& X, std::span<const std::size_t> cols) {
  const std::size_t n = X.rows(), p = cols.size();
  std::vector<double> out(n * p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto vals = X.column_values(cols[j]);
    const auto miss = X.column_missing(cols[j]);
    for (std::size_t r = 0; r < n; ++r) out[r * p + j] = miss[r] ? std::numeric_limits<double>::quiet_NaN() : vals[r];
  }
  return out;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::vector<double> predict_proba(const TrainedModel& model, const FeatureMatrix& X) {
  const auto cols = detail::align_columns(model.schema, X);
  const std::size_t n = X.rows(), p = cols.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  for (std::size_t j = 0; j < p; ++j) {
    const auto vals = X.column_values(cols[j]);
    const auto miss = X.column_missing(cols[j]);
    for (std::size_t r = 0; r < n; ++r) {
      if (!miss[r] && !std::isfinite(vals[r])) {
        throw NumericError("non-finite value in column '" + X.column(cols[j]).name + "' (sanitize the matrix first)");
      }
    }
  }
  switch (model.family) {
    case ModelFamily::logistic: {
      const auto& m = std::get<LinearModel>(model.params);
      const auto z = detail::standardized_rows(model.schema, X, cols);
      for (std::size_t r = 0; r < n; ++r) {
        double s = m.intercept;
        for (std::size_t j = 0; j < p; ++j) s += m.coef[j] * z[r * p + j];
        out[r] = detail::sigmoid(s);
      }
      break;
    }
    case ModelFamily::random_forest: {
      const auto& m = std::get<ForestModel>(model.params);
      const auto raw = row_major_raw(X, cols);
      for (std::size_t r = 0; r < n; ++r) {
        std::span<const double> row(raw.data() + r * p, p);
        double s = 0.0;
        for (const auto& t : m.trees) s += t.predict(row);
        out[r] = m.trees.empty() ? 0.0 : clamp01(s / static_cast<double>(m.trees.size()));
      }
      break;
    }
    case ModelFamily::gbdt: {
      const auto& m = std::get<GbdtModel>(model.params);
      if (m.trees.empty()) {
        std::fill(out.begin(), out.end(), m.base_rate);
        break;
      }
      const auto raw = row_major_raw(X, cols);
      for (std::size_t r = 0; r < n; ++r) {
        std::span<const double> row(raw.data() + r * p, p);
        double s = m.base_score;
        for (const auto& t : m.trees) s += t.predict(row);
        out[r] = detail::sigmoid(s);
      }
      break;
    }
    case ModelFamily::mlp: {
      const auto& m = std::get<MlpModel>(model.params);
      const auto z = detail::standardized_rows(model.schema, X, cols);
      MlpShape shape{m.other_columns.size(), m.rb_columns.size(), m.embed_width, m.hidden1, m.hidden2};
      const std::size_t w = shape.input_width();
      std::vector<double> x(n * w);
      for (std::size_t r = 0; r < n; ++r) {
        std::size_t k = 0;
        for (auto j : m.other_columns) x[r * w + k++] = z[r * p + j];
        for (auto j : m.rb_columns) x[r * w + k++] = z[r * p + j];
      }
      MlpNet net(shape);
      std::vector<double> logits(n);
      net.logits(m.params, x, n, logits);
      for (std::size_t r = 0; r < n; ++r) out[r] = detail::sigmoid(logits[r]);
      break;
    }
  }
  return out;
}

// ---- serialization -----------------------------------------------------------

namespace {

json trees_to_json(const std::vector<Tree>& trees) {
  json arr = json::array();
  for (const auto& t : trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      nodes.push_back(json::array({n.feature, n.threshold, n.missing_left, n.left, n.right, n.value}));
    }
    arr.push_back(std::move(nodes));
  }
  return arr;
}

std::vector<Tree> trees_from_json(const json& arr) {
  std::vector<Tree> trees;
  for (const auto& nodes : arr) {
    Tree t;
    for (const auto& n : nodes) {
      if (!n.is_array() || n.size() != 6) throw DataError("model file: malformed tree node");
      TreeNode node;
      node.feature = n[0].get<std::int32_t>();
      node.threshold = n[1].get<double>();
      node.missing_left = n[2].get<bool>();
      node.left = n[3].get<std::int32_t>();
      node.right = n[4].get<std::int32_t>();
      node.value = n[5].get<double>();
      t.nodes.push_back(node);
    }
    const auto size = static_cast<std::int32_t>(t.nodes.size());
    if (size == 0) throw DataError("model file: empty tree");
    for (const auto& node : t.nodes) {
      if (node.feature >= 0 && (node.left <= 0 || node.left >= size || node.right <= 0 || node.right >= size)) {
        throw DataError("model file: tree child index out of range");
      }
    }
    trees.push_back(std::move(t));
  }
  return trees;
}

}  // namespace

json model_to_json(const TrainedModel& model) {
  json cols = json::array();
  for (const auto& c : model.schema.columns) cols.push_back({{"name", c.name}, {"family", to_string(c.family)}});
  json j{{"format", kModelFormatVersion},
         {"family", to_string(model.family)},
         {"config", to_json(model.config)},
         {"schema",
          {{"columns", cols},
           {"impute", model.schema.impute},
           {"mean", model.schema.mean},
           {"scale", model.schema.scale}}}};
  json params;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          params = {{"coef", m.coef}, {"intercept", m.intercept}};
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          params = {{"trees", trees_to_json(m.trees)}};
        } else if constexpr (std::is_same_v<T, GbdtModel>) {
          params = {{"base_rate", m.base_rate}, {"base_score", m.base_score}, {"trees", trees_to_json(m.trees)}};
        } else {
          params = {{"embed_width", m.embed_width}, {"hidden1", m.hidden1},          {"hidden2", m.hidden2},
                    {"rb_columns", m.rb_columns},   {"other_columns", m.other_columns}, {"weights", m.params}};
        }
      },
      model.params);
  j["params"] = std::move(params);
  const auto& md = model.metadata;
  j["metadata"] = {{"seed", md.seed},
                   {"data_fingerprint", md.data_fingerprint},
                   {"rows", md.rows},
                   {"positives", md.positives},
                   {"iterations", md.iterations},
                   {"loss_history", md.loss_history}};
  return j;
}

TrainedModel model_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string()) != kModelFormatVersion) {
      throw DataError("model file: unsupported format (expected " + std::string(kModelFormatVersion) + ")");
    }
    TrainedModel m;
    const auto fam = parse_model_family(j.at("family").get<std::string>());
    if (!fam) throw DataError("model file: unknown family");
    m.family = *fam;
    m.config = model_config_from_json(j.at("config"));
    if (m.config.family != m.family) throw DataError("model file: family does not match config");
    const auto& s = j.at("schema");
    for (const auto& c : s.at("columns")) {
      const auto name = c.at("name").get<std::string>();
      const auto f = family_of(name);
      if (!f || to_string(*f) != c.at("family").get<std::string>()) {
        throw DataError("model file: bad column '" + name + "'");
      }
      m.schema.columns.push_back({name, *f});
    }
    m.schema.impute = s.at("impute").get<std::vector<double>>();
    m.schema.mean = s.at("mean").get<std::vector<double>>();
    m.schema.scale = s.at("scale").get<std::vector<double>>();
    const std::size_t p = m.schema.columns.size();
    if (m.schema.impute.size() != p || m.schema.mean.size() != p || m.schema.scale.size() != p) {
      throw DataError("model file: schema arrays disagree in length");
    }
    const auto& pj = j.at("params");
    auto check_features = [p](const std::vector<Tree>& trees) {
      for (const auto& t : trees) {
        for (const auto& n : t.nodes) {
          if (n.feature >= static_cast<std::int32_t>(p)) throw DataError("model file: split feature out of range");
        }
      }
    };
    switch (m.family) {
      case ModelFamily::logistic: {
        LinearModel lm{pj.at("coef").get<std::vector<double>>(), pj.at("intercept").get<double>()};
        if (lm.coef.size() != p) throw DataError("model file: coefficient count mismatch");
        m.params = std::move(lm);
        break;
      }
      case ModelFamily::random_forest: {
        ForestModel fm{trees_from_json(pj.at("trees"))};
        check_features(fm.trees);
        m.params = std::move(fm);
        break;
      }
      case ModelFamily::gbdt: {
        GbdtModel gm{pj.at("base_rate").get<double>(), pj.at("base_score").get<double>(), trees_from_json(pj.at("trees"))};
        check_features(gm.trees);
        m.params = std::move(gm);
        break;
      }
      case ModelFamily::mlp: {
        MlpModel mm;
        mm.embed_width = pj.at("embed_width").get<std::size_t>();
        mm.hidden1 = pj.at("hidden1").get<std::size_t>();
        mm.hidden2 = pj.at("hidden2").get<std::size_t>();
        mm.rb_columns = pj.at("rb_columns").get<std::vector<std::size_t>>();
        mm.other_columns = pj.at("other_columns").get<std::vector<std::size_t>>();
        mm.params = pj.at("weights").get<std::vector<double>>();
        MlpShape shape{mm.other_columns.size(), mm.rb_columns.size(), mm.embed_width, mm.hidden1, mm.hidden2};
        if (mm.params.size() != shape.param_count() || shape.input_width() != p) {
          throw DataError("model file: network dimensions do not match");
        }
        for (auto c : mm.rb_columns) {
          if (c >= p) throw DataError("model file: column index out of range");
        }
        for (auto c : mm.other_columns) {
          if (c >= p) throw DataError("model file: column index out of range");
        }
        m.params = std::move(mm);
        break;
      }
    }
    const auto& md = j.at("metadata");
    m.metadata.seed = md.at("seed").get<std::uint64_t>();
    m.metadata.data_fingerprint = md.at("data_fingerprint").get<std::string>();
    m.metadata.rows = md.at("rows").get<std::size_t>();
    m.metadata.positives = md.at("positives").get<std::size_t>();
    m.metadata.iterations = md.at("iterations").get<std::size_t>();
    m.metadata.loss_history = md.at("loss_history").get<std::vector<double>>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

}  // namespace brp
