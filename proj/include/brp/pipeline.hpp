#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "brp/experiment.hpp"
#include "brp/synth.hpp"
#include "brp/windows.hpp"
#include "json.hpp"

namespace brp {

inline constexpr std::string_view kToolVersion = "1.0.0";

struct PipelineConfig {
  std::filesystem::path output_dir = "brp_out";
  // Registry source: a directory with companies.csv, balance_sheets.csv and
  // filings.csv, or (when absent) a synthetic registry.
  std::optional<std::filesystem::path> input_dir;
  std::optional<int> horizon_year;
  SynthConfig synth;
  std::uint64_t synth_seed = 42;

  std::set<std::string> excluded_sectors{"finance"};
  bool drop_anomalous = true;

  FeatureConfig features;
  std::vector<int> windows{1, 2, 3};
  double split_fraction = 0.7;
  std::uint64_t split_seed = 7;
  bool group_by_company = false;
  SplitYears years;

  ExperimentConfig experiment;
  bool write_models = true;

  // Throws ConfigError; checks input paths exist.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
PipelineConfig default_pipeline_config();

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible ("3", "true", "[1,2]", "null") and taken as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// FNV-1a of the canonical config JSON, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

// Line-oriented "[stage] message" logging; progress lines only when verbose.
class StageLog {
 public:
  StageLog(std::ostream& out, bool verbose) : out_(out), verbose_(verbose) {}
  void set_verbose(bool v) noexcept { verbose_ = v; }
  void progress(std::string_view stage, std::string_view message);
  void warn(std::string_view stage, std::string_view message);
  void error(std::string_view stage, std::string_view message);

 private:
  std::ostream& out_;
  bool verbose_;
};

// Runs ingest/synth -> featurize -> select -> windows -> train -> evaluate and
// writes the artifact tree. Returns the process exit code (0, 2, 3 or 4).
int run_pipeline(const PipelineConfig& cfg, StageLog& log);

// One file per (family, feature set, window, split) that has a curve:
// roc_<family>_<featureset>_<W>y_<split>.csv. Returns the written paths.
std::vector<std::filesystem::path> emit_roc_csv(const AblationReport& report, const std::filesystem::path& dir);

// Exit code for an exception escaping a stage.
int exit_code_for(const std::exception& e) noexcept;

// Exclusive ownership of an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);  // throws ConfigError when held
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Small file helpers shared with the command-line tool.
void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace brp
