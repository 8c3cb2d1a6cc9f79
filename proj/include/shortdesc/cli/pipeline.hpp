#pragma once

// File-based experiment pipeline behind the `shortdesc` command. Each command
// reads its predecessors' outputs from the output directory, writes its own
// under <out>/<command>/, and records a manifest.json there.
//
//   synth        synth/{corpus.jsonl, languages.json, dictionaries.jsonl, types.tsv}
//   stats        stats/{language_stats.csv, coverage.json}
//   split        split/splits.json
//   train        train/{vocab.json, <system>.json, timing.json}
//   generate     generate/<system>.jsonl, generate/summary.json
//   score        score/<system>.jsonl, score/summary.json
//   aggregate    aggregate/{table2.csv, table3.csv, pairwise.csv, bt_strengths.csv, outcomes.json}
//   propensity   propensity/{model.json, records.jsonl, weighted.csv, strata.csv}
//   sample-eval  sample-eval/{campaign.json, error_sample.json}
//   serve        serve/events.jsonl (HTTP server, blocking)
//   report       report/{report.md, kappa.csv, error_profile.csv}
//
// System names with '/' use '+' in file names ("no-desc/types" -> no-desc+types.jsonl).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shortdesc/analysis/propensity.hpp"
#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/corpus/synthetic.hpp"
#include "shortdesc/generator/train.hpp"
#include "shortdesc/metric/similarity.hpp"
#include "shortdesc/service/store.hpp"

namespace shortdesc::cli {

inline constexpr const char* kVersion = "0.1.0";

// Bad configuration or arguments (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A predecessor's output is missing (exit code 2). The message names the command to run.
class MissingInput : public std::runtime_error {
 public:
  MissingInput(const std::filesystem::path& path, const std::string& command)
      : std::runtime_error("missing " + path.string() + "; run `shortdesc " + command + "` first"),
        command_(command) {}
  const std::string& command() const { return command_; }

 private:
  std::string command_;
};

struct SampleSettings {
  std::string system = "full";
  std::string language;  // empty = first configured language
  std::size_t per_bin = 1;
  std::size_t bins = 10;
  std::size_t error_k = 20;
  std::string campaign_id = "campaign";
};

struct ServeSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<service::EntryQuestion> entry;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  std::optional<std::filesystem::path> corpus_path;  // JSONL; needs languages_path
  std::optional<std::filesystem::path> languages_path;
  std::optional<corpus::SyntheticSpec> synthetic;

  std::optional<std::filesystem::path> types_path;  // defaults to synth/types.tsv when synthetic
  std::size_t type_dim = 16;
  std::optional<std::filesystem::path> translator_path;  // defaults to synth/dictionaries.jsonl

  corpus::SplitSizes splits{400, 50, 50};
  std::size_t vocab_size = 5000;
  std::vector<std::string> systems;
  nlohmann::json model_overrides = nlohmann::json::object();
  generator::TrainOptions training;
  generator::DecodeOptions decode;
  std::string scorer = "full";
  metric::Weighting weighting = metric::Weighting::uniform;

  std::string propensity_system = "full";
  std::size_t propensity_bins = 10;
  analysis::Binning propensity_binning = analysis::Binning::quantile;

  SampleSettings sample;
  ServeSettings serve;
  std::optional<std::filesystem::path> error_labels;

  nlohmann::json source = nlohmann::json::object();  // as given, for the config hash

  // Relative paths resolve against base_dir. Unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;  // throws ConfigError
  std::string hash() const;
};

std::vector<std::string> model_system_names();     // generator presets
std::vector<std::string> baseline_system_names();  // "prefix", "translation"
std::vector<std::string> all_system_names();
bool is_model_system(const std::string& name);
std::string system_file_stem(const std::string& system);
generator::ModelConfig system_model_config(const ExperimentConfig& cfg, const std::string& system);

// Every command. `systems` restricts the systems a command touches (empty = config list).
void run_synth(const ExperimentConfig& cfg);
void run_stats(const ExperimentConfig& cfg);
void run_split(const ExperimentConfig& cfg);
void run_train(const ExperimentConfig& cfg, const std::vector<std::string>& systems = {});
void run_generate(const ExperimentConfig& cfg, const std::vector<std::string>& systems = {});
void run_score(const ExperimentConfig& cfg, const std::vector<std::string>& systems = {});
void run_aggregate(const ExperimentConfig& cfg, const std::vector<std::string>& systems = {});
void run_propensity(const ExperimentConfig& cfg);
void run_sample_eval(const ExperimentConfig& cfg);
void run_serve(const ExperimentConfig& cfg);
void run_report(const ExperimentConfig& cfg);

// Logging sink for progress lines (stderr by default).
void set_log(std::function<void(const std::string&)> sink);

}  // namespace shortdesc::cli
