#include "shortdesc/cli/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "shortdesc/analysis/agreement.hpp"
#include "shortdesc/analysis/bradley_terry.hpp"
#include "shortdesc/analysis/reports.hpp"
#include "shortdesc/analysis/sampling.hpp"
#include "shortdesc/baselines/baselines.hpp"
#include "shortdesc/corpus/text.hpp"
#include "shortdesc/encoding/types.hpp"
#include "shortdesc/encoding/vocabulary.hpp"
#include "shortdesc/generator/checkpoint.hpp"
#include "shortdesc/kernels/kernels.hpp"
#include "shortdesc/service/campaign.hpp"
#include "shortdesc/service/http.hpp"

namespace shortdesc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::function<void(const std::string&)>& log_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& s) { std::cerr << s << '\n'; };
  return sink;
}

void log(const std::string& s) {
  if (log_sink()) log_sink()(s);
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Reads a predecessor output, naming the command that produces it when absent.
std::string require(const fs::path& path, const std::string& command) {
  if (!fs::exists(path)) throw MissingInput(path, command);
  return slurp(path);
}

fs::path command_dir(const ExperimentConfig& cfg, const std::string& command) { return cfg.out / command; }

class Manifest {
 public:
  Manifest(const ExperimentConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {
    fs::create_directories(command_dir(cfg_, command_));
  }

  void input(const fs::path& p) { inputs_[relative(p)] = fnv1a_hex(slurp(p)); }
  void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = command_dir(cfg_, command_) / name;
    fs::create_directories(p.parent_path());
    analysis::write_text(p.string(), content);
    outputs_[relative(p)] = fnv1a_hex(content);
  }
  void note(const std::string& key, json value) { notes_[key] = std::move(value); }

  void finish() {
    seeds_["seed"] = cfg_.seed;
    json j{{"command", command_},
           {"config_hash", cfg_.hash()},
           {"seeds", seeds_},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"versions",
            {{"shortdesc", kVersion},
             {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
             {"kernels", std::string(kernels::isa_name(kernels::active().isa))}}}};
    if (!notes_.empty()) j["notes"] = notes_;
    analysis::write_text((command_dir(cfg_, command_) / "manifest.json").string(), j.dump(2) + "\n");
  }

 private:
  std::string relative(const fs::path& p) const {
    const fs::path rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(cfg_.out));
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
  }

  const ExperimentConfig& cfg_;
  std::string command_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::map<std::string, std::uint64_t> seeds_;
  json notes_ = json::object();
};

// ---- configuration ------------------------------------------------------

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

template <class T>
T get(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

corpus::SyntheticSpec parse_synthetic(const json& j) {
  const std::string w = "synthetic";
  check_keys(j, w,
             {"n_entities", "languages", "vocab_size", "n_types", "missing_article_rate", "missing_description_rate",
              "missing_type_rate", "filler_words", "type_in_article", "max_description_languages"});
  corpus::SyntheticSpec s;
  s.n_entities = get(j, "n_entities", s.n_entities, w);
  s.languages = get(j, "languages", s.languages, w);
  s.vocab_size = get(j, "vocab_size", s.vocab_size, w);
  s.n_types = get(j, "n_types", s.n_types, w);
  s.missing_article_rate = get(j, "missing_article_rate", s.missing_article_rate, w);
  // Experiments default to some undescribed articles so that coverage and
  // propensity have both classes to work with.
  s.missing_description_rate = get(j, "missing_description_rate", std::vector<double>(s.languages.size(), 0.2), w);
  s.missing_type_rate = get(j, "missing_type_rate", s.missing_type_rate, w);
  s.filler_words = get(j, "filler_words", s.filler_words, w);
  s.type_in_article = get(j, "type_in_article", s.type_in_article, w);
  s.max_description_languages = get(j, "max_description_languages", s.max_description_languages, w);
  return s;
}

}  // namespace

void set_log(std::function<void(const std::string&)> sink) { log_sink() = std::move(sink); }

std::vector<std::string> model_system_names() { return generator::ModelConfig::preset_names(); }
std::vector<std::string> baseline_system_names() { return {"prefix", "translation"}; }

std::vector<std::string> all_system_names() {
  std::vector<std::string> all = model_system_names();
  for (const std::string& b : baseline_system_names()) all.push_back(b);
  return all;
}

bool is_model_system(const std::string& name) {
  const auto names = model_system_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::string system_file_stem(const std::string& system) {
  std::string s = system;
  std::replace(s.begin(), s.end(), '/', '+');
  return s;
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "config",
             {"seed", "out", "corpus", "synthetic", "types", "translator", "splits", "vocab_size", "systems", "model",
              "training", "decode", "metric", "propensity", "sample", "serve", "error_analysis"});
  ExperimentConfig c;
  c.source = j;
  c.seed = get(j, "seed", c.seed, "config");
  c.out = resolve(base_dir, get(j, "out", std::string("out"), "config"));

  if (j.contains("corpus")) {
    const json& cj = j.at("corpus");
    check_keys(cj, "corpus", {"path", "languages"});
    if (!cj.contains("path") || !cj.contains("languages"))
      throw ConfigError("corpus needs both \"path\" and \"languages\"");
    c.corpus_path = resolve(base_dir, get(cj, "path", std::string(), "corpus"));
    c.languages_path = resolve(base_dir, get(cj, "languages", std::string(), "corpus"));
  }
  if (j.contains("synthetic")) c.synthetic = parse_synthetic(j.at("synthetic"));

  if (j.contains("types")) {
    const json& t = j.at("types");
    check_keys(t, "types", {"path", "dim"});
    if (t.contains("path")) c.types_path = resolve(base_dir, get(t, "path", std::string(), "types"));
    c.type_dim = get(t, "dim", c.type_dim, "types");
  }
  if (j.contains("translator")) {
    const json& t = j.at("translator");
    check_keys(t, "translator", {"path"});
    c.translator_path = resolve(base_dir, get(t, "path", std::string(), "translator"));
  }
  if (j.contains("splits")) {
    const json& s = j.at("splits");
    check_keys(s, "splits", {"train", "valid", "test"});
    c.splits.train = get(s, "train", c.splits.train, "splits");
    c.splits.valid = get(s, "valid", c.splits.valid, "splits");
    c.splits.test = get(s, "test", c.splits.test, "splits");
  }
  c.vocab_size = get(j, "vocab_size", c.vocab_size, "config");
  c.systems = get(j, "systems", all_system_names(), "config");
  if (j.contains("model")) {
    c.model_overrides = j.at("model");
    check_keys(c.model_overrides, "model",
               {"d_model", "layers", "heads", "encoder_layers", "encoder_heads", "ff_mult", "max_positions", "d_desc",
                "desc_layers", "desc_heads", "max_output_tokens"});
  }
  if (j.contains("training")) {
    const json& t = j.at("training");
    check_keys(t, "training", {"epochs", "batch_size", "learning_rate", "clip_norm", "max_valid"});
    c.training.epochs = get(t, "epochs", c.training.epochs, "training");
    c.training.batch_size = get(t, "batch_size", c.training.batch_size, "training");
    c.training.learning_rate = get(t, "learning_rate", c.training.learning_rate, "training");
    c.training.clip_norm = get(t, "clip_norm", c.training.clip_norm, "training");
    c.training.max_valid = get(t, "max_valid", c.training.max_valid, "training");
  }
  if (j.contains("decode")) {
    check_keys(j.at("decode"), "decode", {"beam"});
    c.decode.beam = get(j.at("decode"), "beam", c.decode.beam, "decode");
  }
  if (j.contains("metric")) {
    const json& m = j.at("metric");
    check_keys(m, "metric", {"scorer", "weighting"});
    c.scorer = get(m, "scorer", c.scorer, "metric");
    const std::string w = get(m, "weighting", std::string("uniform"), "metric");
    if (w == "uniform") {
      c.weighting = metric::Weighting::uniform;
    } else if (w == "idf") {
      c.weighting = metric::Weighting::idf;
    } else {
      throw ConfigError("metric.weighting must be \"uniform\" or \"idf\"");
    }
  }
  if (j.contains("propensity")) {
    const json& p = j.at("propensity");
    check_keys(p, "propensity", {"system", "bins", "binning"});
    c.propensity_system = get(p, "system", c.propensity_system, "propensity");
    c.propensity_bins = get(p, "bins", c.propensity_bins, "propensity");
    const std::string b = get(p, "binning", std::string("quantile"), "propensity");
    if (b == "quantile") {
      c.propensity_binning = analysis::Binning::quantile;
    } else if (b == "equal_width") {
      c.propensity_binning = analysis::Binning::equal_width;
    } else {
      throw ConfigError("propensity.binning must be \"quantile\" or \"equal_width\"");
    }
  }
  if (j.contains("sample")) {
    const json& s = j.at("sample");
    check_keys(s, "sample", {"system", "language", "per_bin", "bins", "error_k", "campaign_id"});
    c.sample.system = get(s, "system", c.sample.system, "sample");
    c.sample.language = get(s, "language", c.sample.language, "sample");
    c.sample.per_bin = get(s, "per_bin", c.sample.per_bin, "sample");
    c.sample.bins = get(s, "bins", c.sample.bins, "sample");
    c.sample.error_k = get(s, "error_k", c.sample.error_k, "sample");
    c.sample.campaign_id = get(s, "campaign_id", c.sample.campaign_id, "sample");
  }
  if (j.contains("serve")) {
    const json& s = j.at("serve");
    check_keys(s, "serve", {"host", "port", "entry"});
    c.serve.host = get(s, "host", c.serve.host, "serve");
    c.serve.port = get(s, "port", c.serve.port, "serve");
    if (s.contains("entry")) {
      const json& e = s.at("entry");
      check_keys(e, "serve.entry", {"question", "options", "answer"});
      service::EntryQuestion q;
      q.question = get(e, "question", std::string(), "serve.entry");
      q.options = get(e, "options", std::vector<std::string>{}, "serve.entry");
      q.answer = get(e, "answer", std::string(), "serve.entry");
      c.serve.entry = q;
    }
  }
  if (j.contains("error_analysis")) {
    const json& e = j.at("error_analysis");
    check_keys(e, "error_analysis", {"labels"});
    c.error_labels = resolve(base_dir, get(e, "labels", std::string(), "error_analysis"));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void ExperimentConfig::validate() const {
  if (corpus_path && synthetic) throw ConfigError("give either \"corpus\" or \"synthetic\", not both");
  if (!corpus_path && !synthetic) throw ConfigError("config needs a \"corpus\" or a \"synthetic\" section");
  if (corpus_path && !fs::exists(*corpus_path)) throw ConfigError("corpus not found: " + corpus_path->string());
  if (languages_path && !fs::exists(*languages_path))
    throw ConfigError("language config not found: " + languages_path->string());
  if (types_path && !fs::exists(*types_path)) throw ConfigError("type table not found: " + types_path->string());
  if (translator_path && !fs::exists(*translator_path))
    throw ConfigError("translator dictionaries not found: " + translator_path->string());
  if (error_labels && !fs::exists(*error_labels)) throw ConfigError("error labels not found: " + error_labels->string());
  if (systems.empty()) throw ConfigError("systems must not be empty");
  std::set<std::string> seen;
  for (const std::string& s : systems) {
    const auto all = all_system_names();
    if (std::find(all.begin(), all.end(), s) == all.end()) throw ConfigError("unknown system \"" + s + "\"");
    if (!seen.insert(s).second) throw ConfigError("system \"" + s + "\" listed twice");
  }
  if (!is_model_system(scorer)) throw ConfigError("metric.scorer must name a model system");
  if (type_dim == 0) throw ConfigError("types.dim must be positive");
  if (splits.train == 0) throw ConfigError("splits.train must be positive");
  if (training.epochs == 0 || training.batch_size == 0) throw ConfigError("training epochs and batch_size must be positive");
  if (!(training.learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
  if (decode.beam == 0 || decode.beam > 5) throw ConfigError("decode.beam must be in 1..5");
  if (sample.bins == 0 || sample.per_bin * sample.bins < service::kRealItemsPerBatch)
    throw ConfigError("sample.per_bin * sample.bins must be at least 9");
  if (serve.port < 0 || serve.port > 65535) throw ConfigError("serve.port out of range");
  if (propensity_bins == 0) throw ConfigError("propensity.bins must be positive");
  for (const std::string& s : systems)
    if (is_model_system(s)) {
      try {
        system_model_config(*this, s);
      } catch (const std::invalid_argument& e) {
        throw ConfigError("model configuration for " + s + ": " + e.what());
      }
    }
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(source.dump()); }

generator::ModelConfig system_model_config(const ExperimentConfig& cfg, const std::string& system) {
  json j = generator::ModelConfig::preset(system).to_json();
  for (const auto& [key, value] : cfg.model_overrides.items()) j[key] = value;
  j["d_type"] = cfg.type_dim;
  j["seed"] = cfg.seed;
  try {
    return generator::ModelConfig::from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("model overrides: " + std::string(e.what()));
  }
}

// ---- shared loading -----------------------------------------------------

namespace {

struct CorpusBundle {
  corpus::Corpus corpus;
  corpus::LanguageConfig languages;
};

CorpusBundle load_corpus_bundle(const ExperimentConfig& cfg, Manifest& m) {
  CorpusBundle b;
  fs::path corpus_file, languages_file;
  if (cfg.corpus_path) {
    corpus_file = *cfg.corpus_path;
    languages_file = *cfg.languages_path;
  } else {
    corpus_file = cfg.out / "synth" / "corpus.jsonl";
    languages_file = cfg.out / "synth" / "languages.json";
    if (!fs::exists(corpus_file)) throw MissingInput(corpus_file, "synth");
    if (!fs::exists(languages_file)) throw MissingInput(languages_file, "synth");
  }
  b.languages = corpus::LanguageConfig::from_json_text(slurp(languages_file));
  corpus::LoadResult r = corpus::load_corpus(corpus_file, b.languages);
  for (const corpus::Diagnostic& d : r.warnings)
    log("corpus line " + std::to_string(d.line) + " (" + d.entity_id + "): " + d.message);
  b.corpus = std::move(r.corpus);
  m.input(corpus_file);
  m.input(languages_file);
  return b;
}

corpus::SplitSpec load_splits(const ExperimentConfig& cfg, Manifest& m) {
  const fs::path p = cfg.out / "split" / "splits.json";
  corpus::SplitSpec s = corpus::SplitSpec::from_json_text(require(p, "split"));
  m.input(p);
  return s;
}

encoding::TypeEmbeddingTable load_types(const ExperimentConfig& cfg, Manifest& m) {
  fs::path p;
  if (cfg.types_path) {
    p = *cfg.types_path;
  } else if (cfg.synthetic) {
    p = cfg.out / "synth" / "types.tsv";
    if (!fs::exists(p)) throw MissingInput(p, "synth");
  } else {
    return encoding::TypeEmbeddingTable(cfg.type_dim);
  }
  encoding::TypeEmbeddingTable t = encoding::TypeEmbeddingTable::parse(slurp(p));
  m.input(p);
  if (t.size() > 0 && t.dim() != cfg.type_dim)
    throw ConfigError("type table " + p.string() + " has dimension " + std::to_string(t.dim()) + ", config says " +
                      std::to_string(cfg.type_dim));
  return t;
}

generator::TrainedModel load_model(const ExperimentConfig& cfg, const std::string& system, Manifest& m) {
  const fs::path p = cfg.out / "train" / (system_file_stem(system) + ".json");
  if (!fs::exists(p)) throw MissingInput(p, "train --systems " + system);
  m.input(p);
  return generator::load_checkpoint(p);
}

std::vector<std::string> selected(const ExperimentConfig& cfg, const std::vector<std::string>& requested) {
  if (requested.empty()) return cfg.systems;
  for (const std::string& s : requested) {
    const auto all = all_system_names();
    if (std::find(all.begin(), all.end(), s) == all.end()) throw ConfigError("unknown system \"" + s + "\"");
  }
  return requested;
}

std::vector<generator::GenerationResult> read_generations(const fs::path& p) {
  std::vector<generator::GenerationResult> out;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(generator::GenerationResult::from_json(json::parse(line)));
  return out;
}

std::vector<metric::ScoreRecord> load_scores(const ExperimentConfig& cfg, const std::string& system, Manifest& m) {
  const fs::path p = cfg.out / "score" / (system_file_stem(system) + ".jsonl");
  if (!fs::exists(p)) throw MissingInput(p, "score --systems " + system);
  m.input(p);
  return metric::read_scores(p);
}

corpus::Corpus subset(const corpus::Corpus& c, const std::vector<std::string>& ids) {
  corpus::Corpus out;
  for (const std::string& id : ids) out.emplace(id, c.at(id));
  return out;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string s;
  for (const json& r : rows) s += r.dump() + "\n";
  return s;
}

std::unique_ptr<baselines::ToyTranslator> load_translator(const ExperimentConfig& cfg, Manifest& m) {
  fs::path p;
  if (cfg.translator_path) {
    p = *cfg.translator_path;
  } else if (cfg.synthetic) {
    p = cfg.out / "synth" / "dictionaries.jsonl";
    if (!fs::exists(p)) throw MissingInput(p, "synth");
  } else {
    throw ConfigError("the translation system needs a \"translator\" section");
  }
  m.input(p);
  return std::make_unique<baselines::ToyTranslator>(baselines::ToyTranslator::load(p));
}

}  // namespace

// ---- commands -----------------------------------------------------------

void run_synth(const ExperimentConfig& cfg) {
  if (!cfg.synthetic) throw ConfigError("synth needs a \"synthetic\" section in the config");
  Manifest m(cfg, "synth");
  corpus::SyntheticSpec spec = *cfg.synthetic;
  spec.seed = cfg.seed;
  const corpus::SyntheticCorpus sc = corpus::generate_synthetic_corpus(spec);

  std::string lines;
  for (const auto& [id, e] : sc.corpus) lines += corpus::entity_to_json_line(e) + "\n";
  m.write("corpus.jsonl", lines);
  m.write("languages.json", sc.config.to_json_text() + "\n");
  const fs::path dict = command_dir(cfg, "synth") / "dictionaries.jsonl";
  baselines::ToyTranslator::save(sc.dictionaries, dict);
  m.write("dictionaries.jsonl", slurp(dict));
  const std::uint64_t type_seed = cfg.seed ^ 0x7479706573ULL;
  m.seed("types", type_seed);
  m.write("types.tsv", encoding::TypeEmbeddingTable::random(sc.type_ids, cfg.type_dim, type_seed).serialize());
  m.note("entities", sc.corpus.size());
  m.finish();
  log("synth: " + std::to_string(sc.corpus.size()) + " entities");
}

void run_stats(const ExperimentConfig& cfg) {
  Manifest m(cfg, "stats");
  const CorpusBundle b = load_corpus_bundle(cfg, m);
  const auto stats = corpus::compute_language_stats(b.corpus, b.languages);
  m.write("language_stats.csv", analysis::language_stats_csv(stats, b.languages));
  const corpus::CoverageDistribution cov = corpus::language_coverage_distribution(b.corpus);
  m.write("coverage.json", json{{"articles", cov.articles},
                                {"descriptions", cov.descriptions},
                                {"articles_multi_fraction", cov.articles_multi_fraction},
                                {"descriptions_multi_fraction", cov.descriptions_multi_fraction},
                                {"typed_fraction", cov.typed_fraction}}
                                   .dump(2) +
                               "\n");
  m.finish();
}

void run_split(const ExperimentConfig& cfg) {
  Manifest m(cfg, "split");
  const CorpusBundle b = load_corpus_bundle(cfg, m);
  const corpus::SplitSpec s = corpus::build_splits(b.corpus, cfg.splits, cfg.seed);
  m.seed("split", cfg.seed);
  m.write("splits.json", s.to_json_text() + "\n");
  m.finish();
}

void run_train(const ExperimentConfig& cfg, const std::vector<std::string>& requested) {
  Manifest m(cfg, "train");
  const CorpusBundle b = load_corpus_bundle(cfg, m);
  const corpus::SplitSpec splits = load_splits(cfg, m);
  const encoding::TypeEmbeddingTable types = load_types(cfg, m);
  const encoding::Vocabulary vocab = encoding::build_vocab(b.corpus, b.languages.codes(), cfg.vocab_size, splits.train_ids);
  m.write("vocab.json", vocab.to_json_text() + "\n");

  json timing = json::object();
  const fs::path timing_path = command_dir(cfg, "train") / "timing.json";
  if (fs::exists(timing_path)) timing = json::parse(slurp(timing_path));
  for (const std::string& system : selected(cfg, requested)) {
    if (!is_model_system(system)) continue;
    generator::TrainOptions opt = cfg.training;
    opt.seed = cfg.seed;
    opt.progress = [&](const std::string& s) { log("train " + system + ": " + s); };
    const auto t0 = std::chrono::steady_clock::now();
    const generator::TrainedModel model =
        generator::train(b.corpus, splits, system_model_config(cfg, system), opt, vocab, types);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const fs::path p = command_dir(cfg, "train") / (system_file_stem(system) + ".json");
    generator::save_checkpoint(model, p);
    m.write(system_file_stem(system) + ".json", slurp(p));
    json epochs = json::array();
    for (const generator::TrainingLog& l : model.logs())
      for (const generator::EpochRecord& r : l.epochs) epochs.push_back({{"language", l.language}, {"epoch", r.epoch}, {"seconds", r.seconds}});
    timing[system] = json{{"seconds", secs}, {"epochs", epochs}};
    log("train " + system + ": " + std::to_string(secs) + " s");
  }
  m.seed("training", cfg.seed);
  // Wall-clock timings are informational and excluded from the output hashes.
  analysis::write_text(timing_path.string(), timing.dump(2) + "\n");
  m.finish();
}

void run_generate(const ExperimentConfig& cfg, const std::vector<std::string>& requested) {
  Manifest m(cfg, "generate");
  const CorpusBundle b = load_corpus_bundle(cfg, m);
  const corpus::SplitSpec splits = load_splits(cfg, m);
  json summary = json::object();
  const fs::path summary_path = command_dir(cfg, "generate") / "summary.json";
  if (fs::exists(summary_path)) summary = json::parse(slurp(summary_path));

  for (const std::string& system : selected(cfg, requested)) {
    std::function<std::optional<generator::GenerationResult>(const corpus::Entity&, const std::string&)> produce;
    std::optional<generator::TrainedModel> model;
    std::unique_ptr<baselines::ToyTranslator> translator;
    std::map<std::string, corpus::LanguageStats> stats;
    std::map<std::string, double> ranking;
    if (is_model_system(system)) {
      model.emplace(load_model(cfg, system, m));
      produce = [&](const corpus::Entity& e, const std::string& lang) -> std::optional<generator::GenerationResult> {
        try {
          return generator::generate(*model, e, lang, cfg.decode);
        } catch (const generator::NotApplicable&) {
          return std::nullopt;
        }
      };
    } else {
      auto wrap = [](const corpus::Entity& e, const std::string& lang, std::optional<std::string> text) {
        std::optional<generator::GenerationResult> r;
        if (!text) return r;
        r.emplace();
        r->id = e.id;
        r->target_language = lang;
        r->text = *text;
        r->terminated = true;
        return r;
      };
      if (system == "prefix") {
        // Average description lengths come from the training split only.
        stats = baselines::stats_by_language(
            corpus::compute_language_stats(subset(b.corpus, splits.train_ids), b.languages));
        produce = [&, wrap](const corpus::Entity& e, const std::string& lang) {
          return wrap(e, lang, baselines::prefix_description(e, lang, stats, b.languages));
        };
      } else {
        translator = load_translator(cfg, m);
        ranking = baselines::article_count_ranking(b.corpus);
        produce = [&, wrap](const corpus::Entity& e, const std::string& lang) {
          return wrap(e, lang, baselines::translation_description(e, lang, *translator, ranking));
        };
      }
    }

    std::vector<json> rows;
    std::size_t instances = 0;
    for (const std::string& id : splits.test_ids) {
      const corpus::Entity& e = b.corpus.at(id);
      for (const auto& [lang, _] : e.descriptions) {
        ++instances;
        if (auto r = produce(e, lang)) rows.push_back(r->to_json());
      }
    }
    m.write(system_file_stem(system) + ".jsonl", jsonl(rows));
    summary[system] = json{{"instances", instances}, {"produced", rows.size()}, {"not_applicable", instances - rows.size()}};
    log("generate " + system + ": " + std::to_string(rows.size()) + "/" + std::to_string(instances));
  }
  m.write("summary.json", summary.dump(2) + "\n");
  m.finish();
}

void run_score(const ExperimentConfig& cfg, const std::vector<std::string>& requested) {
  Manifest m(cfg, "score");
  const CorpusBundle b = load_corpus_bundle(cfg, m);
  const corpus::SplitSpec splits = load_splits(cfg, m);
  const generator::TrainedModel scorer = load_model(cfg, cfg.scorer, m);
  if (scorer.members().size() != 1 || !scorer.members().begin()->second->description_encoder())
    throw ConfigError("metric.scorer " + cfg.scorer + " has no shared description encoder");
  const generator::DescriptionModel& sm = *scorer.members().begin()->second;
  const metric::EncoderEmbedder embedder(*sm.description_encoder(), sm.vocab());

  metric::IdfTable idf;
  metric::SimilarityOptions opts;
  opts.weighting = cfg.weighting;
  if (cfg.weighting == metric::Weighting::idf) {
    std::vector<std::vector<std::string>> docs;
    for (const std::string& id : splits.train_ids)
      for (const auto& [lang, d] : b.corpus.at(id).descriptions) docs.push_back(corpus::split_words(d.text));
    idf = metric::compute_idf(docs);
    opts.idf = &idf;
  }

  json summary = json::object();
  const fs::path summary_path = command_dir(cfg, "score") / "summary.json";
  if (fs::exists(summary_path)) summary = json::parse(slurp(summary_path));
  for (const std::string& system : selected(cfg, requested)) {
    const fs::path gp = cfg.out / "generate" / (system_file_stem(system) + ".jsonl");
    if (!fs::exists(gp)) throw MissingInput(gp, "generate --systems " + system);
    m.input(gp);
    generator::FilterResult filtered = generator::filter_truncated(read_generations(gp));
    std::vector<metric::ScoreRecord> records;
    std::size_t empty = 0;
    for (const generator::GenerationResult& r : filtered.kept) {
      const std::string& reference = b.corpus.at(r.id).descriptions.at(r.target_language).text;
      double score = 0.0;
      // An empty output has no tokens to transport; it gets the lowest score.
      if (corpus::split_words(r.text).empty()) {
        ++empty;
      } else {
        score = metric::similarity(r.text, reference, embedder, opts);
      }
      records.push_back({r.id, r.target_language, system, score});
    }
    const fs::path sp = command_dir(cfg, "score") / (system_file_stem(system) + ".jsonl");
    metric::write_scores(records, sp);
    m.write(system_file_stem(system) + ".jsonl", slurp(sp));
    summary[system] = json{{"scored", records.size()},
                           {"dropped_truncated", filtered.dropped},
                           {"dropped_fraction", filtered.dropped_fraction},
                           {"empty_outputs", empty}};
    log("score " + system + ": " + std::to_string(records.size()) + " instances");
  }
  m.write("summary.json", summary.dump(2) + "\n");
  m.finish();
}

void run_aggregate(const ExperimentConfig& cfg, const std::vector<std::string>& requested) {
  Manifest m(cfg, "aggregate");
  const std::vector<std::string> systems = selected(cfg, requested);
  std::vector<analysis::SystemMeans> means;
  std::vector<analysis::InstanceScores> scores;
  for (const std::string& system : systems) {
    const std::vector<metric::ScoreRecord> records = load_scores(cfg, system, m);
    if (records.empty()) {
      // Every output was truncated or the system never applied; it shares no instances.
      means.push_back({system, {}, {}, std::nan(""), 0});
      scores.emplace_back();
      continue;
    }
    const metric::CorpusAverage avg = metric::corpus_average(records);
    means.push_back({system, avg.per_language, avg.counts, avg.pooled, avg.instances.size()});
    scores.push_back(avg.instances);
  }
  m.write("table2.csv", analysis::system_means_csv(means));

  const analysis::OutcomeMatrix outcomes = analysis::build_outcomes(systems, scores);
  json doc{{"outcomes", outcomes.to_json()}};
  try {
    const analysis::BTScores bt = analysis::fit_bradley_terry(outcomes);
    m.write("table3.csv", analysis::bt_matrix_csv(outcomes, bt));
    m.write("pairwise.csv", analysis::pairwise_csv(analysis::pairwise_table(outcomes, bt)));
    m.write("bt_strengths.csv", analysis::bt_strengths_csv(bt));
    doc["bradley_terry"] = json{{"systems", bt.systems}, {"strength", bt.strength}, {"iterations", bt.iterations}};
  } catch (const analysis::BTError& e) {
    // No finite maximum-likelihood solution; win counts and sign tests are still reported.
    std::vector<analysis::PairwiseCell> cells;
    for (std::size_t i = 0; i < outcomes.size(); ++i)
      for (std::size_t j = 0; j < outcomes.size(); ++j) {
        if (i == j) continue;
        analysis::PairwiseCell c;
        c.row = outcomes.systems[i];
        c.col = outcomes.systems[j];
        c.bt_probability = std::nan("");
        c.wins = outcomes.wins[i][j];
        c.losses = outcomes.wins[j][i];
        c.ties = outcomes.ties[i][j];
        c.win_fraction = c.wins + c.losses ? static_cast<double>(c.wins) / static_cast<double>(c.wins + c.losses)
                                           : std::nan("");
        c.sign_p = c.wins + c.losses ? analysis::sign_test(c.wins, c.losses) : 1.0;
        c.significant = c.sign_p < 0.05;
        cells.push_back(c);
      }
    m.write("pairwise.csv", analysis::pairwise_csv(cells));
    m.write("table3.csv", std::string("# Bradley-Terry fit failed: ") + e.what() + "\n");
    doc["bradley_terry"] = json{{"error", e.what()}};
  }
  m.write("outcomes.json", doc.dump(2) + "\n");
  m.finish();
}

void run_propensity(const ExperimentConfig& cfg) {
  Manifest m(cfg, "propensity");
  const CorpusBundle b = load_corpus_bundle(cfg, m);
  std::vector<std::pair<std::string, bool>> labeled;
  for (const auto& [id, e] : b.corpus)
    for (const auto& [lang, a] : e.articles) labeled.emplace_back(a.first_paragraph, e.descriptions.contains(lang));
  analysis::PropensityModel model;
  try {
    model = analysis::train_propensity(labeled);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("propensity model cannot be trained: ") + e.what());
  }
  m.write("model.json", model.to_json().dump() + "\n");

  const auto records = load_scores(cfg, cfg.propensity_system, m);
  std::vector<json> rows;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_lang;  // scores, weights
  std::vector<double> all_p, all_s, all_w;
  for (const metric::ScoreRecord& r : records) {
    const corpus::Entity& e = b.corpus.at(r.id);
    auto a = e.articles.find(r.lang);
    if (a == e.articles.end()) continue;  // no article to estimate from
    const analysis::PropensityRecord pr =
        analysis::make_propensity_record(r.id + "|" + r.lang, model.predict(a->second.first_paragraph));
    rows.push_back({{"id", r.id}, {"lang", r.lang}, {"p", pr.p}, {"weight", pr.weight}, {"score", r.score}});
    by_lang[r.lang].first.push_back(r.score);
    by_lang[r.lang].second.push_back(pr.weight);
    all_p.push_back(pr.p);
    all_s.push_back(r.score);
    all_w.push_back(pr.weight);
  }
  m.write("records.jsonl", jsonl(rows));
  std::string csv = "language,n,unweighted,weighted\n";
  auto line = [&](const std::string& lang, const std::vector<double>& s, const std::vector<double>& w) {
    csv += lang + "," + std::to_string(s.size()) + "," +
           analysis::format_number(analysis::weighted_mean(s, std::vector<double>(s.size(), 1.0))) + "," +
           analysis::format_number(analysis::weighted_mean(s, w)) + "\n";
  };
  for (const auto& [lang, sw] : by_lang) line(lang, sw.first, sw.second);
  if (!all_s.empty()) line("all", all_s, all_w);
  m.write("weighted.csv", csv);
  if (!all_s.empty())
    m.write("strata.csv", analysis::strata_csv(analysis::stratify(all_p, all_s, std::min(cfg.propensity_bins, all_s.size()),
                                                                  cfg.propensity_binning)));
  m.finish();
}

void run_sample_eval(const ExperimentConfig& cfg) {
  Manifest m(cfg, "sample-eval");
  const CorpusBundle b = load_corpus_bundle(cfg, m);
  const corpus::SplitSpec splits = load_splits(cfg, m);
  const std::string lang = cfg.sample.language.empty() ? b.languages.codes().at(0) : cfg.sample.language;
  if (!b.languages.contains(lang)) throw ConfigError("sample.language " + lang + " is not configured");

  const fs::path gp = cfg.out / "generate" / (system_file_stem(cfg.sample.system) + ".jsonl");
  if (!fs::exists(gp)) throw MissingInput(gp, "generate --systems " + cfg.sample.system);
  m.input(gp);
  std::map<std::string, std::string> generated, gold;
  for (const generator::GenerationResult& r : read_generations(gp)) {
    if (r.target_language != lang || !r.terminated) continue;
    const corpus::Entity& e = b.corpus.at(r.id);
    if (!e.articles.contains(lang)) continue;  // raters are shown the target-language article
    generated[r.id] = r.text;
    gold[r.id] = e.descriptions.at(lang).text;
  }
  const corpus::DedupResult dedup = corpus::dedup_exact_matches(generated, gold);
  std::map<std::string, double> score_of;
  for (const metric::ScoreRecord& r : load_scores(cfg, cfg.sample.system, m))
    if (r.lang == lang) score_of[r.id] = r.score;
  std::vector<std::pair<std::string, double>> pool;
  for (const std::string& id : dedup.surviving_ids)
    if (score_of.contains(id)) pool.emplace_back(id, score_of.at(id));

  if (pool.empty())
    throw std::runtime_error("sample-eval: " + cfg.sample.system + " has no terminated outputs in " + lang +
                             " that differ from the reference");
  util::Rng rng(cfg.seed);
  std::vector<std::string> ids;
  try {
    ids = analysis::stratified_sample_by_metric(pool, cfg.sample.per_bin, std::min(cfg.sample.bins, pool.size()), rng);
  } catch (const analysis::SamplingError& e) {
    throw std::runtime_error(std::string("sample-eval: ") + e.what());
  }
  std::vector<service::CampaignInput> items;
  for (const std::string& id : ids)
    items.push_back({id, b.corpus.at(id).articles.at(lang).first_paragraph, generated.at(id), gold.at(id), score_of.at(id)});
  std::vector<service::HoneypotSource> honeypots;
  for (const std::string& id : splits.train_ids) {
    const corpus::Entity& e = b.corpus.at(id);
    if (e.articles.contains(lang) && e.descriptions.contains(lang))
      honeypots.push_back({id, e.articles.at(lang).first_paragraph, e.descriptions.at(lang).text});
  }
  const service::Campaign campaign = service::create_campaign(cfg.sample.campaign_id, items, lang, honeypots, cfg.seed);
  m.seed("campaign", cfg.seed);
  m.write("campaign.json", campaign.to_json().dump(2) + "\n");

  // Diverse subset of surviving outputs for manual error analysis.
  const generator::TrainedModel scorer = load_model(cfg, cfg.scorer, m);
  const generator::DescriptionModel& sm = *scorer.members().begin()->second;
  json error_sample = json::array();
  if (sm.description_encoder() && !dedup.surviving_ids.empty()) {
    const metric::EncoderEmbedder embedder(*sm.description_encoder(), sm.vocab());
    std::vector<std::vector<double>> points;
    std::vector<std::string> point_ids;
    for (const std::string& id : dedup.surviving_ids) {
      const auto tokens = corpus::split_words(generated.at(id));
      if (tokens.empty()) continue;
      const nn::Matrix emb = embedder.embed(tokens);
      std::vector<double> mean(emb.cols(), 0.0);
      for (std::size_t r = 0; r < emb.rows(); ++r)
        for (std::size_t c = 0; c < emb.cols(); ++c) mean[c] += emb(r, c) / static_cast<double>(emb.rows());
      points.push_back(std::move(mean));
      point_ids.push_back(id);
    }
    util::Rng krng(cfg.seed ^ 0x6b6d65616e73ULL);
    for (std::size_t i : analysis::kmeanspp_sample(points, std::min(cfg.sample.error_k, points.size()), krng))
      error_sample.push_back({{"id", point_ids[i]}, {"lang", lang}, {"generated", generated.at(point_ids[i])},
                              {"reference", gold.at(point_ids[i])}});
  }
  m.write("error_sample.json", error_sample.dump(2) + "\n");
  m.write("dedup.json", json{{"language", lang},
                             {"candidates", generated.size()},
                             {"identical", dedup.eliminated_ids.size()},
                             {"identical_fraction", dedup.eliminated_fraction},
                             {"sampled", ids.size()}}
                                .dump(2) +
                            "\n");
  m.finish();
}

void run_serve(const ExperimentConfig& cfg) {
  if (!cfg.serve.entry) throw ConfigError("serve needs serve.entry {question, options, answer}");
  Manifest m(cfg, "serve");
  const fs::path cp = cfg.out / "sample-eval" / "campaign.json";
  const service::Campaign campaign = service::Campaign::from_json(json::parse(require(cp, "sample-eval")));
  m.input(cp);
  service::EvalService svc(command_dir(cfg, "serve") / "events.jsonl", *cfg.serve.entry);
  const auto ids = svc.campaign_ids();
  if (std::find(ids.begin(), ids.end(), campaign.campaign_id) == ids.end()) svc.add_campaign(campaign);
  m.note("host", cfg.serve.host);
  m.note("port", cfg.serve.port);
  m.finish();
  service::HttpServer server(svc);
  log("serving campaign " + campaign.campaign_id + " on " + cfg.serve.host + ":" + std::to_string(cfg.serve.port));
  server.listen(cfg.serve.host, cfg.serve.port);
}

void run_report(const ExperimentConfig& cfg) {
  Manifest m(cfg, "report");
  auto section = [&](const std::string& title, const fs::path& p, const std::string& command, bool required) {
    if (!fs::exists(p)) {
      if (required) throw MissingInput(p, command);
      return "## " + title + "\n\nNot available (run `shortdesc " + command + "`).\n\n";
    }
    m.input(p);
    return "## " + title + "\n\n```\n" + slurp(p) + "```\n\n";
  };
  std::string md = "# Short description experiment report\n\n";
  md += "Config hash: " + cfg.hash() + ", seed " + std::to_string(cfg.seed) + ".\n\n";
  md += section("Language statistics", cfg.out / "stats" / "language_stats.csv", "stats", false);
  md += section("Automatic evaluation: mean similarity per language", cfg.out / "aggregate" / "table2.csv", "aggregate", true);
  md += section("Pairwise comparison: Bradley-Terry probabilities", cfg.out / "aggregate" / "table3.csv", "aggregate", true);
  md += section("Pairwise details", cfg.out / "aggregate" / "pairwise.csv", "aggregate", true);
  md += section("Propensity-weighted similarity", cfg.out / "propensity" / "weighted.csv", "propensity", false);
  md += section("Propensity strata", cfg.out / "propensity" / "strata.csv", "propensity", false);

  // Human evaluation from the service event log.
  std::vector<analysis::ItemOutcome> outcomes;
  const fs::path events = cfg.out / "serve" / "events.jsonl";
  const fs::path campaign_path = cfg.out / "sample-eval" / "campaign.json";
  if (fs::exists(events) && fs::exists(campaign_path)) {
    m.input(events);
    const service::Campaign campaign = service::Campaign::from_json(json::parse(slurp(campaign_path)));
    // Replay into a scratch log so the live one is never touched.
    const fs::path scratch = command_dir(cfg, "report") / "events.replay.jsonl";
    fs::copy_file(events, scratch, fs::copy_options::overwrite_existing);
    service::EvalService svc(scratch, cfg.serve.entry.value_or(service::EntryQuestion{}));
    const service::CampaignResults results = svc.aggregate_results(campaign.campaign_id);
    fs::remove(scratch);
    m.write("human_results.json", results.to_json().dump(2) + "\n");
    md += "## Human evaluation\n\n";
    md += "Complete items: " + std::to_string(results.complete) + ", model preferred: " +
          std::to_string(results.model_wins);
    if (results.model_win_fraction)
      md += " (" + analysis::format_number(100.0 * *results.model_win_fraction, 4) + "% [" +
            analysis::format_number(100.0 * results.wilson95->lower, 4) + "%, " +
            analysis::format_number(100.0 * results.wilson95->upper, 4) + "%])";
    md += results.partial ? ". Partial: some items lack three votes.\n\n" : ".\n\n";
    for (const service::ItemResult& r : results.items)
      if (r.winner) outcomes.push_back({r.entity_id, *r.winner});
  } else {
    md += "## Human evaluation\n\nNot available (run `shortdesc sample-eval` and collect votes with `shortdesc serve`).\n\n";
  }

  if (cfg.error_labels) {
    m.input(*cfg.error_labels);
    std::map<std::size_t, std::map<std::string, std::vector<analysis::ErrorLabel>>> rounds;
    std::istringstream in(slurp(*cfg.error_labels));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      analysis::ErrorLabel l{j.at("id").get<std::string>(),
                             analysis::parse_error_category(j.at("category").get<std::string>()),
                             j.at("annotator").get<std::string>(), j.at("round").get<std::size_t>()};
      rounds[l.round][l.annotator].push_back(l);
    }
    std::vector<analysis::KappaRow> kappa_rows;
    std::map<std::string, analysis::ErrorCategory> final_labels;
    for (const auto& [round, by_annotator] : rounds) {
      if (by_annotator.size() != 2)
        throw ConfigError("error labels: round " + std::to_string(round) + " needs exactly two annotators");
      const auto& first = by_annotator.begin()->second;
      const analysis::CodingRoundResult r = analysis::coding_round(first, std::next(by_annotator.begin())->second);
      kappa_rows.push_back({round, first.size(), r.kappa, r.stop, r.disagreements.size()});
      final_labels.clear();
      for (const analysis::ErrorLabel& l : first) final_labels[l.id] = l.category;
    }
    m.write("kappa.csv", analysis::kappa_csv(kappa_rows));
    md += section("Error coding agreement", command_dir(cfg, "report") / "kappa.csv", "report", true);
    if (!outcomes.empty()) {
      const fs::path dp = cfg.out / "sample-eval" / "dedup.json";
      const json dedup = json::parse(require(dp, "sample-eval"));
      // Identical outputs never reach raters; scale their pool fraction to the evaluated sample.
      const double f = dedup.at("identical_fraction").get<double>();
      const auto identical =
          static_cast<std::size_t>(std::llround(f < 1.0 ? f / (1.0 - f) * static_cast<double>(outcomes.size()) : 0.0));
      const auto profiles = analysis::error_distribution_report({"model", "human"}, outcomes.size() + identical,
                                                                identical, outcomes, final_labels);
      m.write("error_profile.csv", analysis::error_profile_csv(profiles));
      md += section("Error profile", command_dir(cfg, "report") / "error_profile.csv", "report", true);
    }
  }
  m.write("report.md", md);
  m.finish();
}

}  // namespace shortdesc::cli
