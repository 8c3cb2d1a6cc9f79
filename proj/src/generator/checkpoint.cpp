#include "shortdesc/generator/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace shortdesc::generator {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "shortdesc-checkpoint";
constexpr int kVersion = 1;

// Wall-clock seconds are left out so that checkpoints are byte-reproducible.
json log_to_json(const TrainingLog& log) {
  json epochs = json::array();
  for (const EpochRecord& r : log.epochs) {
    json e{{"epoch", r.epoch}, {"instances", r.instances}, {"train_loss", r.train_loss}};
    e["valid_loss"] = std::isfinite(r.valid_loss) ? json(r.valid_loss) : json(nullptr);
    epochs.push_back(std::move(e));
  }
  return json{{"language", log.language}, {"steps", log.steps}, {"epochs", std::move(epochs)}};
}

TrainingLog log_from_json(const json& j) {
  TrainingLog log;
  log.language = j.value("language", std::string());
  log.steps = j.value("steps", std::size_t{0});
  for (const json& e : j.at("epochs")) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<std::size_t>();
    r.instances = e.at("instances").get<std::size_t>();
    r.train_loss = e.at("train_loss").get<double>();
    r.valid_loss = e.at("valid_loss").is_null() ? std::nan("") : e.at("valid_loss").get<double>();
    r.seconds = e.value("seconds", 0.0);
    log.epochs.push_back(r);
  }
  return log;
}

}  // namespace

json parameters_to_json(const nn::ParameterStore& store) {
  json out = json::object();
  for (const nn::Parameter* p : store.all())
    out[p->name] = json{{"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", p->value.values()}};
  return out;
}

void parameters_from_json(nn::ParameterStore& store, const json& j) {
  std::set<std::string> seen;
  for (nn::Parameter* p : store.all()) {
    if (!j.contains(p->name)) throw std::runtime_error("checkpoint is missing parameter " + p->name);
    const json& t = j.at(p->name);
    const auto rows = t.at("rows").get<std::size_t>();
    const auto cols = t.at("cols").get<std::size_t>();
    if (rows != p->value.rows() || cols != p->value.cols())
      throw std::runtime_error("checkpoint shape mismatch for " + p->name + ": " + std::to_string(rows) + "x" +
                               std::to_string(cols) + " vs " + nn::shape_string(p->value));
    const auto data = t.at("data").get<std::vector<double>>();
    if (data.size() != rows * cols) throw std::runtime_error("checkpoint data size mismatch for " + p->name);
    std::copy(data.begin(), data.end(), p->value.data());
    seen.insert(p->name);
  }
  for (const auto& [name, _] : j.items())
    if (!seen.contains(name)) throw std::runtime_error("checkpoint has unexpected parameter " + name);
}

json model_to_json(const DescriptionModel& model) {
  return json{{"config", model.config().to_json()},
              {"vocabulary", json::parse(model.vocab().to_json_text())},
              {"types", model.types().serialize()},
              {"type_dim", model.types().dim()},
              {"parameters", parameters_to_json(model.params())}};
}

std::unique_ptr<DescriptionModel> model_from_json(const json& j) {
  ModelConfig cfg = ModelConfig::from_json(j.at("config"));
  encoding::Vocabulary vocab = encoding::Vocabulary::from_json_text(j.at("vocabulary").dump());
  encoding::TypeEmbeddingTable types = j.at("types").get<std::string>().empty()
                                           ? encoding::TypeEmbeddingTable(j.value("type_dim", cfg.d_type))
                                           : encoding::TypeEmbeddingTable::parse(j.at("types").get<std::string>());
  auto model = std::make_unique<DescriptionModel>(cfg, std::move(vocab), std::move(types));
  parameters_from_json(model->params(), j.at("parameters"));
  return model;
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  json members = json::object();
  for (const auto& [lang, m] : model.members()) members[lang] = model_to_json(*m);
  json logs = json::array();
  for (const TrainingLog& log : model.logs()) logs.push_back(log_to_json(log));
  const json doc{{"format", kFormat},
                 {"version", kVersion},
                 {"config", model.config().to_json()},
                 {"members", std::move(members)},
                 {"logs", std::move(logs)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (doc.value("format", std::string()) != kFormat || doc.value("version", 0) != kVersion)
    throw std::runtime_error("unsupported checkpoint format in " + path.string());
  ModelConfig cfg = ModelConfig::from_json(doc.at("config"));
  std::map<std::string, std::unique_ptr<DescriptionModel>> members;
  for (const auto& [lang, m] : doc.at("members").items()) members.emplace(lang, model_from_json(m));
  std::vector<TrainingLog> logs;
  for (const json& l : doc.at("logs")) logs.push_back(log_from_json(l));
  return TrainedModel(std::move(cfg), std::move(members), std::move(logs));
}

}  // namespace shortdesc::generator
