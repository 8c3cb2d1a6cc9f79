#include "shortdesc/generator/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "shortdesc/encoding/query.hpp"
#include "shortdesc/nn/optim.hpp"

namespace shortdesc::generator {

namespace {

std::vector<const corpus::Entity*> resolve(const corpus::Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<const corpus::Entity*> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    auto it = corpus.find(id);
    if (it == corpus.end()) throw std::invalid_argument("split references unknown entity " + id);
    out.push_back(&it->second);
  }
  return out;
}

bool usable(const corpus::Entity& e, const std::string& only_language) {
  if (e.descriptions.empty() || e.articles.empty()) return false;
  if (only_language.empty()) return true;
  return e.descriptions.contains(only_language) && e.articles.contains(only_language);
}

Instance draw_instance(const corpus::Entity& e, const std::string& only_language, util::Rng& rng) {
  if (!only_language.empty()) return Instance{&e, only_language, only_language};
  corpus::TrainingInstance ti = corpus::sample_training_instance(e, rng);
  std::string query = encoding::select_query_language(e, ti.target_language, encoding::QueryMode::train, rng);
  return Instance{&e, std::move(ti.target_language), std::move(query)};
}

// Validation instances are fixed across epochs: target is drawn once, query
// follows the inference policy.
std::vector<Instance> validation_instances(const std::vector<const corpus::Entity*>& entities,
                                           const DescriptionModel& model, const std::string& only_language,
                                           std::uint64_t seed, std::size_t limit) {
  util::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Instance> out;
  for (const corpus::Entity* e : entities) {
    if (limit > 0 && out.size() >= limit) break;
    if (!usable(*e, only_language)) continue;
    if (!only_language.empty()) {
      out.push_back(Instance{e, only_language, only_language});
      continue;
    }
    corpus::TrainingInstance ti = corpus::sample_training_instance(*e, rng);
    std::string query = model.inference_query(*e, ti.target_language);
    out.push_back(Instance{e, std::move(ti.target_language), std::move(query)});
  }
  return out;
}

}  // namespace

TrainingLog train_model(DescriptionModel& model, const corpus::Corpus& corpus, const std::vector<std::string>& train_ids,
                        const std::vector<std::string>& valid_ids, const TrainOptions& options,
                        const std::string& only_language) {
  if (options.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  std::vector<const corpus::Entity*> train_entities;
  for (const corpus::Entity* e : resolve(corpus, train_ids))
    if (usable(*e, only_language)) train_entities.push_back(e);
  if (train_entities.empty())
    throw std::invalid_argument("empty training split" +
                                (only_language.empty() ? std::string() : " for language " + only_language));
  const std::vector<Instance> valid =
      validation_instances(resolve(corpus, valid_ids), model, only_language, options.seed, options.max_valid);

  nn::ParameterStore& store = model.params();
  nn::Adam adam(store, nn::AdamOptions{options.learning_rate, 0.9, 0.999, 1e-8});
  util::Rng rng(options.seed);
  TrainingLog log;
  log.language = only_language;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<Instance> instances;
    instances.reserve(train_entities.size());
    for (const corpus::Entity* e : train_entities) instances.push_back(draw_instance(*e, only_language, rng));
    util::shuffle(instances, rng);

    double total = 0.0;
    for (std::size_t begin = 0; begin < instances.size(); begin += options.batch_size) {
      const std::size_t end = std::min(instances.size(), begin + options.batch_size);
      store.zero_grad();
      for (std::size_t i = begin; i < end; ++i) {
        nn::Tape t(true);
        nn::Var loss = training_loss(t, model, *instances[i].entity, instances[i].target, instances[i].query);
        const double value = t.value(loss)(0, 0);
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "training diverged: non-finite loss at epoch " << epoch << ", step " << log.steps << ", entity "
              << instances[i].entity->id << " (" << instances[i].target << ")";
          throw TrainingDiverged(msg.str());
        }
        total += value;
        t.backward(loss);
      }
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (nn::Parameter* p : store.all())
        for (double& g : p->grad.values()) g *= scale;
      const double norm = nn::clip_grad_norm(store, options.clip_norm);
      if (!std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite gradient norm at epoch " << epoch << ", step " << log.steps;
        throw TrainingDiverged(msg.str());
      }
      adam.step();
      ++log.steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.instances = instances.size();
    rec.train_loss = total / static_cast<double>(instances.size());
    if (valid.empty()) {
      rec.valid_loss = std::numeric_limits<double>::quiet_NaN();
    } else {
      double vt = 0.0;
      for (const Instance& in : valid) {
        nn::Tape t(false);
        vt += t.value(training_loss(t, model, *in.entity, in.target, in.query))(0, 0);
      }
      rec.valid_loss = vt / static_cast<double>(valid.size());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back(rec);
    if (options.progress) {
      std::ostringstream msg;
      msg << model.config().name << (only_language.empty() ? "" : "[" + only_language + "]") << " epoch " << epoch
          << " train " << rec.train_loss << " valid " << rec.valid_loss << " (" << rec.seconds << " s)";
      options.progress(msg.str());
    }
  }
  return log;
}

TrainedModel::TrainedModel(ModelConfig cfg, std::map<std::string, std::unique_ptr<DescriptionModel>> members,
                           std::vector<TrainingLog> logs)
    : cfg_(std::move(cfg)), members_(std::move(members)), logs_(std::move(logs)) {}

const DescriptionModel& TrainedModel::for_language(const std::string& target) const {
  auto it = members_.find(cfg_.monolingual ? target : std::string());
  if (it == members_.end()) throw NotApplicable("no " + cfg_.name + " model for language " + target);
  return *it->second;
}

TrainedModel train(const corpus::Corpus& corpus, const corpus::SplitSpec& splits, const ModelConfig& cfg,
                   const TrainOptions& options, const encoding::Vocabulary& vocab,
                   const encoding::TypeEmbeddingTable& types) {
  cfg.validate();
  if (splits.train_ids.empty()) throw std::invalid_argument("empty training split");
  std::map<std::string, std::unique_ptr<DescriptionModel>> members;
  std::vector<TrainingLog> logs;
  if (!cfg.monolingual) {
    auto m = std::make_unique<DescriptionModel>(cfg, vocab, types);
    logs.push_back(train_model(*m, corpus, splits.train_ids, splits.valid_ids, options));
    members.emplace("", std::move(m));
  } else {
    std::set<std::string> langs;
    for (const std::string& id : splits.train_ids) {
      const corpus::Entity& e = corpus.at(id);
      for (const auto& [lang, _] : e.descriptions)
        if (e.articles.contains(lang)) langs.insert(lang);
    }
    for (const std::string& lang : langs) {
      auto m = std::make_unique<DescriptionModel>(cfg, vocab, types);
      logs.push_back(train_model(*m, corpus, splits.train_ids, splits.valid_ids, options, lang));
      members.emplace(lang, std::move(m));
    }
  }
  return TrainedModel(cfg, std::move(members), std::move(logs));
}

GenerationResult generate(const TrainedModel& model, const corpus::Entity& entity, const std::string& target,
                          DecodeOptions options) {
  return generate(model.for_language(target), entity, target, options);
}

}  // namespace shortdesc::generator
