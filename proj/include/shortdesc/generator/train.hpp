#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/generator/model.hpp"

namespace shortdesc::generator {

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 3e-4;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
  // Validation entities scored after each epoch (0 = all of the split).
  std::size_t max_valid = 0;
  std::function<void(const std::string&)> progress;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t instances = 0;
  double train_loss = 0.0;  // mean NLL per instance
  double valid_loss = 0.0;  // mean NLL per validation instance; NaN without a validation split
  double seconds = 0.0;
};

struct TrainingLog {
  std::string language;  // monolingual member, empty otherwise
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One instance of the training set: an entity with a target and query language.
struct Instance {
  const corpus::Entity* entity;
  std::string target;
  std::string query;
};

// Trains model in place on train_ids. Each epoch draws one target language
// per entity and a training-mode query language, shuffles, and applies Adam
// over mini-batches of summed NLL divided by the batch size. A monolingual
// model restricted to `only_language` sees only instances whose target is
// that language and uses the target article as query.
TrainingLog train_model(DescriptionModel& model, const corpus::Corpus& corpus, const std::vector<std::string>& train_ids,
                        const std::vector<std::string>& valid_ids, const TrainOptions& options,
                        const std::string& only_language = {});

// A configuration with its trained parameters. Monolingual configurations
// hold one model per target language.
class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(ModelConfig cfg, std::map<std::string, std::unique_ptr<DescriptionModel>> members,
               std::vector<TrainingLog> logs);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<TrainingLog>& logs() const { return logs_; }
  // Multilingual models have one member under the empty key.
  const std::map<std::string, std::unique_ptr<DescriptionModel>>& members() const { return members_; }
  // Throws NotApplicable when no model serves target.
  const DescriptionModel& for_language(const std::string& target) const;

 private:
  ModelConfig cfg_;
  std::map<std::string, std::unique_ptr<DescriptionModel>> members_;
  std::vector<TrainingLog> logs_;
};

TrainedModel train(const corpus::Corpus& corpus, const corpus::SplitSpec& splits, const ModelConfig& cfg,
                   const TrainOptions& options, const encoding::Vocabulary& vocab,
                   const encoding::TypeEmbeddingTable& types);

GenerationResult generate(const TrainedModel& model, const corpus::Entity& entity, const std::string& target,
                          DecodeOptions options = {});

}  // namespace shortdesc::generator
