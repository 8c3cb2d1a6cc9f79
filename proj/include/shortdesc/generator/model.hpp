#pragma once

// Description generator: article encoder, description encoder, fusion block,
// context assembly and a small transformer decoder whose output head is tied
// to the shared token embedding.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/encoding/encoders.hpp"
#include "shortdesc/encoding/types.hpp"
#include "shortdesc/encoding/vocabulary.hpp"
#include "shortdesc/fusion/context.hpp"
#include "shortdesc/fusion/fusion.hpp"

namespace shortdesc::generator {

struct ModelConfig {
  std::string name = "full";
  bool use_desc = true;
  bool use_types = true;
  bool monolingual = false;

  std::size_t d_model = 64;
  std::size_t layers = 2;  // decoder
  std::size_t heads = 4;   // decoder
  std::size_t encoder_layers = 2;
  std::size_t encoder_heads = 4;
  std::size_t ff_mult = 4;
  std::size_t max_positions = 64;
  std::size_t d_desc = 32;
  std::size_t desc_layers = 1;
  std::size_t desc_heads = 2;
  std::size_t d_type = 16;
  std::size_t max_output_tokens = 16;
  std::uint64_t seed = 1;

  // "full", "no-desc", "no-types", "no-desc/types", "monolingual".
  static ModelConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();

  void validate() const;  // throws std::invalid_argument
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Thrown when a system cannot produce output for an instance (for example a
// monolingual model asked for a language whose article is missing).
class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DescriptionModel {
 public:
  DescriptionModel(ModelConfig cfg, encoding::Vocabulary vocab, encoding::TypeEmbeddingTable types);
  DescriptionModel(const DescriptionModel&) = delete;
  DescriptionModel& operator=(const DescriptionModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const encoding::Vocabulary& vocab() const { return vocab_; }
  const encoding::TypeEmbeddingTable& types() const { return types_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  const encoding::TransformerEncoder& article_encoder() const { return *article_encoder_; }
  // Null when the configuration does not use descriptions.
  const encoding::TransformerEncoder* description_encoder() const { return desc_encoder_.get(); }
  const fusion::FusionBlock& fusion_block() const { return *fusion_; }
  const fusion::ContextAssembler& assembler() const { return *assembler_; }

  // Languages whose articles enter fusion for the given query language.
  std::vector<std::string> fusion_languages(const corpus::Entity& entity, const std::string& query) const;

  // Decoder context (rows x d_model) on the tape.
  nn::Var context(nn::Tape& t, const corpus::Entity& entity, const std::string& target,
                  const std::string& query, std::vector<fusion::ContextSlot>* slots = nullptr) const;

  // Next-token logits for every position of prefix (which starts with BOS).
  nn::Var decoder_logits(nn::Tape& t, nn::Var context, std::span<const int> prefix) const;

  // Query language at inference, seeded per entity so decoding is reproducible.
  std::string inference_query(const corpus::Entity& entity, const std::string& target) const;

 private:
  struct DecoderLayer {
    nn::LayerNorm ln_self;
    nn::MultiHeadAttention self_attn;
    nn::LayerNorm ln_cross;
    nn::MultiHeadAttention cross_attn;
    nn::LayerNorm ln_ff;
    nn::FeedForward ff;
  };

  ModelConfig cfg_;
  encoding::Vocabulary vocab_;
  encoding::TypeEmbeddingTable types_;
  nn::ParameterStore store_;
  nn::Parameter* tokens_ = nullptr;
  std::unique_ptr<encoding::TransformerEncoder> article_encoder_;
  std::unique_ptr<encoding::TransformerEncoder> desc_encoder_;
  std::unique_ptr<fusion::FusionBlock> fusion_;
  std::unique_ptr<fusion::ContextAssembler> assembler_;
  std::unique_ptr<nn::LayerNorm> context_norm_;
  std::vector<DecoderLayer> decoder_;
  std::unique_ptr<nn::LayerNorm> final_norm_;
  nn::Matrix positions_;
};

// Description token ids followed by EOS. Throws when the entity has no
// description in target.
std::vector<int> target_ids(const DescriptionModel& model, const corpus::Entity& entity, const std::string& target);

// Teacher-forced negative log-likelihood (natural log) of the target-language
// description plus EOS.
nn::Var training_loss(nn::Tape& t, const DescriptionModel& model, const corpus::Entity& entity,
                      const std::string& target, const std::string& query);
double training_loss(const DescriptionModel& model, const corpus::Entity& entity, const std::string& target);

struct DecodeOptions {
  std::size_t beam = 1;  // 1 = greedy, at most 5
};

struct GenerationResult {
  std::string id;
  std::string target_language;
  std::vector<int> tokens;
  std::string text;
  bool terminated = false;
  double logprob = 0.0;

  nlohmann::json to_json() const;
  static GenerationResult from_json(const nlohmann::json& j);
};

// Decodes from BOS. At most max_output_tokens content tokens are produced;
// the result is terminated only if EOS is chosen within one step after them.
GenerationResult generate(const DescriptionModel& model, const corpus::Entity& entity, const std::string& target,
                          DecodeOptions options = {});

struct FilterResult {
  std::vector<GenerationResult> kept;
  std::size_t dropped = 0;
  double dropped_fraction = 0.0;
};
FilterResult filter_truncated(std::vector<GenerationResult> results);

}  // namespace shortdesc::generator
