#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/encoding/vocabulary.hpp"
#include "shortdesc/nn/layers.hpp"

namespace shortdesc::encoding {

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_mult = 4;
  std::size_t max_positions = 64;
};

// Pre-norm transformer encoder with sinusoidal positions. The token table can
// be shared with another component (the decoder ties its output head to it).
class TransformerEncoder {
 public:
  TransformerEncoder(nn::ParameterStore& store, const std::string& prefix, EncoderConfig cfg,
                     std::size_t vocab_size, util::Rng& rng, nn::Parameter* shared_embeddings = nullptr);

  // ids must be nonempty and at most max_positions long.
  nn::Var forward(nn::Tape& t, std::span<const int> ids) const;

  nn::Parameter& embeddings() const { return *embeddings_; }
  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Layer {
    nn::LayerNorm ln_attn;
    nn::MultiHeadAttention attn;
    nn::LayerNorm ln_ff;
    nn::FeedForward ff;
  };
  EncoderConfig cfg_;
  nn::Parameter* embeddings_;
  std::vector<Layer> layers_;
  nn::LayerNorm final_norm_;
  nn::Matrix positions_;
};

struct EncodedArticle {
  std::string language;
  nn::Matrix matrix;  // tokens x dim
};

// Throws std::invalid_argument when the article tokenizes to nothing.
std::vector<int> article_token_ids(const corpus::ArticleText& article, const Vocabulary& vocab,
                                   std::size_t max_positions);
EncodedArticle encode_article(const corpus::ArticleText& article, const TransformerEncoder& encoder,
                              const Vocabulary& vocab);

struct PooledDescription {
  nn::Matrix vector;  // 1 x d_desc, all zeros when absent
  std::size_t n_sources = 0;
  std::vector<std::string> languages;
  bool present() const { return n_sources > 0; }
};

// Mean over every language other than target_language of the mean token
// vector of that language's description. The target-language description is
// never read.
PooledDescription pool_descriptions(const corpus::Entity& entity, const std::string& target_language,
                                    const TransformerEncoder& encoder, const Vocabulary& vocab);

// Tape variant used in training; nullopt when no other-language description exists.
std::optional<nn::Var> pool_descriptions(nn::Tape& t, const corpus::Entity& entity,
                                         const std::string& target_language,
                                         const TransformerEncoder& encoder, const Vocabulary& vocab);

}  // namespace shortdesc::encoding
