#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "shortdesc/encoding/encoders.hpp"
#include "shortdesc/encoding/vocabulary.hpp"
#include "shortdesc/fusion/fusion.hpp"
#include "shortdesc/nn/layers.hpp"

namespace shortdesc::fusion {

struct Ablation {
  bool use_desc = true;
  bool use_types = true;
};

enum class ContextSlot { language, type, description, article };

// Decoder input sequence [language token; type; description; article rows].
// Ablated or absent modalities are removed, not zeroed.
struct DecoderContext {
  nn::Matrix rows;  // length x d_model
  std::vector<ContextSlot> slots;
};

// Learned affine maps that turn the type and description vectors into one
// pseudo-token each. A zero d_type or d_desc creates no projection, and that
// slot is then always omitted.
class ContextAssembler {
 public:
  ContextAssembler(nn::ParameterStore& store, const std::string& prefix, std::size_t d_model,
                   std::size_t d_type, std::size_t d_desc, util::Rng& rng);

  nn::Var assemble(nn::Tape& t, nn::Var language_row, std::optional<nn::Var> type_vec,
                   std::optional<nn::Var> desc_vec, nn::Var fused_article, Ablation ablation,
                   std::vector<ContextSlot>* slots = nullptr) const;

  std::size_t d_model() const { return d_model_; }

 private:
  std::size_t d_model_;
  std::optional<nn::Linear> type_proj_;
  std::optional<nn::Linear> desc_proj_;
};

DecoderContext assemble_decoder_context(const FusedArticle& fused, const encoding::PooledDescription& desc,
                                        const std::vector<double>& type_vec, const std::string& target,
                                        Ablation ablation, const ContextAssembler& assembler,
                                        const nn::Parameter& token_embeddings,
                                        const encoding::Vocabulary& vocab);

}  // namespace shortdesc::fusion
