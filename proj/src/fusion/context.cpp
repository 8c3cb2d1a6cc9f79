#include "shortdesc/fusion/context.hpp"

#include <stdexcept>

namespace shortdesc::fusion {

ContextAssembler::ContextAssembler(nn::ParameterStore& store, const std::string& prefix,
                                   std::size_t d_model, std::size_t d_type, std::size_t d_desc,
                                   util::Rng& rng)
    : d_model_(d_model) {
  if (d_type > 0) type_proj_.emplace(store, prefix + ".type_proj", d_type, d_model, rng);
  if (d_desc > 0) desc_proj_.emplace(store, prefix + ".desc_proj", d_desc, d_model, rng);
}

nn::Var ContextAssembler::assemble(nn::Tape& t, nn::Var language_row, std::optional<nn::Var> type_vec,
                                   std::optional<nn::Var> desc_vec, nn::Var fused_article,
                                   Ablation ablation, std::vector<ContextSlot>* slots) const {
  if (t.cols(fused_article) != d_model_ || t.cols(language_row) != d_model_)
    throw std::invalid_argument("context: width mismatch with d_model");
  std::vector<nn::Var> parts{language_row};
  std::vector<ContextSlot> kinds{ContextSlot::language};
  if (ablation.use_types && type_vec && type_proj_) {
    parts.push_back(type_proj_->apply(t, *type_vec));
    kinds.push_back(ContextSlot::type);
  }
  if (ablation.use_desc && desc_vec && desc_proj_) {
    parts.push_back(desc_proj_->apply(t, *desc_vec));
    kinds.push_back(ContextSlot::description);
  }
  parts.push_back(fused_article);
  for (std::size_t i = 0; i < t.rows(fused_article); ++i) kinds.push_back(ContextSlot::article);
  if (slots != nullptr) *slots = std::move(kinds);
  return nn::concat_rows(t, parts);
}

DecoderContext assemble_decoder_context(const FusedArticle& fused, const encoding::PooledDescription& desc,
                                        const std::vector<double>& type_vec, const std::string& target,
                                        Ablation ablation, const ContextAssembler& assembler,
                                        const nn::Parameter& token_embeddings,
                                        const encoding::Vocabulary& vocab) {
  nn::Tape t(false);
  const auto lang = static_cast<std::size_t>(vocab.language_id(target));
  const std::size_t d = token_embeddings.value.cols();
  nn::Matrix lang_row(1, d);
  std::copy_n(token_embeddings.value.data() + lang * d, d, lang_row.data());
  std::optional<nn::Var> tv;
  if (!type_vec.empty()) tv = t.constant(nn::Matrix::row_vector(type_vec));
  std::optional<nn::Var> dv;
  if (desc.present()) dv = t.constant(desc.vector);
  DecoderContext ctx;
  nn::Var out = assembler.assemble(t, t.constant(std::move(lang_row)), tv, dv, t.constant(fused.matrix), ablation,
                                   &ctx.slots);
  ctx.rows = t.value(out);
  return ctx;
}

}  // namespace shortdesc::fusion
