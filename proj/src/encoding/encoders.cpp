#include "shortdesc/encoding/encoders.hpp"

#include <cmath>
#include <stdexcept>

namespace shortdesc::encoding {

TransformerEncoder::TransformerEncoder(nn::ParameterStore& store, const std::string& prefix,
                                       EncoderConfig cfg, std::size_t vocab_size, util::Rng& rng,
                                       nn::Parameter* shared_embeddings)
    : cfg_(cfg),
      embeddings_(shared_embeddings != nullptr
                      ? shared_embeddings
                      : &store.create_gaussian(prefix + ".tok_emb", vocab_size, cfg.dim,
                                               1.0 / std::sqrt(static_cast<double>(cfg.dim)), rng)),
      final_norm_(store, prefix + ".final_norm", cfg.dim),
      positions_(nn::sinusoidal_positions(cfg.max_positions, cfg.dim)) {
  if (embeddings_->value.cols() != cfg.dim) throw std::invalid_argument("encoder: embedding width mismatch");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string lp = prefix + ".layer" + std::to_string(l);
    layers_.push_back(Layer{nn::LayerNorm(store, lp + ".ln_attn", cfg.dim),
                            nn::MultiHeadAttention(store, lp + ".attn", cfg.dim, cfg.heads, rng),
                            nn::LayerNorm(store, lp + ".ln_ff", cfg.dim),
                            nn::FeedForward(store, lp + ".ff", cfg.dim, cfg.ff_mult * cfg.dim, rng)});
  }
}

nn::Var TransformerEncoder::forward(nn::Tape& t, std::span<const int> ids) const {
  if (ids.empty()) throw std::invalid_argument("encoder: empty token sequence");
  if (ids.size() > cfg_.max_positions) throw std::invalid_argument("encoder: sequence exceeds max_positions");
  nn::Matrix pos(ids.size(), cfg_.dim);
  std::copy_n(positions_.data(), ids.size() * cfg_.dim, pos.data());
  nn::Var x = nn::add(t, nn::scale(t, nn::embedding(t, *embeddings_, ids), std::sqrt(static_cast<double>(cfg_.dim))),
                      t.constant(std::move(pos)));
  for (const Layer& layer : layers_) {
    nn::Var h = layer.ln_attn.apply(t, x);
    x = nn::add(t, x, layer.attn.apply(t, h, h, false));
    x = nn::add(t, x, layer.ff.apply(t, layer.ln_ff.apply(t, x)));
  }
  return final_norm_.apply(t, x);
}

std::vector<int> article_token_ids(const corpus::ArticleText& article, const Vocabulary& vocab,
                                   std::size_t max_positions) {
  std::vector<int> ids = vocab.encode(article.first_paragraph, max_positions);
  if (ids.empty()) throw std::invalid_argument("article in " + article.language + " has no tokens");
  return ids;
}

EncodedArticle encode_article(const corpus::ArticleText& article, const TransformerEncoder& encoder,
                              const Vocabulary& vocab) {
  const std::vector<int> ids = article_token_ids(article, vocab, encoder.config().max_positions);
  nn::Tape t(false);
  nn::Var out = encoder.forward(t, ids);
  return EncodedArticle{article.language, t.value(out)};
}

std::optional<nn::Var> pool_descriptions(nn::Tape& t, const corpus::Entity& entity,
                                         const std::string& target_language,
                                         const TransformerEncoder& encoder, const Vocabulary& vocab) {
  std::vector<nn::Var> per_language;
  for (const auto& [lang, desc] : entity.descriptions) {
    if (lang == target_language) continue;
    const std::vector<int> ids = vocab.encode(desc.text, encoder.config().max_positions);
    if (ids.empty()) continue;
    per_language.push_back(nn::mean_rows(t, encoder.forward(t, ids)));
  }
  if (per_language.empty()) return std::nullopt;
  return per_language.size() == 1 ? per_language[0] : nn::average(t, per_language);
}

PooledDescription pool_descriptions(const corpus::Entity& entity, const std::string& target_language,
                                    const TransformerEncoder& encoder, const Vocabulary& vocab) {
  PooledDescription out;
  out.vector = nn::Matrix(1, encoder.config().dim);
  nn::Tape t(false);
  std::vector<nn::Var> per_language;
  for (const auto& [lang, desc] : entity.descriptions) {
    if (lang == target_language) continue;
    const std::vector<int> ids = vocab.encode(desc.text, encoder.config().max_positions);
    if (ids.empty()) continue;
    per_language.push_back(nn::mean_rows(t, encoder.forward(t, ids)));
    out.languages.push_back(lang);
  }
  out.n_sources = per_language.size();
  if (!per_language.empty()) out.vector = t.value(nn::average(t, per_language));
  return out;
}

}  // namespace shortdesc::encoding
