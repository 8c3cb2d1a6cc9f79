#include "shortdesc/generator/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "shortdesc/encoding/query.hpp"

namespace shortdesc::generator {

using nlohmann::json;

ModelConfig ModelConfig::preset(const std::string& name) {
  ModelConfig c;
  c.name = name;
  if (name == "full") {
  } else if (name == "no-desc") {
    c.use_desc = false;
  } else if (name == "no-types") {
    c.use_types = false;
  } else if (name == "no-desc/types") {
    c.use_desc = false;
    c.use_types = false;
  } else if (name == "monolingual") {
    c.use_desc = false;
    c.use_types = false;
    c.monolingual = true;
  } else {
    throw std::invalid_argument("unknown model configuration '" + name + "'");
  }
  return c;
}

std::vector<std::string> ModelConfig::preset_names() {
  return {"full", "no-desc", "no-types", "no-desc/types", "monolingual"};
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("model config: " + what);
  };
  need(d_model > 0 && heads > 0 && d_model % heads == 0, "d_model must be a positive multiple of heads");
  need(encoder_heads > 0 && d_model % encoder_heads == 0, "d_model must be a multiple of encoder_heads");
  need(!use_desc || (d_desc > 0 && desc_heads > 0 && d_desc % desc_heads == 0),
       "d_desc must be a positive multiple of desc_heads");
  need(!use_types || d_type > 0, "d_type must be positive");
  need(max_output_tokens >= 1, "max_output_tokens must be at least 1");
  need(max_positions > max_output_tokens + 1, "max_positions must exceed max_output_tokens + 1");
  need(ff_mult > 0, "ff_mult must be positive");
  need(!monolingual || (!use_desc && !use_types), "monolingual implies no descriptions and no types");
}

json ModelConfig::to_json() const {
  return json{{"name", name},
              {"use_desc", use_desc},
              {"use_types", use_types},
              {"monolingual", monolingual},
              {"d_model", d_model},
              {"layers", layers},
              {"heads", heads},
              {"encoder_layers", encoder_layers},
              {"encoder_heads", encoder_heads},
              {"ff_mult", ff_mult},
              {"max_positions", max_positions},
              {"d_desc", d_desc},
              {"desc_layers", desc_layers},
              {"desc_heads", desc_heads},
              {"d_type", d_type},
              {"max_output_tokens", max_output_tokens},
              {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c = preset(j.value("name", std::string("full")));
  c.use_desc = j.value("use_desc", c.use_desc);
  c.use_types = j.value("use_types", c.use_types);
  c.monolingual = j.value("monolingual", c.monolingual);
  c.d_model = j.value("d_model", c.d_model);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.encoder_heads = j.value("encoder_heads", c.encoder_heads);
  c.ff_mult = j.value("ff_mult", c.ff_mult);
  c.max_positions = j.value("max_positions", c.max_positions);
  c.d_desc = j.value("d_desc", c.d_desc);
  c.desc_layers = j.value("desc_layers", c.desc_layers);
  c.desc_heads = j.value("desc_heads", c.desc_heads);
  c.d_type = j.value("d_type", c.d_type);
  c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

DescriptionModel::DescriptionModel(ModelConfig cfg, encoding::Vocabulary vocab, encoding::TypeEmbeddingTable types)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)), types_(std::move(types)) {
  cfg_.validate();
  if (cfg_.use_types && types_.dim() != cfg_.d_type)
    throw std::invalid_argument("type table dimension " + std::to_string(types_.dim()) + " != d_type " +
                                std::to_string(cfg_.d_type));
  util::Rng rng(cfg_.seed);
  const std::size_t d = cfg_.d_model;
  const std::size_t v = vocab_.size();
  tokens_ = &store_.create_gaussian("tokens", v, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);

  encoding::EncoderConfig ac{d, cfg_.encoder_layers, cfg_.encoder_heads, cfg_.ff_mult, cfg_.max_positions};
  article_encoder_ = std::make_unique<encoding::TransformerEncoder>(store_, "article_encoder", ac, v, rng, tokens_);
  if (cfg_.use_desc) {
    encoding::EncoderConfig dc{cfg_.d_desc, cfg_.desc_layers, cfg_.desc_heads, cfg_.ff_mult, cfg_.max_positions};
    desc_encoder_ = std::make_unique<encoding::TransformerEncoder>(store_, "desc_encoder", dc, v, rng);
  }
  fusion_ = std::make_unique<fusion::FusionBlock>(store_, "fusion", fusion::FusionConfig{d, d, cfg_.ff_mult}, rng);
  assembler_ = std::make_unique<fusion::ContextAssembler>(store_, "context", d, cfg_.use_types ? cfg_.d_type : 0,
                                                          cfg_.use_desc ? cfg_.d_desc : 0, rng);
  context_norm_ = std::make_unique<nn::LayerNorm>(store_, "context.norm", d);
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const std::string p = "decoder.layer" + std::to_string(l);
    decoder_.push_back(DecoderLayer{nn::LayerNorm(store_, p + ".ln_self", d),
                                    nn::MultiHeadAttention(store_, p + ".self_attn", d, cfg_.heads, rng),
                                    nn::LayerNorm(store_, p + ".ln_cross", d),
                                    nn::MultiHeadAttention(store_, p + ".cross_attn", d, cfg_.heads, rng),
                                    nn::LayerNorm(store_, p + ".ln_ff", d),
                                    nn::FeedForward(store_, p + ".ff", d, cfg_.ff_mult * d, rng)});
  }
  final_norm_ = std::make_unique<nn::LayerNorm>(store_, "decoder.final_norm", d);
  positions_ = nn::sinusoidal_positions(cfg_.max_positions, d);
}

std::vector<std::string> DescriptionModel::fusion_languages(const corpus::Entity& entity,
                                                            const std::string& query) const {
  if (!entity.articles.contains(query))
    throw std::invalid_argument("entity " + entity.id + " has no article in query language " + query);
  if (cfg_.monolingual) return {query};
  return entity.article_languages();
}

nn::Var DescriptionModel::context(nn::Tape& t, const corpus::Entity& entity, const std::string& target,
                                  const std::string& query, std::vector<fusion::ContextSlot>* slots) const {
  const std::vector<std::string> langs = fusion_languages(entity, query);
  std::vector<nn::Var> encoded;
  std::size_t qi = 0;
  for (std::size_t i = 0; i < langs.size(); ++i) {
    if (langs[i] == query) qi = i;
    const std::vector<int> ids =
        encoding::article_token_ids(entity.articles.at(langs[i]), vocab_, cfg_.max_positions);
    encoded.push_back(article_encoder_->forward(t, ids));
  }
  nn::Var fused = fusion_->forward(t, encoded, qi);

  const int lang_id = vocab_.language_id(target);
  nn::Var lang_row = nn::embedding(t, *tokens_, std::span<const int>(&lang_id, 1));
  std::optional<nn::Var> type_vec;
  if (cfg_.use_types) type_vec = t.constant(nn::Matrix::row_vector(encoding::type_representation(entity, types_)));
  std::optional<nn::Var> desc_vec;
  if (cfg_.use_desc) desc_vec = encoding::pool_descriptions(t, entity, target, *desc_encoder_, vocab_);
  nn::Var ctx = assembler_->assemble(t, lang_row, type_vec, desc_vec, fused,
                                     fusion::Ablation{cfg_.use_desc, cfg_.use_types}, slots);
  return context_norm_->apply(t, ctx);
}

nn::Var DescriptionModel::decoder_logits(nn::Tape& t, nn::Var context, std::span<const int> prefix) const {
  if (prefix.empty() || prefix.size() > cfg_.max_positions)
    throw std::invalid_argument("decoder: prefix length out of range");
  const std::size_t d = cfg_.d_model;
  nn::Matrix pos(prefix.size(), d);
  std::copy_n(positions_.data(), prefix.size() * d, pos.data());
  nn::Var x = nn::add(t, nn::scale(t, nn::embedding(t, *tokens_, prefix), std::sqrt(static_cast<double>(d))),
                      t.constant(std::move(pos)));
  for (const DecoderLayer& layer : decoder_) {
    nn::Var h = layer.ln_self.apply(t, x);
    x = nn::add(t, x, layer.self_attn.apply(t, h, h, true));
    x = nn::add(t, x, layer.cross_attn.apply(t, layer.ln_cross.apply(t, x), context, false));
    x = nn::add(t, x, layer.ff.apply(t, layer.ln_ff.apply(t, x)));
  }
  x = final_norm_->apply(t, x);
  return nn::matmul_nt(t, x, t.param(*tokens_));
}

std::string DescriptionModel::inference_query(const corpus::Entity& entity, const std::string& target) const {
  // Fallback draws are seeded by model seed and entity id, so repeated calls
  // and concurrent callers agree.
  util::Rng rng(cfg_.seed ^ std::hash<std::string>{}(entity.id + "\x1f" + target));
  return encoding::select_query_language(entity, target, encoding::QueryMode::infer, rng);
}

std::vector<int> target_ids(const DescriptionModel& model, const corpus::Entity& entity, const std::string& target) {
  auto it = entity.descriptions.find(target);
  if (it == entity.descriptions.end())
    throw std::invalid_argument("entity " + entity.id + " has no ground-truth description in " + target);
  std::vector<int> ids = model.vocab().encode(it->second.text, model.config().max_positions - 1);
  ids.push_back(encoding::Vocabulary::kEos);
  return ids;
}

nn::Var training_loss(nn::Tape& t, const DescriptionModel& model, const corpus::Entity& entity,
                      const std::string& target, const std::string& query) {
  const std::vector<int> targets = target_ids(model, entity, target);
  std::vector<int> prefix{encoding::Vocabulary::kBos};
  prefix.insert(prefix.end(), targets.begin(), targets.end() - 1);
  nn::Var ctx = model.context(t, entity, target, query);
  return nn::cross_entropy_sum(t, model.decoder_logits(t, ctx, prefix), targets);
}

double training_loss(const DescriptionModel& model, const corpus::Entity& entity, const std::string& target) {
  nn::Tape t(false);
  return t.value(training_loss(t, model, entity, target, model.inference_query(entity, target)))(0, 0);
}

json GenerationResult::to_json() const {
  return json{{"id", id}, {"lang", target_language}, {"text", text}, {"terminated", terminated},
              {"logprob", logprob}};
}

GenerationResult GenerationResult::from_json(const json& j) {
  GenerationResult r;
  r.id = j.at("id").get<std::string>();
  r.target_language = j.at("lang").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.terminated = j.at("terminated").get<bool>();
  r.logprob = j.value("logprob", 0.0);
  return r;
}

namespace {

// Log-probabilities of the last row of logits with reserved tokens other than
// EOS masked out.
std::vector<double> next_token_logprobs(const nn::Matrix& logits, const encoding::Vocabulary& vocab) {
  const std::size_t last = logits.rows() - 1;
  const std::size_t v = logits.cols();
  std::vector<double> out(v, -std::numeric_limits<double>::infinity());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < v; ++j) {
    if (vocab.is_reserved(static_cast<int>(j)) && static_cast<int>(j) != encoding::Vocabulary::kEos) continue;
    mx = std::max(mx, logits(last, j));
  }
  double z = 0.0;
  for (std::size_t j = 0; j < v; ++j) {
    if (vocab.is_reserved(static_cast<int>(j)) && static_cast<int>(j) != encoding::Vocabulary::kEos) continue;
    z += std::exp(logits(last, j) - mx);
  }
  const double log_z = mx + std::log(z);
  for (std::size_t j = 0; j < v; ++j) {
    if (vocab.is_reserved(static_cast<int>(j)) && static_cast<int>(j) != encoding::Vocabulary::kEos) continue;
    out[j] = logits(last, j) - log_z;
  }
  return out;
}

struct Hypothesis {
  std::vector<int> tokens;  // content tokens only
  double logprob = 0.0;
  bool terminated = false;
};

}  // namespace

GenerationResult generate(const DescriptionModel& model, const corpus::Entity& entity, const std::string& target,
                          DecodeOptions options) {
  if (options.beam < 1 || options.beam > 5) throw std::invalid_argument("beam width must be in [1, 5]");
  if (entity.articles.empty()) throw std::invalid_argument("entity " + entity.id + " has no article");
  const std::string query = model.inference_query(entity, target);
  if (model.config().monolingual && query != target)
    throw NotApplicable("monolingual model needs an article in " + target);

  nn::Tape ctx_tape(false);
  const nn::Matrix ctx = ctx_tape.value(model.context(ctx_tape, entity, target, query));
  const std::size_t cap = model.config().max_output_tokens;
  const std::size_t k = options.beam;

  auto step = [&](const std::vector<int>& content) {
    nn::Tape t(false);
    std::vector<int> prefix{encoding::Vocabulary::kBos};
    prefix.insert(prefix.end(), content.begin(), content.end());
    return next_token_logprobs(t.value(model.decoder_logits(t, t.constant(ctx), prefix)), model.vocab());
  };

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> done;
  while (!live.empty()) {
    std::vector<Hypothesis> expanded;
    for (const Hypothesis& h : live) {
      const std::vector<double> lp = step(h.tokens);
      if (h.tokens.size() == cap) {
        // Past the cap only EOS may follow; otherwise the output is truncated.
        const auto best = std::max_element(lp.begin(), lp.end()) - lp.begin();
        Hypothesis f = h;
        f.terminated = best == encoding::Vocabulary::kEos;
        if (f.terminated) f.logprob += lp[encoding::Vocabulary::kEos];
        done.push_back(std::move(f));
        continue;
      }
      std::vector<int> order(lp.size());
      for (std::size_t j = 0; j < lp.size(); ++j) order[j] = static_cast<int>(j);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(k, order.size())),
                        order.end(), [&](int a, int b) { return lp[a] != lp[b] ? lp[a] > lp[b] : a < b; });
      for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
        const int tok = order[r];
        if (!std::isfinite(lp[tok])) break;
        Hypothesis n = h;
        n.logprob += lp[tok];
        if (tok == encoding::Vocabulary::kEos) {
          n.terminated = true;
          done.push_back(std::move(n));
        } else {
          n.tokens.push_back(tok);
          expanded.push_back(std::move(n));
        }
      }
    }
    std::stable_sort(expanded.begin(), expanded.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.logprob > b.logprob; });
    if (expanded.size() > k) expanded.resize(k);
    // Stop once k finished hypotheses beat every live one.
    if (done.size() >= k && !expanded.empty()) {
      double worst_done = std::numeric_limits<double>::infinity();
      std::vector<double> best_done;
      for (const Hypothesis& h : done) best_done.push_back(h.logprob);
      std::sort(best_done.rbegin(), best_done.rend());
      worst_done = best_done[k - 1];
      if (expanded.front().logprob <= worst_done) expanded.clear();
    }
    live = std::move(expanded);
  }

  const auto best = std::max_element(done.begin(), done.end(), [](const Hypothesis& a, const Hypothesis& b) {
    return a.logprob < b.logprob;
  });
  GenerationResult r;
  r.id = entity.id;
  r.target_language = target;
  r.tokens = best->tokens;
  r.text = model.vocab().decode(best->tokens);
  r.terminated = best->terminated;
  r.logprob = best->logprob;
  return r;
}

FilterResult filter_truncated(std::vector<GenerationResult> results) {
  FilterResult out;
  const std::size_t total = results.size();
  for (GenerationResult& r : results) {
    if (r.terminated)
      out.kept.push_back(std::move(r));
    else
      ++out.dropped;
  }
  out.dropped_fraction = total == 0 ? 0.0 : static_cast<double>(out.dropped) / static_cast<double>(total);
  return out;
}

}  // namespace shortdesc::generator
