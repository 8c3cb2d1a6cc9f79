#include "shortdesc/fusion/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace shortdesc::fusion {

FusionBlock::FusionBlock(nn::ParameterStore& store, const std::string& prefix, FusionConfig cfg,
                         util::Rng& rng)
    : cfg_(cfg),
      wq_(&store.create_gaussian(prefix + ".wq", cfg.d_model, cfg.d_k,
                                 1.0 / std::sqrt(static_cast<double>(cfg.d_model)), rng)),
      wk_(&store.create_gaussian(prefix + ".wk", cfg.d_model, cfg.d_k,
                                 1.0 / std::sqrt(static_cast<double>(cfg.d_model)), rng)),
      wv_(&store.create_gaussian(prefix + ".wv", cfg.d_model, cfg.d_k,
                                 1.0 / std::sqrt(static_cast<double>(cfg.d_model)), rng)),
      norm_(store, prefix + ".norm", cfg.d_k),
      ff_(store, prefix + ".ff", cfg.d_k, cfg.ff_mult * cfg.d_k, rng) {}

std::vector<std::string> FusionBlock::parameter_names(const std::string& prefix) {
  return {prefix + ".ff.down.bias", prefix + ".ff.down.weight", prefix + ".ff.up.bias",
          prefix + ".ff.up.weight", prefix + ".norm.bias",      prefix + ".norm.gain",
          prefix + ".wk",           prefix + ".wq",             prefix + ".wv"};
}

nn::Var FusionBlock::forward(nn::Tape& t, std::span<const nn::Var> encoded, std::size_t query_index) const {
  if (encoded.empty()) throw std::invalid_argument("fusion: no encoded articles");
  if (query_index >= encoded.size()) throw std::invalid_argument("fusion: query index out of range");
  for (nn::Var a : encoded)
    if (t.cols(a) != cfg_.d_model)
      throw std::invalid_argument("fusion: article width " + std::to_string(t.cols(a)) + " != d_model " +
                                  std::to_string(cfg_.d_model));

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg_.d_k));
  nn::Var wq = t.param(*wq_);
  nn::Var wk = t.param(*wk_);
  nn::Var wv = t.param(*wv_);
  nn::Var q = nn::matmul(t, encoded[query_index], wq);

  std::vector<nn::Var> branches;
  branches.reserve(encoded.size());
  for (nn::Var a : encoded) {
    nn::Var k = nn::matmul(t, a, wk);
    nn::Var v = nn::matmul(t, a, wv);
    nn::Var attn = nn::softmax_rows(t, nn::scale(t, nn::matmul_nt(t, q, k), inv_sqrt_d));
    nn::Var h = nn::add(t, q, nn::matmul(t, attn, v));
    branches.push_back(ff_.apply(t, norm_.apply(t, h)));
  }
  return branches.size() == 1 ? branches[0] : nn::average(t, branches);
}

FusedArticle fuse_articles(const std::vector<encoding::EncodedArticle>& encoded, const std::string& query,
                           const FusionBlock& block) {
  std::size_t qi = encoded.size();
  for (std::size_t i = 0; i < encoded.size(); ++i)
    if (encoded[i].language == query) qi = i;
  if (qi == encoded.size()) throw std::invalid_argument("fusion: query language '" + query + "' not encoded");
  nn::Tape t(false);
  std::vector<nn::Var> vars;
  for (const encoding::EncodedArticle& a : encoded) vars.push_back(t.constant(a.matrix));
  return FusedArticle{t.value(block.forward(t, vars, qi))};
}

}  // namespace shortdesc::fusion
