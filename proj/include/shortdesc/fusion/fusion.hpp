#pragma once

// Cross-language article fusion.
//
// For query language q and languages l = 1..n, token i of the fused article is
//
//   A_i = (1/n) sum_l FF(LayerNorm(Q_i + softmax(Q_i K_l^T / sqrt(d_k)) V_l))
//
// with Q = A_q W_Q, K_l = A_l W_K, V_l = A_l W_V. The skip connection adds the
// projected query Q_i, so the value width equals d_k. Attention is single-head
// and the average includes l = q.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "shortdesc/encoding/encoders.hpp"
#include "shortdesc/nn/layers.hpp"

namespace shortdesc::fusion {

struct FusionConfig {
  std::size_t d_model = 64;
  std::size_t d_k = 64;
  std::size_t ff_mult = 4;
};

class FusionBlock {
 public:
  FusionBlock(nn::ParameterStore& store, const std::string& prefix, FusionConfig cfg, util::Rng& rng);

  // encoded[l] is T_l x d_model; returns T_q x d_k.
  nn::Var forward(nn::Tape& t, std::span<const nn::Var> encoded, std::size_t query_index) const;

  const FusionConfig& config() const { return cfg_; }
  nn::Parameter& w_query() const { return *wq_; }
  nn::Parameter& w_key() const { return *wk_; }
  nn::Parameter& w_value() const { return *wv_; }

  // Canonical checkpoint names of every parameter owned by a block at prefix.
  static std::vector<std::string> parameter_names(const std::string& prefix);

 private:
  FusionConfig cfg_;
  nn::Parameter* wq_;
  nn::Parameter* wk_;
  nn::Parameter* wv_;
  nn::LayerNorm norm_;
  nn::FeedForward ff_;
};

struct FusedArticle {
  nn::Matrix matrix;  // T_q x d_k
};

// Throws std::invalid_argument when the query language is absent, the list is
// empty, or widths disagree with the block.
FusedArticle fuse_articles(const std::vector<encoding::EncodedArticle>& encoded, const std::string& query,
                           const FusionBlock& block);

}  // namespace shortdesc::fusion
