#include "shortdesc/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace shortdesc::nn {

LayerNorm::LayerNorm(ParameterStore& store, std::string prefix, std::size_t dim)
    : gain_(&store.create_constant(prefix + ".gain", 1, dim, 1.0)),
      bias_(&store.create_constant(prefix + ".bias", 1, dim, 0.0)) {}

Var LayerNorm::apply(Tape& t, Var x) const {
  return layer_norm(t, x, t.param(*gain_), t.param(*bias_));
}

Linear::Linear(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out,
               util::Rng& rng, bool with_bias)
    : weight_(&store.create_gaussian(prefix + ".weight", in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng)) {
  if (with_bias) bias_ = &store.create_constant(prefix + ".bias", 1, out, 0.0);
}

Var Linear::apply(Tape& t, Var x) const {
  Var y = matmul(t, x, t.param(*weight_));
  return bias_ != nullptr ? add_row(t, y, t.param(*bias_)) : y;
}

FeedForward::FeedForward(ParameterStore& store, std::string prefix, std::size_t dim,
                         std::size_t hidden, util::Rng& rng)
    : up_(store, prefix + ".up", dim, hidden, rng), down_(store, prefix + ".down", hidden, dim, rng) {}

Var FeedForward::apply(Tape& t, Var x) const { return down_.apply(t, gelu(t, up_.apply(t, x))); }

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, std::string prefix, std::size_t dim,
                                       std::size_t heads, util::Rng& rng)
    : dim_(dim),
      heads_(heads),
      head_dim_(heads == 0 ? 0 : dim / heads),
      out_(store, prefix + ".out", dim, dim, rng) {
  if (heads == 0 || dim % heads != 0) throw std::invalid_argument("attention: dim must divide into heads");
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    wq_.push_back(&store.create_gaussian(hp + ".wq", dim, head_dim_, sd, rng));
    wk_.push_back(&store.create_gaussian(hp + ".wk", dim, head_dim_, sd, rng));
    wv_.push_back(&store.create_gaussian(hp + ".wv", dim, head_dim_, sd, rng));
  }
}

Var MultiHeadAttention::apply(Tape& t, Var queries, Var keys_values, bool causal) const {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  std::vector<Var> outs;
  outs.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    Var q = matmul(t, queries, t.param(*wq_[h]));
    Var k = matmul(t, keys_values, t.param(*wk_[h]));
    Var v = matmul(t, keys_values, t.param(*wv_[h]));
    Var w = softmax_rows(t, scale(t, matmul_nt(t, q, k), inv_sqrt), causal);
    outs.push_back(matmul(t, w, v));
  }
  Var joined = heads_ == 1 ? outs[0] : concat_cols(t, outs);
  return out_.apply(t, joined);
}

Matrix sinusoidal_positions(std::size_t rows, std::size_t dim) {
  Matrix pe(rows, dim);
  for (std::size_t pos = 0; pos < rows; ++pos) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

}  // namespace shortdesc::nn
