#pragma once

// Transformer building blocks. Each block registers its parameters in a
// ParameterStore under a name prefix at construction time and looks them up
// again when applied, so blocks are cheap handles over shared storage.

#include <cstddef>
#include <string>

#include "shortdesc/nn/tape.hpp"
#include "shortdesc/util/random.hpp"

namespace shortdesc::nn {

class LayerNorm {
 public:
  LayerNorm(ParameterStore& store, std::string prefix, std::size_t dim);
  Var apply(Tape& t, Var x) const;

 private:
  Parameter* gain_;
  Parameter* bias_;
};

class Linear {
 public:
  Linear(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out, util::Rng& rng,
         bool with_bias = true);
  Var apply(Tape& t, Var x) const;
  Parameter& weight() const { return *weight_; }

 private:
  Parameter* weight_;
  Parameter* bias_ = nullptr;
};

// in -> hidden (GELU) -> out
class FeedForward {
 public:
  FeedForward(ParameterStore& store, std::string prefix, std::size_t dim, std::size_t hidden,
              util::Rng& rng);
  Var apply(Tape& t, Var x) const;

 private:
  Linear up_;
  Linear down_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention(ParameterStore& store, std::string prefix, std::size_t dim, std::size_t heads,
                     util::Rng& rng);
  // queries: [Tq, dim], keys_values: [Tk, dim]
  Var apply(Tape& t, Var queries, Var keys_values, bool causal) const;

 private:
  std::size_t dim_;
  std::size_t heads_;
  std::size_t head_dim_;
  std::vector<Parameter*> wq_, wk_, wv_;
  Linear out_;
};

// Sinusoidal position table [rows, dim].
Matrix sinusoidal_positions(std::size_t rows, std::size_t dim);

}  // namespace shortdesc::nn
