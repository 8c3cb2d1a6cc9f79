#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation of one forward pass. Parameters are leaves
// that alias their storage; gradients flow into Parameter::grad when
// Tape::backward is called. A tape is single-use and single-threaded.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shortdesc/nn/matrix.hpp"

namespace shortdesc::nn {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Owns named parameters. Iteration order is lexicographic by name, which
// fixes the layout of checkpoints and optimizer state.
class ParameterStore {
 public:
  Parameter& create(const std::string& name, std::size_t rows, std::size_t cols);
  Parameter& create_gaussian(const std::string& name, std::size_t rows, std::size_t cols,
                             double stddev, std::mt19937_64& rng);
  Parameter& create_constant(const std::string& name, std::size_t rows, std::size_t cols,
                             double value);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.contains(name); }

  void zero_grad();
  std::size_t scalar_count() const;
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

 private:
  std::map<std::string, std::unique_ptr<Parameter>> params_;
};

struct Var {
  std::size_t index = 0;
};

class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  // Leaf whose gradient is kept on the tape (read back via grad()).
  Var input(Matrix value);
  Var param(Parameter& p);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t rows(Var v) const { return value(v).rows(); }
  std::size_t cols(Var v) const { return value(v).cols(); }

  // Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(Var out);

  // Used by op implementations.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var push(Matrix value, bool needs_grad, BackwardFn fn);
  bool needs_grad(Var v) const { return nodes_[v.index].needs_grad; }
  Matrix& grad_mut(Var v);
  Matrix& grad_of_node(std::size_t i) { return grad_mut(Var{i}); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Parameter* param = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool record_;
};

// ---- operations --------------------------------------------------------
Var matmul(Tape& t, Var a, Var b);     // a[m,k] b[k,n]
Var matmul_nt(Tape& t, Var a, Var b);  // a[m,k] b[n,k]^T
Var add(Tape& t, Var a, Var b);
Var add_row(Tape& t, Var a, Var row);  // broadcast a 1 x n row over a
Var scale(Tape& t, Var a, double s);
Var gelu(Tape& t, Var a);
// Row-wise softmax; with causal=true entry (i, j) for j > i is masked.
Var softmax_rows(Tape& t, Var a, bool causal = false);
Var layer_norm(Tape& t, Var a, Var gain, Var bias, double eps = 1e-5);
Var concat_rows(Tape& t, std::span<const Var> parts);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var slice_cols(Tape& t, Var a, std::size_t begin, std::size_t count);
Var mean_rows(Tape& t, Var a);  // [m, n] -> [1, n]
Var average(Tape& t, std::span<const Var> parts);
Var embedding(Tape& t, Parameter& table, std::span<const int> ids);
// Sum over rows of -log softmax(logits)[row, target[row]]; returns 1 x 1.
Var cross_entropy_sum(Tape& t, Var logits, std::span<const int> targets);
Var sum_all(Tape& t, Var a);
Var hadamard(Tape& t, Var a, Var b);

double gelu_value(double x);

}  // namespace shortdesc::nn
