#pragma once

#include <cstddef>
#include <vector>

#include "shortdesc/nn/tape.hpp"

namespace shortdesc::nn {

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive moment estimation over every parameter of a store.
class Adam {
 public:
  Adam(ParameterStore& store, AdamOptions options);

  // Applies one update from the accumulated gradients, scaled by grad_scale.
  void step(double grad_scale = 1.0);
  std::size_t steps_taken() const { return t_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamOptions options_;
  std::size_t t_ = 0;
};

double global_grad_norm(const ParameterStore& store);

// Rescales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(ParameterStore& store, double max_norm);

}  // namespace shortdesc::nn
