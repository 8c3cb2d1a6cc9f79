#include "shortdesc/nn/optim.hpp"

#include <cmath>

namespace shortdesc::nn {

Adam::Adam(ParameterStore& store, AdamOptions options) : params_(store.all()), options_(options) {
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step(double grad_scale) {
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    Matrix& m = m_[k];
    Matrix& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] * grad_scale;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
    }
  }
}

double global_grad_norm(const ParameterStore& store) {
  double s = 0.0;
  for (const Parameter* p : store.all())
    for (double g : p->grad.values()) s += g * g;
  return std::sqrt(s);
}

double clip_grad_norm(ParameterStore& store, double max_norm) {
  const double norm = global_grad_norm(store);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (Parameter* p : store.all())
      for (double& g : p->grad.values()) g *= f;
  }
  return norm;
}

}  // namespace shortdesc::nn
