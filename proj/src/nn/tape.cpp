#include "shortdesc/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "shortdesc/kernels/kernels.hpp"
#include "shortdesc/util/random.hpp"

namespace shortdesc::nn {

// ---- ParameterStore -------------------------------------------------------

Parameter& ParameterStore::create(const std::string& name, std::size_t rows, std::size_t cols) {
  auto [it, inserted] = params_.try_emplace(name, std::make_unique<Parameter>());
  if (!inserted) throw std::invalid_argument("duplicate parameter: " + name);
  it->second->name = name;
  it->second->value = Matrix(rows, cols);
  it->second->grad = Matrix(rows, cols);
  return *it->second;
}

Parameter& ParameterStore::create_gaussian(const std::string& name, std::size_t rows,
                                           std::size_t cols, double stddev, std::mt19937_64& rng) {
  Parameter& p = create(name, rows, cols);
  for (double& v : p.value.values()) v = stddev * util::gaussian(rng);
  return p;
}

Parameter& ParameterStore::create_constant(const std::string& name, std::size_t rows,
                                           std::size_t cols, double value) {
  Parameter& p = create(name, rows, cols);
  p.value.fill(value);
  return p;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p->grad.fill(0.0);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p->value.size();
  return n;
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

// ---- Tape -----------------------------------------------------------------

Var Tape::push(Matrix value, bool needs_grad, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && record_;
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::input(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::param(Parameter& p) {
  Node n;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.index);
  return n.param != nullptr ? n.param->value : n.value;
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.index);
  return n.param != nullptr ? n.param->grad : n.grad;
}

Matrix& Tape::grad_mut(Var v) {
  Node& n = nodes_[v.index];
  if (n.param != nullptr) {
    if (!n.param->grad.same_shape(n.param->value))
      n.param->grad = Matrix(n.param->value.rows(), n.param->value.cols());
    return n.param->grad;
  }
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out) {
  if (!record_) throw std::logic_error("backward on a non-recording tape");
  const Matrix& v = value(out);
  if (v.rows() != 1 || v.cols() != 1) throw std::invalid_argument("backward needs a 1x1 output");
  grad_mut(out)(0, 0) += 1.0;
  for (std::size_t i = out.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

// ---- ops ------------------------------------------------------------------

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.cols() == B.rows(), "matmul: inner dimension mismatch");
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Matrix C(m, n);
  kernels::gemm_nn(A.data(), B.data(), C.data(), m, k, n);
  return t.push(std::move(C), t.needs_grad(a) || t.needs_grad(b), [a, b, m, k, n](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    if (t.needs_grad(a)) kernels::gemm_nt(G.data(), t.value(b).data(), t.grad_mut(a).data(), m, n, k);
    if (t.needs_grad(b)) kernels::gemm_tn(t.value(a).data(), G.data(), t.grad_mut(b).data(), m, k, n);
  });
}

Var matmul_nt(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.cols() == B.cols(), "matmul_nt: inner dimension mismatch");
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  Matrix C(m, n);
  kernels::gemm_nt(A.data(), B.data(), C.data(), m, k, n);
  return t.push(std::move(C), t.needs_grad(a) || t.needs_grad(b), [a, b, m, k, n](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    if (t.needs_grad(a)) kernels::gemm_nn(G.data(), t.value(b).data(), t.grad_mut(a).data(), m, n, k);
    if (t.needs_grad(b)) kernels::gemm_tn(G.data(), t.value(a).data(), t.grad_mut(b).data(), m, n, k);
  });
}

Var add(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.same_shape(B), "add: shape mismatch");
  Matrix C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
  return t.push(std::move(C), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    for (Var v : {a, b}) {
      if (!t.needs_grad(v)) continue;
      Matrix& D = t.grad_mut(v);
      for (std::size_t i = 0; i < D.size(); ++i) D[i] += G[i];
    }
  });
}

Var add_row(Tape& t, Var a, Var row) {
  const Matrix& A = t.value(a);
  const Matrix& R = t.value(row);
  require(R.rows() == 1 && R.cols() == A.cols(), "add_row: shape mismatch");
  Matrix C = A;
  for (std::size_t r = 0; r < C.rows(); ++r)
    for (std::size_t c = 0; c < C.cols(); ++c) C(r, c) += R[c];
  return t.push(std::move(C), t.needs_grad(a) || t.needs_grad(row), [a, row](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    if (t.needs_grad(a)) {
      Matrix& D = t.grad_mut(a);
      for (std::size_t i = 0; i < D.size(); ++i) D[i] += G[i];
    }
    if (t.needs_grad(row)) {
      Matrix& D = t.grad_mut(row);
      for (std::size_t r = 0; r < G.rows(); ++r)
        for (std::size_t c = 0; c < G.cols(); ++c) D[c] += G(r, c);
    }
  });
}

Var scale(Tape& t, Var a, double s) {
  Matrix C = t.value(a);
  for (double& v : C.values()) v *= s;
  return t.push(std::move(C), t.needs_grad(a), [a, s](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    kernels::axpy(s, G.data(), t.grad_mut(a).data(), G.size());
  });
}

Var hadamard(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  require(A.same_shape(B), "hadamard: shape mismatch");
  Matrix C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  return t.push(std::move(C), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    if (t.needs_grad(a)) {
      Matrix& D = t.grad_mut(a);
      const Matrix& B = t.value(b);
      for (std::size_t i = 0; i < D.size(); ++i) D[i] += G[i] * B[i];
    }
    if (t.needs_grad(b)) {
      Matrix& D = t.grad_mut(b);
      const Matrix& A = t.value(a);
      for (std::size_t i = 0; i < D.size(); ++i) D[i] += G[i] * A[i];
    }
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

Var gelu(Tape& t, Var a) {
  Matrix C = t.value(a);
  for (double& v : C.values()) v = gelu_value(v);
  return t.push(std::move(C), t.needs_grad(a), [a](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    const Matrix& X = t.value(a);
    Matrix& D = t.grad_mut(a);
    for (std::size_t i = 0; i < D.size(); ++i) {
      const double x = X[i];
      const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      const double d = 0.5 * (1.0 + th) +
                       0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      D[i] += G[i] * d;
    }
  });
}

Var softmax_rows(Tape& t, Var a, bool causal) {
  const Matrix& A = t.value(a);
  Matrix Y(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const std::size_t limit = causal ? std::min(A.cols(), r + 1) : A.cols();
    double mx = -INFINITY;
    for (std::size_t c = 0; c < limit; ++c) mx = std::max(mx, A(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < limit; ++c) {
      Y(r, c) = std::exp(A(r, c) - mx);
      sum += Y(r, c);
    }
    for (std::size_t c = 0; c < limit; ++c) Y(r, c) /= sum;
  }
  return t.push(std::move(Y), t.needs_grad(a), [a](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    const Matrix& Yv = t.value(Var{self});
    Matrix& D = t.grad_mut(a);
    for (std::size_t r = 0; r < Yv.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < Yv.cols(); ++c) s += G(r, c) * Yv(r, c);
      for (std::size_t c = 0; c < Yv.cols(); ++c) D(r, c) += Yv(r, c) * (G(r, c) - s);
    }
  });
}

Var layer_norm(Tape& t, Var a, Var gain, Var bias, double eps) {
  const Matrix& X = t.value(a);
  const Matrix& g = t.value(gain);
  const Matrix& b = t.value(bias);
  const std::size_t n = X.cols();
  require(g.rows() == 1 && g.cols() == n && b.rows() == 1 && b.cols() == n,
          "layer_norm: gain/bias shape mismatch");
  auto xhat = std::make_shared<Matrix>(X.rows(), n);
  auto inv_sigma = std::make_shared<std::vector<double>>(X.rows());
  Matrix Y(X.rows(), n);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += X(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (X(r, c) - mu) * (X(r, c) - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      (*xhat)(r, c) = (X(r, c) - mu) * is;
      Y(r, c) = g[c] * (*xhat)(r, c) + b[c];
    }
  }
  const bool ng = t.needs_grad(a) || t.needs_grad(gain) || t.needs_grad(bias);
  return t.push(std::move(Y), ng, [a, gain, bias, xhat, inv_sigma, n](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    const Matrix& gv = t.value(gain);
    if (t.needs_grad(gain)) {
      Matrix& Dg = t.grad_mut(gain);
      for (std::size_t r = 0; r < G.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) Dg[c] += G(r, c) * (*xhat)(r, c);
    }
    if (t.needs_grad(bias)) {
      Matrix& Db = t.grad_mut(bias);
      for (std::size_t r = 0; r < G.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) Db[c] += G(r, c);
    }
    if (t.needs_grad(a)) {
      Matrix& D = t.grad_mut(a);
      std::vector<double> dxh(n);
      for (std::size_t r = 0; r < G.rows(); ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          dxh[c] = G(r, c) * gv[c];
          m1 += dxh[c];
          m2 += dxh[c] * (*xhat)(r, c);
        }
        m1 /= static_cast<double>(n);
        m2 /= static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c)
          D(r, c) += (*inv_sigma)[r] * (dxh[c] - m1 - (*xhat)(r, c) * m2);
      }
    }
  });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t cols = t.cols(parts[0]);
  std::size_t rows = 0;
  bool ng = false;
  for (Var p : parts) {
    require(t.cols(p) == cols, "concat_rows: column mismatch");
    rows += t.rows(p);
    ng = ng || t.needs_grad(p);
  }
  Matrix C(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& P = t.value(p);
    std::copy(P.values().begin(), P.values().end(), C.values().begin() + static_cast<std::ptrdiff_t>(off * cols));
    off += P.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.push(std::move(C), ng, [ps, cols](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    std::size_t off = 0;
    for (Var p : ps) {
      const std::size_t r = t.rows(p);
      if (t.needs_grad(p)) {
        Matrix& D = t.grad_mut(p);
        for (std::size_t i = 0; i < r * cols; ++i) D[i] += G[off * cols + i];
      }
      off += r;
    }
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = t.rows(parts[0]);
  std::size_t cols = 0;
  bool ng = false;
  for (Var p : parts) {
    require(t.rows(p) == rows, "concat_cols: row mismatch");
    cols += t.cols(p);
    ng = ng || t.needs_grad(p);
  }
  Matrix C(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& P = t.value(p);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < P.cols(); ++c) C(r, off + c) = P(r, c);
    off += P.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.push(std::move(C), ng, [ps, rows](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    std::size_t off = 0;
    for (Var p : ps) {
      const std::size_t pc = t.cols(p);
      if (t.needs_grad(p)) {
        Matrix& D = t.grad_mut(p);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < pc; ++c) D(r, c) += G(r, off + c);
      }
      off += pc;
    }
  });
}

Var slice_cols(Tape& t, Var a, std::size_t begin, std::size_t count) {
  const Matrix& A = t.value(a);
  require(begin + count <= A.cols(), "slice_cols: out of range");
  Matrix C(A.rows(), count);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) C(r, c) = A(r, begin + c);
  return t.push(std::move(C), t.needs_grad(a), [a, begin, count](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    Matrix& D = t.grad_mut(a);
    for (std::size_t r = 0; r < G.rows(); ++r)
      for (std::size_t c = 0; c < count; ++c) D(r, begin + c) += G(r, c);
  });
}

Var mean_rows(Tape& t, Var a) {
  const Matrix& A = t.value(a);
  require(A.rows() > 0, "mean_rows: empty input");
  Matrix C(1, A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) C[c] += A(r, c);
  const double inv = 1.0 / static_cast<double>(A.rows());
  for (double& v : C.values()) v *= inv;
  return t.push(std::move(C), t.needs_grad(a), [a, inv](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    Matrix& D = t.grad_mut(a);
    for (std::size_t r = 0; r < D.rows(); ++r)
      for (std::size_t c = 0; c < D.cols(); ++c) D(r, c) += G[c] * inv;
  });
}

Var average(Tape& t, std::span<const Var> parts) {
  require(!parts.empty(), "average: no inputs");
  Matrix C = t.value(parts[0]);
  bool ng = t.needs_grad(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const Matrix& P = t.value(parts[i]);
    require(P.same_shape(C), "average: shape mismatch");
    for (std::size_t j = 0; j < C.size(); ++j) C[j] += P[j];
    ng = ng || t.needs_grad(parts[i]);
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (double& v : C.values()) v *= inv;
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.push(std::move(C), ng, [ps, inv](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    for (Var p : ps) {
      if (!t.needs_grad(p)) continue;
      kernels::axpy(inv, G.data(), t.grad_mut(p).data(), G.size());
    }
  });
}

Var embedding(Tape& t, Parameter& table, std::span<const int> ids) {
  const std::size_t d = table.value.cols();
  Matrix C(ids.size(), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto id = static_cast<std::size_t>(ids[r]);
    require(id < table.value.rows(), "embedding: id out of range");
    std::copy_n(table.value.data() + id * d, d, C.data() + r * d);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  Parameter* p = &table;
  return t.push(std::move(C), true, [p, idv, d](Tape& t, std::size_t self) {
    const Matrix& G = t.grad_of_node(self);
    if (!p->grad.same_shape(p->value)) p->grad = Matrix(p->value.rows(), p->value.cols());
    for (std::size_t r = 0; r < idv.size(); ++r)
      kernels::axpy(1.0, G.data() + r * d, p->grad.data() + static_cast<std::size_t>(idv[r]) * d, d);
  });
}

Var cross_entropy_sum(Tape& t, Var logits, std::span<const int> targets) {
  const Matrix& L = t.value(logits);
  require(L.rows() == targets.size(), "cross_entropy_sum: target count mismatch");
  auto probs = std::make_shared<Matrix>(L.rows(), L.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < L.rows(); ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < L.cols(); ++c) mx = std::max(mx, L(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < L.cols(); ++c) {
      (*probs)(r, c) = std::exp(L(r, c) - mx);
      sum += (*probs)(r, c);
    }
    for (std::size_t c = 0; c < L.cols(); ++c) (*probs)(r, c) /= sum;
    const auto tgt = static_cast<std::size_t>(targets[r]);
    require(tgt < L.cols(), "cross_entropy_sum: target out of range");
    loss -= L(r, tgt) - mx - std::log(sum);
  }
  std::vector<int> tv(targets.begin(), targets.end());
  return t.push(Matrix(1, 1, loss), t.needs_grad(logits), [logits, probs, tv](Tape& t, std::size_t self) {
    const double g = t.grad_of_node(self)[0];
    Matrix& D = t.grad_mut(logits);
    for (std::size_t r = 0; r < probs->rows(); ++r) {
      for (std::size_t c = 0; c < probs->cols(); ++c) D(r, c) += g * (*probs)(r, c);
      D(r, static_cast<std::size_t>(tv[r])) -= g;
    }
  });
}

Var sum_all(Tape& t, Var a) {
  const Matrix& A = t.value(a);
  const double s = std::accumulate(A.values().begin(), A.values().end(), 0.0);
  return t.push(Matrix(1, 1, s), t.needs_grad(a), [a](Tape& t, std::size_t self) {
    const double g = t.grad_of_node(self)[0];
    Matrix& D = t.grad_mut(a);
    for (double& v : D.values()) v += g;
  });
}

}  // namespace shortdesc::nn
