#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "shortdesc/nn/layers.hpp"
#include "shortdesc/nn/optim.hpp"
#include "support.hpp"

using namespace shortdesc;
using namespace shortdesc::nn;
using testing::random_matrix;

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Analytic gradient of sum(weights .* f(inputs)) against central differences.
double grad_check(std::vector<Matrix> inputs, const Builder& f, std::uint64_t seed = 1) {
  util::Rng rng(seed);
  Matrix weights;
  auto run = [&](Tape& t, std::vector<Var>& vars) {
    vars.clear();
    for (const Matrix& m : inputs) vars.push_back(t.input(m));
    Var out = f(t, vars);
    if (weights.empty()) weights = random_matrix(t.rows(out), t.cols(out), rng);
    return sum_all(t, hadamard(t, out, t.constant(weights)));
  };
  Tape t;
  std::vector<Var> vars;
  Var loss = run(t, vars);
  t.backward(loss);
  std::vector<double> analytic;
  for (Var v : vars)
    for (double g : t.grad(v).values()) analytic.push_back(g);

  std::vector<double*> xs;
  for (Matrix& m : inputs)
    for (double& x : m.values()) xs.push_back(&x);
  const auto numeric = testing::numeric_gradient(xs, [&] {
    Tape t2(false);
    std::vector<Var> v2;
    return t2.value(run(t2, v2))(0, 0);
  });
  return testing::relative_error(analytic, numeric);
}

}  // namespace

TEST_CASE("operation gradients match finite differences") {
  util::Rng rng(3);
  auto M = [&](std::size_t r, std::size_t c) { return random_matrix(r, c, rng); };
  const double tol = 1e-7;
  CHECK(grad_check({M(3, 4), M(4, 2)}, [](Tape& t, auto& v) { return matmul(t, v[0], v[1]); }) < tol);
  CHECK(grad_check({M(3, 4), M(5, 4)}, [](Tape& t, auto& v) { return matmul_nt(t, v[0], v[1]); }) < tol);
  CHECK(grad_check({M(3, 4), M(3, 4)}, [](Tape& t, auto& v) { return add(t, v[0], v[1]); }) < tol);
  CHECK(grad_check({M(3, 4), M(1, 4)}, [](Tape& t, auto& v) { return add_row(t, v[0], v[1]); }) < tol);
  CHECK(grad_check({M(2, 3)}, [](Tape& t, auto& v) { return scale(t, v[0], -1.7); }) < tol);
  CHECK(grad_check({M(3, 5)}, [](Tape& t, auto& v) { return gelu(t, v[0]); }) < tol);
  CHECK(grad_check({M(4, 4)}, [](Tape& t, auto& v) { return softmax_rows(t, v[0]); }) < tol);
  CHECK(grad_check({M(4, 4)}, [](Tape& t, auto& v) { return softmax_rows(t, v[0], true); }) < tol);
  CHECK(grad_check({M(3, 6), M(1, 6), M(1, 6)}, [](Tape& t, auto& v) { return layer_norm(t, v[0], v[1], v[2]); }) <
        1e-6);
  CHECK(grad_check({M(2, 3), M(1, 3), M(4, 3)}, [](Tape& t, auto& v) { return concat_rows(t, v); }) < tol);
  CHECK(grad_check({M(2, 3), M(2, 1)}, [](Tape& t, auto& v) { return concat_cols(t, v); }) < tol);
  CHECK(grad_check({M(3, 6)}, [](Tape& t, auto& v) { return slice_cols(t, v[0], 2, 3); }) < tol);
  CHECK(grad_check({M(5, 3)}, [](Tape& t, auto& v) { return mean_rows(t, v[0]); }) < tol);
  CHECK(grad_check({M(2, 3), M(2, 3), M(2, 3)}, [](Tape& t, auto& v) { return average(t, v); }) < tol);
  CHECK(grad_check({M(2, 3), M(2, 3)}, [](Tape& t, auto& v) { return hadamard(t, v[0], v[1]); }) < tol);
  const std::vector<int> targets{2, 0, 4};
  CHECK(grad_check({M(3, 5)}, [&](Tape& t, auto& v) { return cross_entropy_sum(t, v[0], targets); }) < tol);
}

TEST_CASE("softmax rows sum to one and causal mask zeroes the future") {
  util::Rng rng(4);
  Tape t(false);
  const Matrix& s = t.value(softmax_rows(t, t.constant(random_matrix(4, 4, rng)), true));
  for (std::size_t r = 0; r < 4; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      sum += s(r, c);
      if (c > r) CHECK(s(r, c) == 0.0);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("cross entropy of uniform logits is n ln V") {
  Tape t(false);
  const std::vector<int> targets{1, 2, 3};
  const double v = t.value(cross_entropy_sum(t, t.constant(Matrix(3, 7, 0.25)), targets))(0, 0);
  CHECK(v == doctest::Approx(3.0 * std::log(7.0)).epsilon(1e-14));
}

TEST_CASE("parameter gradients accumulate through embedding and layers") {
  util::Rng rng(8);
  ParameterStore store;
  Parameter& table = store.create_gaussian("emb", 6, 4, 1.0, rng);
  const MultiHeadAttention attn(store, "attn", 4, 2, rng);
  const FeedForward ff(store, "ff", 4, 8, rng);
  const LayerNorm ln(store, "ln", 4);
  for (Parameter* p : store.all())
    for (double& x : p->value.values()) x += 0.1 * util::gaussian(rng);
  const std::vector<int> ids{1, 4, 4, 0};
  const std::vector<int> targets{0, 1, 2, 3};
  auto loss = [&](Tape& t) {
    Var x = embedding(t, table, ids);
    Var h = add(t, x, attn.apply(t, ln.apply(t, x), x, true));
    h = add(t, h, ff.apply(t, h));
    return cross_entropy_sum(t, h, targets);
  };
  store.zero_grad();
  Tape t;
  t.backward(loss(t));
  std::vector<double> analytic;
  std::vector<double*> xs;
  for (Parameter* p : store.all()) {
    for (double g : p->grad.values()) analytic.push_back(g);
    for (double& x : p->value.values()) xs.push_back(&x);
  }
  const auto numeric = testing::numeric_gradient(xs, [&] {
    Tape t2(false);
    return t2.value(loss(t2))(0, 0);
  });
  CHECK(testing::relative_error(analytic, numeric) < 1e-6);
}

TEST_CASE("adam reduces a quadratic and clipping bounds the norm") {
  ParameterStore store;
  Parameter& p = store.create_constant("x", 1, 3, 5.0);
  Adam opt(store, AdamOptions{0.1});
  for (int i = 0; i < 300; ++i) {
    store.zero_grad();
    Tape t;
    Var x = t.param(p);
    t.backward(sum_all(t, hadamard(t, x, x)));
    opt.step();
  }
  for (double v : p.value.values()) CHECK(std::abs(v) < 0.1);
  CHECK(opt.steps_taken() == 300);

  store.zero_grad();
  p.grad = Matrix(1, 3, std::vector<double>{3.0, 4.0, 0.0});
  CHECK(clip_grad_norm(store, 1.0) == doctest::Approx(5.0));
  CHECK(global_grad_norm(store) == doctest::Approx(1.0));
}

TEST_CASE("shape errors are reported") {
  Tape t;
  CHECK_THROWS(matmul(t, t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3))));
  CHECK_THROWS(add(t, t.constant(Matrix(2, 3)), t.constant(Matrix(3, 2))));
  CHECK_THROWS(Matrix(2, 2, std::vector<double>{1.0}));
}
