#include "shortdesc/metric/emd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "shortdesc/kernels/kernels.hpp"

namespace shortdesc::metric {

namespace {

constexpr double kMassTolerance = 1e-9;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void check_marginals(const std::vector<double>& p, const std::vector<double>& q, const nn::Matrix& cost) {
  if (p.empty() || q.empty()) throw std::invalid_argument("transport: empty marginal");
  if (cost.rows() != p.size() || cost.cols() != q.size())
    throw std::invalid_argument("transport: cost shape " + nn::shape_string(cost) + " does not match marginals");
  for (double x : p)
    if (!(x >= 0.0)) throw std::invalid_argument("transport: negative or NaN supply");
  for (double x : q)
    if (!(x >= 0.0)) throw std::invalid_argument("transport: negative or NaN demand");
  if (std::abs(sum(p) - sum(q)) > kMassTolerance) throw std::invalid_argument("transport: unbalanced marginals");
  if (!cost.all_finite()) throw std::invalid_argument("transport: non-finite cost");
}

}  // namespace

void TokenDistribution::validate() const {
  if (embeddings.rows() == 0) throw std::invalid_argument("distribution has no points");
  if (masses.size() != embeddings.rows()) throw std::invalid_argument("distribution mass count mismatch");
  if (!embeddings.all_finite()) throw std::invalid_argument("distribution has non-finite embeddings");
  for (double m : masses)
    if (!(m >= 0.0)) throw std::invalid_argument("distribution has a negative mass");
  if (std::abs(sum(masses) - 1.0) > kMassTolerance) throw std::invalid_argument("distribution masses must sum to 1");
}

TokenDistribution TokenDistribution::uniform(nn::Matrix embeddings) {
  const std::size_t m = embeddings.rows();
  if (m == 0) throw std::invalid_argument("distribution has no points");
  return TokenDistribution{std::move(embeddings), std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

nn::Matrix euclidean_cost(const nn::Matrix& a, const nn::Matrix& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("cost: embedding widths differ");
  nn::Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      c(i, j) = std::sqrt(kernels::squared_distance(a.row(i).data(), b.row(j).data(), a.cols()));
  return c;
}

// Transportation simplex. The basis is a spanning tree of the bipartite graph
// rows + columns with m + n - 1 cells (degenerate zero cells included).
// Entering cells follow Bland's rule, which rules out cycling.
TransportResult exact_transport(const std::vector<double>& p, const std::vector<double>& q, const nn::Matrix& cost) {
  check_marginals(p, q, cost);
  const std::size_t m = p.size();
  const std::size_t n = q.size();
  nn::Matrix x(m, n);
  std::vector<std::vector<bool>> basic(m, std::vector<bool>(n, false));

  // North-west corner start; the last column absorbs rounding drift.
  {
    std::vector<double> s = p, d = q;
    std::size_t i = 0, j = 0;
    while (true) {
      const double f = std::min(s[i], d[j]);
      x(i, j) = f;
      basic[i][j] = true;
      s[i] -= f;
      d[j] -= f;
      if (i == m - 1 && j == n - 1) break;
      if (j == n - 1 || (i < m - 1 && s[i] <= d[j]))
        ++i;
      else
        ++j;
    }
  }

  double scale = 0.0;
  for (double c : cost.values()) scale = std::max(scale, std::abs(c));
  const double tol = 1e-12 * std::max(1.0, scale);

  std::size_t iterations = 0;
  const std::size_t nodes = m + n;
  std::vector<double> pot(nodes);
  std::vector<bool> known(nodes);
  std::vector<std::size_t> parent(nodes);
  std::vector<std::vector<std::size_t>> adj(nodes);

  for (;; ++iterations) {
    if (iterations > 100 * (m + n) * (m + n) + 1000) throw std::logic_error("transport simplex failed to terminate");
    for (auto& a : adj) a.clear();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (basic[i][j]) {
          adj[i].push_back(m + j);
          adj[m + j].push_back(i);
        }
    // Potentials u_i = pot[i], v_j = pot[m + j] with c_ij = u_i + v_j on the basis.
    std::fill(known.begin(), known.end(), false);
    std::vector<std::size_t> stack{0};
    pot[0] = 0.0;
    known[0] = true;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b : adj[a]) {
        if (known[b]) continue;
        const double c = a < m ? cost(a, b - m) : cost(b, a - m);
        pot[b] = c - pot[a];
        known[b] = true;
        stack.push_back(b);
      }
    }
    std::size_t ei = m, ej = n;
    for (std::size_t i = 0; i < m && ei == m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (!basic[i][j] && cost(i, j) - pot[i] - pot[m + j] < -tol) {
          ei = i;
          ej = j;
          break;
        }
    if (ei == m) break;

    // Tree path from column ej back to row ei closes the cycle.
    std::fill(known.begin(), known.end(), false);
    stack.assign(1, m + ej);
    known[m + ej] = true;
    while (!stack.empty() && !known[ei]) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b : adj[a]) {
        if (known[b]) continue;
        known[b] = true;
        parent[b] = a;
        stack.push_back(b);
      }
    }
    // Walk ei -> ... -> m + ej; cells alternate +, -, ... starting with the
    // cell next to ei after the entering cell (which is +).
    std::vector<std::pair<std::size_t, std::size_t>> cells;  // in walk order
    for (std::size_t a = ei; a != m + ej; a = parent[a]) {
      const std::size_t b = parent[a];
      cells.emplace_back(a < m ? a : b, a < m ? b - m : a - m);
    }
    // cells.back() touches column ej, so it is '-'; signs alternate from there.
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = cells.size();
    for (std::size_t k = cells.size(); k-- > 0;) {
      const bool minus = (cells.size() - 1 - k) % 2 == 0;
      if (!minus) continue;
      const double f = x(cells[k].first, cells[k].second);
      const auto key = cells[k].first * n + cells[k].second;
      if (f < theta || (f == theta && key < cells[leave].first * n + cells[leave].second)) {
        theta = f;
        leave = k;
      }
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const bool minus = (cells.size() - 1 - k) % 2 == 0;
      double& f = x(cells[k].first, cells[k].second);
      f += minus ? -theta : theta;
      if (f < 0.0) f = 0.0;
    }
    x(ei, ej) = theta;
    basic[ei][ej] = true;
    basic[cells[leave].first][cells[leave].second] = false;
    x(cells[leave].first, cells[leave].second) = 0.0;
  }

  TransportResult r;
  r.plan = std::move(x);
  r.iterations = iterations;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) r.cost += r.plan(i, j) * cost(i, j);
  return r;
}

namespace {

double log_sum_exp(const double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}


// Damped Newton ascent on the entropic dual, starting from Sinkhorn potentials.
// Returns the final L1 marginal violation. The last active column potential is
// held fixed to remove the (f + c, g - c) invariance.
double newton_polish(const std::vector<double>& p, const std::vector<double>& q, const nn::Matrix& cost, double eps,
                     std::vector<double>& f, std::vector<double>& g, double tolerance, std::size_t& iterations) {
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q[j] > 0.0) cols.push_back(j);
  const std::size_t m = rows.size(), n = cols.size(), k = m + n - 1;

  Eigen::MatrixXd plan(m, n);
  Eigen::VectorXd grad(m + n);
  auto evaluate = [&](const std::vector<double>& ff, const std::vector<double>& gg) {
    double dual = 0.0;
    for (std::size_t a = 0; a < m; ++a) dual += ff[rows[a]] * p[rows[a]];
    for (std::size_t b = 0; b < n; ++b) dual += gg[cols[b]] * q[cols[b]];
    grad.setZero();
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const double v = std::exp((ff[rows[a]] + gg[cols[b]] - cost(rows[a], cols[b])) / eps);
        plan(a, b) = v;
        dual -= eps * v;
        grad(a) += v;
        grad(m + b) += v;
      }
    for (std::size_t a = 0; a < m; ++a) grad(a) = p[rows[a]] - grad(a);
    for (std::size_t b = 0; b < n; ++b) grad(m + b) = q[cols[b]] - grad(m + b);
    return dual;
  };

  double dual = evaluate(f, g);
  double residual = grad.lpNorm<1>();
  for (std::size_t step = 0; step < 100 && residual > tolerance; ++step, ++iterations) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
    for (std::size_t a = 0; a < m; ++a) {
      h(a, a) = plan.row(a).sum();
      for (std::size_t b = 0; b + 1 < n; ++b) h(a, m + b) = h(m + b, a) = plan(a, b);
    }
    for (std::size_t b = 0; b + 1 < n; ++b) h(m + b, m + b) = plan.col(b).sum();
    h /= eps;
    h.diagonal().array() += 1e-14 * h.trace();
    const Eigen::VectorXd g_reduced = grad.head(k);
    const Eigen::VectorXd d = h.ldlt().solve(g_reduced);
    const double slope = g_reduced.dot(d);
    if (!d.allFinite() || !(slope > 0.0)) break;
    bool moved = false;
    for (double t = 1.0; t > 1e-12; t /= 2.0) {
      std::vector<double> ff = f, gg = g;
      for (std::size_t a = 0; a < m; ++a) ff[rows[a]] += t * d(a);
      for (std::size_t b = 0; b + 1 < n; ++b) gg[cols[b]] += t * d(m + b);
      const Eigen::VectorXd keep_grad = grad;
      const Eigen::MatrixXd keep_plan = plan;
      const double trial = evaluate(ff, gg);
      if (std::isfinite(trial) && trial >= dual + 1e-4 * t * slope) {
        f = std::move(ff);
        g = std::move(gg);
        dual = trial;
        moved = true;
        break;
      }
      grad = keep_grad;
      plan = keep_plan;
    }
    if (!moved) break;
    residual = grad.lpNorm<1>();
  }
  return residual;
}

}  // namespace

constexpr std::size_t kStageIterations = 2000;
constexpr std::size_t kStallWindow = 1000;

TransportResult sinkhorn_transport(const std::vector<double>& p, const std::vector<double>& q, const nn::Matrix& cost,
                                   const SinkhornOptions& options) {
  check_marginals(p, q, cost);
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
  const std::size_t m = p.size();
  const std::size_t n = q.size();
  std::vector<double> log_p(m), log_q(n);
  for (std::size_t i = 0; i < m; ++i) log_p[i] = p[i] > 0.0 ? std::log(p[i]) : -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) log_q[j] = q[j] > 0.0 ? std::log(q[j]) : -std::numeric_limits<double>::infinity();

  double cmax = 0.0;
  for (double c : cost.values()) cmax = std::max(cmax, c);
  // Dual potentials f, g; plan P_ij = exp((f_i + g_j - C_ij) / eps).
  std::vector<double> f(m, 0.0), g(n, 0.0), buf(std::max(m, n));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i)
    if (p[i] == 0.0) f[i] = neg_inf;
  for (std::size_t j = 0; j < n; ++j)
    if (q[j] == 0.0) g[j] = neg_inf;
  double eps = std::max(cmax, options.epsilon);
  std::size_t total = 0;
  double residual = std::numeric_limits<double>::infinity();

  auto plan_entry = [&](std::size_t i, std::size_t j) { return std::exp((f[i] + g[j] - cost(i, j)) / eps); };
  auto row_residual = [&]() {
    double r = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += plan_entry(i, j);
      r += std::abs(s - p[i]);
    }
    return r;
  };

  while (true) {
    const bool last = eps <= options.epsilon;
    // Earlier stages only warm-start the next one, so they stop early.
    const double stage_tol = last ? options.tolerance : std::max(options.tolerance, 1e-4);
    std::size_t it = 0;
    double window_start = std::numeric_limits<double>::infinity();
    for (;; ++it, ++total) {
      if (total >= options.max_iterations) {
        std::ostringstream msg;
        msg << "sinkhorn did not converge: " << total << " iterations, eps " << eps << ", marginal residual "
            << residual << " > " << stage_tol;
        throw ConvergenceError(msg.str(), total, residual);
      }
      for (std::size_t i = 0; i < m; ++i) {
        if (p[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) buf[j] = (g[j] - cost(i, j)) / eps;
        f[i] = eps * (log_p[i] - log_sum_exp(buf.data(), n));
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (q[j] == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i) buf[i] = (f[i] - cost(i, j)) / eps;
        g[j] = eps * (log_q[j] - log_sum_exp(buf.data(), m));
      }
      // Columns are exact after the g update; rows carry the error.
      if (it % 10 == 0 || last) {
        residual = row_residual();
        if (residual <= stage_tol) break;
      }
      // Nearly disconnected supports can freeze the scaling iterations; Newton steps finish those.
      if (last && it % kStallWindow == 0) {
        if (residual > 0.999 * window_start) {
          residual = newton_polish(p, q, cost, eps, f, g, options.tolerance, total);
          if (residual > options.tolerance) {
            std::ostringstream msg;
            msg << "sinkhorn did not converge: stalled after " << total << " iterations, eps " << eps
                << ", marginal residual " << residual << " > " << stage_tol;
            throw ConvergenceError(msg.str(), total, residual);
          }
          break;
        }
        window_start = residual;
      }
      if (!last && it >= kStageIterations) break;
    }
    if (last) break;
    eps = std::max(options.epsilon, eps / 4.0);
  }

  TransportResult r;
  r.plan = nn::Matrix(m, n);
  r.iterations = total;
  r.residual = residual;
  for (std::size_t i = 0; i < m; ++i) {
    if (p[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (q[j] != 0.0) r.plan(i, j) = plan_entry(i, j);
  }
  // Round onto the exact marginals (shrink rows, shrink columns, rank-one fill).
  std::vector<double> rows(m, 0.0), cols(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) rows[i] += r.plan(i, j);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = rows[i] > p[i] ? p[i] / rows[i] : 1.0;
    for (std::size_t j = 0; j < n; ++j) r.plan(i, j) *= s;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) cols[j] += r.plan(i, j);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = cols[j] > q[j] ? q[j] / cols[j] : 1.0;
    for (std::size_t i = 0; i < m; ++i) r.plan(i, j) *= s;
  }
  std::fill(rows.begin(), rows.end(), 0.0);
  std::fill(cols.begin(), cols.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      rows[i] += r.plan(i, j);
      cols[j] += r.plan(i, j);
    }
  double col_deficit = 0.0;
  for (std::size_t j = 0; j < n; ++j) col_deficit += cols[j] = std::max(0.0, q[j] - cols[j]);
  for (std::size_t i = 0; i < m; ++i) rows[i] = std::max(0.0, p[i] - rows[i]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (col_deficit > 0.0) r.plan(i, j) += rows[i] * cols[j] / col_deficit;
      r.cost += r.plan(i, j) * cost(i, j);
    }
  return r;
}

namespace {

// Rows of (embedding..., mass) sorted lexicographically.
std::vector<std::vector<double>> canonical_points(const TokenDistribution& d) {
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < d.embeddings.rows(); ++i) {
    auto row = d.embeddings.row(i);
    std::vector<double> v(row.begin(), row.end());
    v.push_back(d.masses[i]);
    pts.push_back(std::move(v));
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

}  // namespace

double emd(const TokenDistribution& p, const TokenDistribution& q, const EmdOptions& options) {
  p.validate();
  q.validate();
  if (p.embeddings.cols() != q.embeddings.cols()) throw std::invalid_argument("emd: embedding widths differ");
  auto cp = canonical_points(p), cq = canonical_points(q);
  if (cp == cq) return 0.0;
  // Solve in one fixed orientation so that emd(p, q) and emd(q, p) agree bit for bit.
  const TokenDistribution& a = cq < cp ? q : p;
  const TokenDistribution& b = cq < cp ? p : q;
  const nn::Matrix cost = euclidean_cost(a.embeddings, b.embeddings);
  if (a.masses.size() * b.masses.size() <= options.exact_limit) return exact_transport(a.masses, b.masses, cost).cost;
  try {
    return sinkhorn_transport(a.masses, b.masses, cost, options.sinkhorn).cost;
  } catch (const ConvergenceError&) {
    // Near-permutation optima (square, uniform) can stall the scaling iterations.
    return exact_transport(a.masses, b.masses, cost).cost;
  }
}

}  // namespace shortdesc::metric
