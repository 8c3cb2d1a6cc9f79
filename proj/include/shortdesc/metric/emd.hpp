#pragma once

// Earth mover's distance between weighted point sets.
//
// Problems with m * n <= exact_limit are solved exactly with the
// transportation simplex. Larger ones use log-domain Sinkhorn iterations with
// epsilon scaling, finished with Newton steps on the dual when the scaling
// stalls. The reported cost is <P, C> of the regularized plan after rounding
// it onto the exact marginals. emd() falls back to the exact solver when
// the iterations do not converge.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "shortdesc/nn/matrix.hpp"

namespace shortdesc::metric {

struct TokenDistribution {
  nn::Matrix embeddings;       // m x d
  std::vector<double> masses;  // m, nonnegative, sums to 1

  // Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
  static TokenDistribution uniform(nn::Matrix embeddings);
};

// Pairwise Euclidean distances, a.rows() x b.rows().
nn::Matrix euclidean_cost(const nn::Matrix& a, const nn::Matrix& b);

struct TransportResult {
  double cost = 0.0;
  nn::Matrix plan;
  std::size_t iterations = 0;
  double residual = 0.0;  // Sinkhorn: L1 marginal violation before rounding
};

// Exact optimal transport between supplies p and demands q (equal totals).
TransportResult exact_transport(const std::vector<double>& p, const std::vector<double>& q, const nn::Matrix& cost);

struct SinkhornOptions {
  double epsilon = 1e-3;       // final regularization strength
  double tolerance = 1e-6;     // L1 marginal violation at the final epsilon
  std::size_t max_iterations = 50000;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}
  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

TransportResult sinkhorn_transport(const std::vector<double>& p, const std::vector<double>& q, const nn::Matrix& cost,
                                   const SinkhornOptions& options = {});

struct EmdOptions {
  std::size_t exact_limit = 4096;  // largest m * n solved exactly
  SinkhornOptions sinkhorn;
};

// Zero when the two weighted point multisets coincide exactly.
double emd(const TokenDistribution& p, const TokenDistribution& q, const EmdOptions& options = {});

}  // namespace shortdesc::metric
