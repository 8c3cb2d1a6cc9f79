#pragma once

// Pairwise comparison of systems from per-instance scores: outcome counts,
// Bradley-Terry strengths and exact sign tests.

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace shortdesc::analysis {

using InstanceKey = std::pair<std::string, std::string>;  // (entity id, language)
using InstanceScores = std::map<InstanceKey, double>;

struct OutcomeMatrix {
  std::vector<std::string> systems;
  std::vector<std::vector<std::size_t>> wins;  // wins[i][j]: i strictly beats j
  std::vector<std::vector<std::size_t>> ties;  // symmetric

  explicit OutcomeMatrix(std::vector<std::string> systems = {});
  std::size_t size() const { return systems.size(); }
  std::size_t shared(std::size_t i, std::size_t j) const { return wins[i][j] + wins[j][i] + ties[i][j]; }
  std::size_t index(const std::string& system) const;  // throws std::out_of_range

  void validate() const;
  nlohmann::json to_json() const;
  static OutcomeMatrix from_json(const nlohmann::json& j);
};

// Compares every pair of systems on the instances both have scores for.
OutcomeMatrix build_outcomes(const std::vector<std::string>& systems, const std::vector<InstanceScores>& scores);

struct BTScores {
  std::vector<std::string> systems;
  std::vector<double> strength;  // strength[0] == 1
  std::size_t iterations = 0;

  double probability(std::size_t i, std::size_t j) const { return strength[i] / (strength[i] + strength[j]); }
};

struct BTOptions {
  double tolerance = 1e-10;  // max relative change of any strength
  std::size_t max_iterations = 1000000;
};

class BTError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Maximum-likelihood strengths by minorization-maximization; each tie adds
// half a win to both sides. Requires every system to be reachable from every
// other along win edges; otherwise throws BTError naming the systems.
BTScores fit_bradley_terry(const OutcomeMatrix& outcomes, const BTOptions& options = {});

// Exact two-sided binomial test of H0: p = 1/2 given the two win counts.
double sign_test(std::size_t wins_ij, std::size_t wins_ji);

struct PairwiseCell {
  std::string row;
  std::string col;
  double bt_probability = 0.0;
  double win_fraction = 0.0;  // wins / (wins + losses); ties excluded
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double sign_p = 1.0;
  bool significant = false;  // sign_p < 0.05
};

// Every ordered pair (i != j).
std::vector<PairwiseCell> pairwise_table(const OutcomeMatrix& outcomes, const BTScores& scores);

}  // namespace shortdesc::analysis
