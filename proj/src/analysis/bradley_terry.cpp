#include "shortdesc/analysis/bradley_terry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shortdesc::analysis {

OutcomeMatrix::OutcomeMatrix(std::vector<std::string> s)
    : systems(std::move(s)),
      wins(systems.size(), std::vector<std::size_t>(systems.size(), 0)),
      ties(systems.size(), std::vector<std::size_t>(systems.size(), 0)) {}

std::size_t OutcomeMatrix::index(const std::string& system) const {
  auto it = std::find(systems.begin(), systems.end(), system);
  if (it == systems.end()) throw std::out_of_range("unknown system " + system);
  return static_cast<std::size_t>(it - systems.begin());
}

void OutcomeMatrix::validate() const {
  const std::size_t n = systems.size();
  if (wins.size() != n || ties.size() != n) throw std::invalid_argument("outcome matrix: shape mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (wins[i].size() != n || ties[i].size() != n) throw std::invalid_argument("outcome matrix: shape mismatch");
    if (wins[i][i] != 0 || ties[i][i] != 0) throw std::invalid_argument("outcome matrix: nonzero diagonal");
    for (std::size_t j = 0; j < n; ++j)
      if (ties[i][j] != ties[j][i]) throw std::invalid_argument("outcome matrix: ties not symmetric");
  }
}

nlohmann::json OutcomeMatrix::to_json() const {
  return nlohmann::json{{"systems", systems}, {"wins", wins}, {"ties", ties}};
}

OutcomeMatrix OutcomeMatrix::from_json(const nlohmann::json& j) {
  OutcomeMatrix m(j.at("systems").get<std::vector<std::string>>());
  m.wins = j.at("wins").get<std::vector<std::vector<std::size_t>>>();
  m.ties = j.at("ties").get<std::vector<std::vector<std::size_t>>>();
  m.validate();
  return m;
}

OutcomeMatrix build_outcomes(const std::vector<std::string>& systems, const std::vector<InstanceScores>& scores) {
  if (systems.size() != scores.size()) throw std::invalid_argument("build_outcomes: one score map per system");
  OutcomeMatrix m(systems);
  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (std::size_t j = i + 1; j < systems.size(); ++j) {
      for (const auto& [key, si] : scores[i]) {
        auto it = scores[j].find(key);
        if (it == scores[j].end()) continue;
        if (si > it->second)
          ++m.wins[i][j];
        else if (si < it->second)
          ++m.wins[j][i];
        else {
          ++m.ties[i][j];
          ++m.ties[j][i];
        }
      }
    }
  }
  return m;
}

namespace {

// Systems reachable from `start` when an edge i -> j means i beat j at least
// once (ties count both ways).
std::vector<bool> reachable(const std::vector<std::vector<double>>& w, std::size_t start, bool reverse) {
  const std::size_t n = w.size();
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const std::size_t a = stack.back();
    stack.pop_back();
    for (std::size_t b = 0; b < n; ++b) {
      const double edge = reverse ? w[b][a] : w[a][b];
      if (!seen[b] && edge > 0.0) {
        seen[b] = true;
        stack.push_back(b);
      }
    }
  }
  return seen;
}

}  // namespace

BTScores fit_bradley_terry(const OutcomeMatrix& outcomes, const BTOptions& options) {
  outcomes.validate();
  const std::size_t n = outcomes.size();
  if (n < 2) throw BTError("Bradley-Terry needs at least two systems");
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) w[i][j] = static_cast<double>(outcomes.wins[i][j]) + 0.5 * static_cast<double>(outcomes.ties[i][j]);

  std::vector<std::string> no_wins;
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += w[i][j];
    if (total == 0.0) no_wins.push_back(outcomes.systems[i]);
  }
  if (!no_wins.empty()) {
    std::string names;
    for (const std::string& s : no_wins) names += (names.empty() ? "" : ", ") + s;
    throw BTError("Bradley-Terry undefined: no wins for " + names);
  }
  const std::vector<bool> fwd = reachable(w, 0, false);
  const std::vector<bool> bwd = reachable(w, 0, true);
  std::string cut;
  for (std::size_t i = 0; i < n; ++i)
    if (!fwd[i] || !bwd[i]) cut += (cut.empty() ? "" : ", ") + outcomes.systems[i];
  if (!cut.empty())
    throw BTError("Bradley-Terry comparison graph is not strongly connected; separated from " +
                  outcomes.systems[0] + ": " + cut);

  std::vector<double> s(n, 1.0), next(n);
  BTScores out;
  out.systems = outcomes.systems;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double won = 0.0, denom = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        won += w[i][j];
        const double games = w[i][j] + w[j][i];
        if (games > 0.0) denom += games / (s[i] + s[j]);
      }
      next[i] = won / denom;
    }
    const double gauge = next[0];
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= gauge;
      change = std::max(change, std::abs(next[i] - s[i]) / s[i]);
    }
    s.swap(next);
    out.iterations = it;
    if (change < options.tolerance) {
      out.strength = s;
      return out;
    }
  }
  throw BTError("Bradley-Terry did not converge in " + std::to_string(options.max_iterations) + " iterations");
}

double sign_test(std::size_t wins_ij, std::size_t wins_ji) {
  const std::size_t n = wins_ij + wins_ji;
  if (n == 0) throw std::invalid_argument("sign test needs at least one non-tied comparison");
  const std::size_t k = std::min(wins_ij, wins_ji);
  // P(X <= k) for X ~ Binomial(n, 1/2), summed in log space.
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  double tail = 0.0;
  for (std::size_t x = 0; x <= k; ++x) {
    const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(x) + 1.0) -
                              std::lgamma(static_cast<double>(n - x) + 1.0);
    tail += std::exp(log_choose + log_half_n);
  }
  return std::min(1.0, 2.0 * tail);
}

std::vector<PairwiseCell> pairwise_table(const OutcomeMatrix& outcomes, const BTScores& scores) {
  std::vector<PairwiseCell> out;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
      if (i == j) continue;
      PairwiseCell c;
      c.row = outcomes.systems[i];
      c.col = outcomes.systems[j];
      c.bt_probability = scores.probability(i, j);
      c.wins = outcomes.wins[i][j];
      c.losses = outcomes.wins[j][i];
      c.ties = outcomes.ties[i][j];
      const std::size_t decided = c.wins + c.losses;
      c.win_fraction = decided == 0 ? 0.5 : static_cast<double>(c.wins) / static_cast<double>(decided);
      c.sign_p = decided == 0 ? 1.0 : sign_test(c.wins, c.losses);
      c.significant = c.sign_p < 0.05;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace shortdesc::analysis
