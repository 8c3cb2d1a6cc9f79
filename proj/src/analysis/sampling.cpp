#include "shortdesc/analysis/sampling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

#include "shortdesc/kernels/kernels.hpp"

namespace shortdesc::analysis {

std::vector<std::size_t> quantile_bins(const std::vector<double>& values, std::size_t n_bins) {
  if (n_bins == 0) throw std::invalid_argument("quantile_bins: n_bins must be positive");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::size_t> bins(n);
  for (std::size_t rank = 0; rank < n; ++rank) bins[order[rank]] = rank * n_bins / n;
  return bins;
}

std::vector<std::string> stratified_sample_by_metric(const std::vector<std::pair<std::string, double>>& scores,
                                                     std::size_t per_bin, std::size_t n_bins, util::Rng& rng) {
  std::vector<double> values;
  for (const auto& [_, s] : scores) values.push_back(s);
  const std::vector<std::size_t> bins = quantile_bins(values, n_bins);
  std::vector<std::vector<std::string>> members(n_bins);
  for (std::size_t i = 0; i < scores.size(); ++i) members[bins[i]].push_back(scores[i].first);
  std::vector<std::string> out;
  for (std::size_t b = 0; b < n_bins; ++b) {
    std::vector<std::string>& m = members[b];
    if (m.size() < per_bin)
      throw SamplingError("bin " + std::to_string(b) + " has " + std::to_string(m.size()) + " members, " +
                          std::to_string(per_bin) + " requested");
    std::sort(m.begin(), m.end());
    util::shuffle(m, rng);
    m.resize(per_bin);
    std::sort(m.begin(), m.end());
    out.insert(out.end(), m.begin(), m.end());
  }
  return out;
}

std::vector<std::size_t> kmeanspp_extend(const std::vector<std::vector<double>>& points,
                                         std::vector<std::size_t> selected, std::size_t k, util::Rng& rng) {
  const std::size_t n = points.size();
  if (k > n) throw std::invalid_argument("kmeanspp: k = " + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
  for (std::size_t s : selected)
    if (s >= n) throw std::invalid_argument("kmeanspp: selected index out of range");
  for (const auto& p : points)
    if (p.size() != points.front().size()) throw std::invalid_argument("kmeanspp: points differ in dimension");
  if (selected.empty() && k > 0) selected.push_back(util::uniform_index(rng, n));

  std::vector<bool> taken(n, false);
  for (std::size_t s : selected) taken[s] = true;
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  const std::size_t dim = n == 0 ? 0 : points.front().size();
  auto update = [&](std::size_t c) {
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], kernels::squared_distance(points[i].data(), points[c].data(), dim));
  };
  for (std::size_t s : selected) update(s);

  while (selected.size() < k) {
    std::vector<double> weights(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!taken[i]) total += weights[i] = d2[i];
    std::size_t pick;
    if (total > 0.0) {
      pick = util::weighted_index(rng, weights);
    } else {
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) rest.push_back(i);
      pick = rest[util::uniform_index(rng, rest.size())];
    }
    taken[pick] = true;
    selected.push_back(pick);
    update(pick);
  }
  return selected;
}

std::vector<std::size_t> kmeanspp_sample(const std::vector<std::vector<double>>& points, std::size_t k, util::Rng& rng) {
  return kmeanspp_extend(points, {}, k, rng);
}

}  // namespace shortdesc::analysis
