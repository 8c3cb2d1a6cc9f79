#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "shortdesc/util/random.hpp"

namespace shortdesc::analysis {

// Quantile bin (0 .. n_bins-1) of every value by rank; equal values are
// ordered by position, so bin sizes differ by at most one.
std::vector<std::size_t> quantile_bins(const std::vector<double>& values, std::size_t n_bins);

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// per_bin ids drawn uniformly without replacement from each quantile bin of
// the scores. Output is grouped by bin, ids sorted within a bin.
std::vector<std::string> stratified_sample_by_metric(const std::vector<std::pair<std::string, double>>& scores,
                                                     std::size_t per_bin, std::size_t n_bins, util::Rng& rng);

// k-means++ seeding: the first index uniform, each further index drawn with
// probability proportional to squared distance to the nearest chosen point.
// Points at distance zero are only chosen after every distinct point (then
// uniformly). Throws when k exceeds the number of points.
std::vector<std::size_t> kmeanspp_sample(const std::vector<std::vector<double>>& points, std::size_t k, util::Rng& rng);

// Continues seeding from an existing selection.
std::vector<std::size_t> kmeanspp_extend(const std::vector<std::vector<double>>& points,
                                         std::vector<std::size_t> selected, std::size_t k, util::Rng& rng);

}  // namespace shortdesc::analysis
