#include "shortdesc/analysis/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "shortdesc/analysis/sampling.hpp"
#include "shortdesc/corpus/text.hpp"

namespace shortdesc::analysis {

namespace {

// FNV-1a, fixed across platforms.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double linear(const std::vector<std::pair<std::size_t, double>>& x, const std::vector<double>& w, double b) {
  double z = b;
  for (const auto& [k, v] : x) z += w[k] * v;
  return z;
}

}  // namespace

std::vector<std::pair<std::size_t, double>> propensity_features(const std::string& text, std::size_t buckets) {
  if (buckets == 0) throw std::invalid_argument("propensity: feature count must be positive");
  std::map<std::size_t, double> counts;
  for (const std::string& w : corpus::split_words(corpus::fold_case(text))) counts[fnv1a(w) % buckets] += 1.0;
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& [k, c] : counts) out.emplace_back(k, std::log1p(c));
  return out;
}

double PropensityModel::predict(const std::string& text) const {
  if (weights_.empty()) throw std::logic_error("propensity model is untrained");
  return sigmoid(linear(propensity_features(text, weights_.size()), weights_, bias_));
}

nlohmann::json PropensityModel::to_json() const { return nlohmann::json{{"weights", weights_}, {"bias", bias_}}; }

PropensityModel PropensityModel::from_json(const nlohmann::json& j) {
  return PropensityModel(j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>());
}

PropensityModel train_propensity(const std::vector<std::pair<std::string, bool>>& labeled,
                                 const PropensityOptions& options) {
  std::size_t positives = 0;
  for (const auto& [_, y] : labeled) positives += y ? 1 : 0;
  if (positives == 0 || positives == labeled.size())
    throw std::invalid_argument("propensity: training data must contain both classes");

  std::vector<std::vector<std::pair<std::size_t, double>>> xs;
  xs.reserve(labeled.size());
  for (const auto& [text, _] : labeled) xs.push_back(propensity_features(text, options.features));
  const double n = static_cast<double>(labeled.size());
  const double prior = static_cast<double>(positives) / n;
  std::vector<double> w(options.features, 0.0), grad(options.features);
  double b = std::log(prior / (1.0 - prior));

  for (std::size_t it = 0; it < options.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double err = sigmoid(linear(xs[i], w, b)) - (labeled[i].second ? 1.0 : 0.0);
      gb += err;
      for (const auto& [k, v] : xs[i]) grad[k] += err * v;
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= options.learning_rate * (grad[k] / n + options.l2 * w[k]);
    b -= options.learning_rate * gb / n;
  }
  return PropensityModel(std::move(w), b);
}

double clip_propensity(double p, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("propensity clip must be in (0, 0.5)");
  if (std::isnan(p)) throw std::invalid_argument("propensity is NaN");
  return std::clamp(p, eps, 1.0 - eps);
}

double propensity_weight(double p, double eps) {
  const double c = clip_propensity(p, eps);
  return (1.0 - c) / c;
}

PropensityRecord make_propensity_record(std::string id, double raw_p, double eps) {
  const double p = clip_propensity(raw_p, eps);
  return PropensityRecord{std::move(id), p, (1.0 - p) / p};
}

double weighted_mean(const std::vector<double>& scores, const std::vector<double>& weights) {
  if (scores.size() != weights.size()) throw std::invalid_argument("weighted_mean: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw std::invalid_argument("weighted_mean: negative weight");
    num += weights[i] * scores[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw std::invalid_argument("weighted_mean: zero total weight");
  return num / den;
}

std::vector<Stratum> stratify(const std::vector<double>& propensities, const std::vector<double>& scores,
                              std::size_t n_bins, Binning binning) {
  if (propensities.size() != scores.size()) throw std::invalid_argument("stratify: length mismatch");
  if (n_bins == 0) throw std::invalid_argument("stratify: n_bins must be positive");
  const std::size_t n = scores.size();
  std::vector<std::size_t> bins(n);
  if (binning == Binning::quantile) {
    bins = quantile_bins(propensities, n_bins);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::clamp(propensities[i], 0.0, 1.0);
      bins[i] = std::min(n_bins - 1, static_cast<std::size_t>(p * static_cast<double>(n_bins)));
    }
  }
  std::vector<Stratum> out(n_bins);
  std::vector<double> sums(n_bins, 0.0);
  for (std::size_t b = 0; b < n_bins; ++b) {
    out[b].bin = b;
    if (binning == Binning::equal_width) {
      out[b].lower = static_cast<double>(b) / static_cast<double>(n_bins);
      out[b].upper = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    } else {
      out[b].lower = std::numeric_limits<double>::infinity();
      out[b].upper = -std::numeric_limits<double>::infinity();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    Stratum& s = out[bins[i]];
    ++s.count;
    sums[bins[i]] += scores[i];
    if (binning == Binning::quantile) {
      s.lower = std::min(s.lower, propensities[i]);
      s.upper = std::max(s.upper, propensities[i]);
    }
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    out[b].mean_score = out[b].count == 0 ? std::numeric_limits<double>::quiet_NaN()
                                          : sums[b] / static_cast<double>(out[b].count);
    if (out[b].count == 0 && binning == Binning::quantile) out[b].lower = out[b].upper = std::nan("");
  }
  return out;
}

}  // namespace shortdesc::analysis
