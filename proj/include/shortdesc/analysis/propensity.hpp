#pragma once

// Propensity of an article already having a description, estimated from its
// text alone, and the (1 - p) / p reweighting built on it.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace shortdesc::analysis {

struct PropensityOptions {
  std::size_t features = 4096;  // hashed token buckets
  double l2 = 1e-3;
  std::size_t iterations = 500;
  double learning_rate = 0.5;
};

// Logistic regression over log(1 + count) of hashed tokens, plus a bias.
class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(std::vector<double> weights, double bias) : weights_(std::move(weights)), bias_(bias) {}

  double predict(const std::string& text) const;  // in (0, 1)
  std::size_t features() const { return weights_.size(); }

  nlohmann::json to_json() const;
  static PropensityModel from_json(const nlohmann::json& j);

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
};

// Sparse feature vector of text: (bucket, value) pairs sorted by bucket.
std::vector<std::pair<std::size_t, double>> propensity_features(const std::string& text, std::size_t buckets);

// Full-batch gradient descent, so the result depends only on the data and
// options. Throws std::invalid_argument when only one class is present.
PropensityModel train_propensity(const std::vector<std::pair<std::string, bool>>& labeled,
                                 const PropensityOptions& options = {});

constexpr double kPropensityClip = 0.01;

double clip_propensity(double p, double eps = kPropensityClip);
// (1 - p) / p after clipping.
double propensity_weight(double p, double eps = kPropensityClip);

struct PropensityRecord {
  std::string id;
  double p = 0.5;  // clipped
  double weight = 1.0;
};

PropensityRecord make_propensity_record(std::string id, double raw_p, double eps = kPropensityClip);

// sum w_i s_i / sum w_i. Throws on length mismatch, negative weight or zero total weight.
double weighted_mean(const std::vector<double>& scores, const std::vector<double>& weights);

enum class Binning { quantile, equal_width };

struct Stratum {
  std::size_t bin = 0;
  double lower = 0.0;  // smallest propensity in the bin (quantile) or bin edge (equal width)
  double upper = 0.0;
  std::size_t count = 0;
  double mean_score = 0.0;  // NaN for an empty bin
};

// Groups (propensity, score) pairs into n_bins bins by propensity.
std::vector<Stratum> stratify(const std::vector<double>& propensities, const std::vector<double>& scores,
                              std::size_t n_bins = 10, Binning binning = Binning::quantile);

}  // namespace shortdesc::analysis
