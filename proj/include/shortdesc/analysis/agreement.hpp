#pragma once

// Rater agreement, binomial confidence intervals and error-taxonomy coding.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace shortdesc::analysis {

// counts[item][category] = raters who chose category; every row must sum to
// raters. nullopt when chance agreement is 1 (a single category is used).
std::optional<double> fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Wilson score interval for a binomial proportion (z = 1.96 gives 95%).
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

enum class ErrorCategory { good_enough, too_vague, factual_error, formatting_error, mis_focused, too_long };

const std::vector<ErrorCategory>& all_error_categories();
std::string to_string(ErrorCategory c);
ErrorCategory parse_error_category(const std::string& s);  // throws std::invalid_argument

struct ErrorLabel {
  std::string id;
  ErrorCategory category = ErrorCategory::good_enough;
  std::string annotator;
  std::size_t round = 0;
};

struct Disagreement {
  std::string id;
  ErrorCategory first;
  ErrorCategory second;
};

struct CodingRoundResult {
  std::optional<double> kappa;
  std::vector<Disagreement> disagreements;  // sorted by id
  bool stop = false;                        // kappa > threshold
};

// Two annotators over the same items. Throws std::invalid_argument when the
// item sets differ or an annotator labels an item twice.
CodingRoundResult coding_round(const std::vector<ErrorLabel>& first, const std::vector<ErrorLabel>& second,
                               double threshold = 0.6);

// Outcome of one evaluated item: which system's description won.
struct ItemOutcome {
  std::string id;
  std::string winner;
};

struct ErrorProfile {
  std::string system;
  std::size_t total = 0;
  double identical = 0.0;
  double preferred = 0.0;
  double good_enough = 0.0;
  std::map<ErrorCategory, double> errors;  // excluding good_enough
  double high_quality = 0.0;               // identical + preferred + good_enough
  bool extrapolated = false;               // labels cover only a sample of lost items
};

// Fractions over all `total` items. Items eliminated as identical count as
// identical for every system. Each label describes the losing description of
// its item; when only some lost items are labeled, the label distribution is
// scaled to all of that system's lost items.
std::vector<ErrorProfile> error_distribution_report(const std::vector<std::string>& systems, std::size_t total,
                                                    std::size_t identical, const std::vector<ItemOutcome>& outcomes,
                                                    const std::map<std::string, ErrorCategory>& labels);

}  // namespace shortdesc::analysis
