#include "shortdesc/analysis/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace shortdesc::analysis {

std::optional<double> fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters) {
  if (counts.empty()) throw std::invalid_argument("fleiss_kappa: no items");
  if (raters < 2) throw std::invalid_argument("fleiss_kappa: need at least two raters per item");
  const std::size_t k = counts.front().size();
  // Integer sums so that the result comes from a single rounding:
  // kappa = (A N n - B (n - 1)) / ((n - 1) ((N n)^2 - B)), A = sum n_ij (n_ij - 1), B = sum_j (column j)^2.
  using wide = __int128;
  std::vector<wide> column(k, 0);
  wide a = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != k) throw std::invalid_argument("fleiss_kappa: ragged count table");
    std::size_t row = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const wide c = static_cast<wide>(counts[i][j]);
      row += counts[i][j];
      column[j] += c;
      a += c * (c > 0 ? c - 1 : 0);
    }
    if (row != raters)
      throw std::invalid_argument("fleiss_kappa: item " + std::to_string(i) + " has " + std::to_string(row) +
                                  " ratings, expected " + std::to_string(raters));
  }
  const wide n = static_cast<wide>(raters);
  const wide total = static_cast<wide>(counts.size()) * n;
  wide b = 0;
  for (wide c : column) b += c * c;
  if (b >= total * total) return std::nullopt;
  const wide num = a * total - b * (n - 1);
  const wide den = (n - 1) * (total * total - b);
  constexpr wide exact = wide(1) << 53;
  if (num < exact && -num < exact && den < exact) return static_cast<double>(num) / static_cast<double>(den);
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) throw std::invalid_argument("wilson_interval: no trials");
  if (successes > trials) throw std::invalid_argument("wilson_interval: successes exceed trials");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
  return Interval{std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

const std::vector<ErrorCategory>& all_error_categories() {
  static const std::vector<ErrorCategory> all{ErrorCategory::good_enough,      ErrorCategory::too_vague,
                                              ErrorCategory::factual_error,    ErrorCategory::formatting_error,
                                              ErrorCategory::mis_focused,      ErrorCategory::too_long};
  return all;
}

std::string to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::good_enough: return "good_enough";
    case ErrorCategory::too_vague: return "too_vague";
    case ErrorCategory::factual_error: return "factual_error";
    case ErrorCategory::formatting_error: return "formatting_error";
    case ErrorCategory::mis_focused: return "mis_focused";
    case ErrorCategory::too_long: return "too_long";
  }
  return "unknown";
}

ErrorCategory parse_error_category(const std::string& s) {
  for (ErrorCategory c : all_error_categories())
    if (to_string(c) == s) return c;
  throw std::invalid_argument("unknown error category '" + s + "'");
}

CodingRoundResult coding_round(const std::vector<ErrorLabel>& first, const std::vector<ErrorLabel>& second,
                               double threshold) {
  auto index = [](const std::vector<ErrorLabel>& labels, const char* who) {
    std::map<std::string, ErrorCategory> out;
    for (const ErrorLabel& l : labels)
      if (!out.emplace(l.id, l.category).second)
        throw std::invalid_argument(std::string("coding round: ") + who + " annotator labeled " + l.id + " twice");
    return out;
  };
  const auto a = index(first, "first");
  const auto b = index(second, "second");
  if (a.empty()) throw std::invalid_argument("coding round: no labels");
  for (const auto& [id, _] : a)
    if (!b.contains(id)) throw std::invalid_argument("coding round: item " + id + " labeled only by the first annotator");
  for (const auto& [id, _] : b)
    if (!a.contains(id)) throw std::invalid_argument("coding round: item " + id + " labeled only by the second annotator");

  const auto& cats = all_error_categories();
  std::vector<std::vector<std::size_t>> table;
  CodingRoundResult r;
  for (const auto& [id, ca] : a) {
    const ErrorCategory cb = b.at(id);
    std::vector<std::size_t> row(cats.size(), 0);
    ++row[static_cast<std::size_t>(ca)];
    ++row[static_cast<std::size_t>(cb)];
    table.push_back(std::move(row));
    if (ca != cb) r.disagreements.push_back({id, ca, cb});
  }
  r.kappa = fleiss_kappa(table, 2);
  // Two annotators who used one identical category throughout agree perfectly.
  if (!r.kappa && r.disagreements.empty()) r.kappa = 1.0;
  r.stop = r.kappa.has_value() && *r.kappa > threshold;
  return r;
}

std::vector<ErrorProfile> error_distribution_report(const std::vector<std::string>& systems, std::size_t total,
                                                    std::size_t identical, const std::vector<ItemOutcome>& outcomes,
                                                    const std::map<std::string, ErrorCategory>& labels) {
  if (total == 0) throw std::invalid_argument("error report: no items");
  if (identical + outcomes.size() > total) throw std::invalid_argument("error report: more outcomes than items");
  std::set<std::string> seen;
  for (const ItemOutcome& o : outcomes) {
    if (!seen.insert(o.id).second) throw std::invalid_argument("error report: duplicate outcome for " + o.id);
    if (std::find(systems.begin(), systems.end(), o.winner) == systems.end())
      throw std::invalid_argument("error report: unknown winner " + o.winner);
  }
  for (const auto& [id, _] : labels)
    if (!seen.contains(id)) throw std::invalid_argument("error report: label for unevaluated item " + id);

  const double n = static_cast<double>(total);
  std::vector<ErrorProfile> out;
  for (const std::string& s : systems) {
    ErrorProfile p;
    p.system = s;
    p.total = total;
    p.identical = static_cast<double>(identical) / n;
    std::size_t won = 0, lost = 0, labeled = 0;
    std::map<ErrorCategory, std::size_t> counts;
    for (const ItemOutcome& o : outcomes) {
      if (o.winner == s) {
        ++won;
        continue;
      }
      ++lost;
      auto l = labels.find(o.id);
      if (l == labels.end()) continue;
      ++labeled;
      ++counts[l->second];
    }
    p.preferred = static_cast<double>(won) / n;
    p.extrapolated = labeled < lost;
    if (labeled > 0) {
      const double scale = static_cast<double>(lost) / static_cast<double>(labeled) / n;
      for (const auto& [c, k] : counts) {
        if (c == ErrorCategory::good_enough)
          p.good_enough = static_cast<double>(k) * scale;
        else
          p.errors[c] = static_cast<double>(k) * scale;
      }
    }
    p.high_quality = p.identical + p.preferred + p.good_enough;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace shortdesc::analysis
