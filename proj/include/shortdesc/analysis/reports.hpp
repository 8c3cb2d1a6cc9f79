#pragma once

// CSV renderings of the analysis results. Column orders are fixed:
//
//   language stats  code,unit,articles,missing,missing_pct,descriptions,avg_length
//   system means    system,<lang>...,all,n      (one column per language, sorted)
//   pairwise        row,col,bt_probability,win_fraction,wins,losses,ties,sign_p,significant
//   bt matrix       system,<system>...          cells "0.925*" (* = sign test p < 0.05)
//   bt strengths    system,strength
//   kappa           round,items,kappa,stop,disagreements
//   strata          bin,lower,upper,count,mean_score
//   error profile   system,total,identical,preferred,good_enough,<category>...,high_quality,extrapolated

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shortdesc/analysis/agreement.hpp"
#include "shortdesc/analysis/bradley_terry.hpp"
#include "shortdesc/analysis/propensity.hpp"
#include "shortdesc/corpus/corpus.hpp"

namespace shortdesc::analysis {

std::string csv_escape(const std::string& field);
std::string format_number(double v, int precision = 6);

std::string language_stats_csv(const std::vector<corpus::LanguageStats>& stats, const corpus::LanguageConfig& config);

struct SystemMeans {
  std::string system;
  std::map<std::string, double> per_language;
  std::map<std::string, std::size_t> counts;
  double pooled = 0.0;
  std::size_t n = 0;
};
std::string system_means_csv(const std::vector<SystemMeans>& rows);

std::string pairwise_csv(const std::vector<PairwiseCell>& cells);
std::string bt_matrix_csv(const OutcomeMatrix& outcomes, const BTScores& scores);
std::string bt_strengths_csv(const BTScores& scores);

struct KappaRow {
  std::size_t round = 0;
  std::size_t items = 0;
  std::optional<double> kappa;
  bool stop = false;
  std::size_t disagreements = 0;
};
std::string kappa_csv(const std::vector<KappaRow>& rows);

std::string strata_csv(const std::vector<Stratum>& strata);
std::string error_profile_csv(const std::vector<ErrorProfile>& profiles);

void write_text(const std::string& path, const std::string& content);

}  // namespace shortdesc::analysis
