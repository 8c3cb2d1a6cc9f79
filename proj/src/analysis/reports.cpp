#include "shortdesc/analysis/reports.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace shortdesc::analysis {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_number(double v, int precision) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string language_stats_csv(const std::vector<corpus::LanguageStats>& stats, const corpus::LanguageConfig& config) {
  std::ostringstream out;
  out << "code,unit,articles,missing,missing_pct,descriptions,avg_length\n";
  for (const corpus::LanguageStats& s : stats) {
    const bool chars = config.contains(s.code) && config.unit(s.code) == corpus::LengthUnit::character;
    out << csv_escape(s.code) << ',' << (chars ? "character" : "word") << ',' << s.article_count << ','
        << s.missing_description_count << ',' << format_number(100.0 * s.missing_fraction, 2) << ','
        << s.description_count << ',' << format_number(s.avg_description_length, 2) << '\n';
  }
  return out.str();
}

std::string system_means_csv(const std::vector<SystemMeans>& rows) {
  std::set<std::string> langs;
  for (const SystemMeans& r : rows)
    for (const auto& [l, _] : r.per_language) langs.insert(l);
  std::ostringstream out;
  out << "system";
  for (const std::string& l : langs) out << ',' << csv_escape(l);
  out << ",all,n\n";
  for (const SystemMeans& r : rows) {
    out << csv_escape(r.system);
    for (const std::string& l : langs) {
      auto it = r.per_language.find(l);
      out << ',' << (it == r.per_language.end() ? "" : format_number(it->second, 3));
    }
    out << ',' << (r.n == 0 ? "" : format_number(r.pooled, 3)) << ',' << r.n << '\n';
  }
  return out.str();
}

std::string pairwise_csv(const std::vector<PairwiseCell>& cells) {
  std::ostringstream out;
  out << "row,col,bt_probability,win_fraction,wins,losses,ties,sign_p,significant\n";
  for (const PairwiseCell& c : cells)
    out << csv_escape(c.row) << ',' << csv_escape(c.col) << ',' << format_number(c.bt_probability) << ','
        << format_number(c.win_fraction) << ',' << c.wins << ',' << c.losses << ',' << c.ties << ','
        << format_number(c.sign_p, 8) << ',' << (c.significant ? 1 : 0) << '\n';
  return out.str();
}

std::string bt_matrix_csv(const OutcomeMatrix& outcomes, const BTScores& scores) {
  std::ostringstream out;
  out << "system";
  for (const std::string& s : outcomes.systems) out << ',' << csv_escape(s);
  out << '\n';
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    out << csv_escape(outcomes.systems[i]);
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
      out << ',';
      if (i == j) continue;
      const std::size_t w = outcomes.wins[i][j], l = outcomes.wins[j][i];
      out << format_number(scores.probability(i, j), 3);
      if (w + l > 0 && sign_test(w, l) < 0.05) out << '*';
    }
    out << '\n';
  }
  return out.str();
}

std::string bt_strengths_csv(const BTScores& scores) {
  std::ostringstream out;
  out << "system,strength\n";
  for (std::size_t i = 0; i < scores.systems.size(); ++i)
    out << csv_escape(scores.systems[i]) << ',' << format_number(scores.strength[i], 8) << '\n';
  return out.str();
}

std::string kappa_csv(const std::vector<KappaRow>& rows) {
  std::ostringstream out;
  out << "round,items,kappa,stop,disagreements\n";
  for (const KappaRow& r : rows)
    out << r.round << ',' << r.items << ',' << (r.kappa ? format_number(*r.kappa, 4) : "") << ',' << (r.stop ? 1 : 0)
        << ',' << r.disagreements << '\n';
  return out.str();
}

std::string strata_csv(const std::vector<Stratum>& strata) {
  std::ostringstream out;
  out << "bin,lower,upper,count,mean_score\n";
  for (const Stratum& s : strata)
    out << s.bin << ',' << format_number(s.lower) << ',' << format_number(s.upper) << ',' << s.count << ','
        << format_number(s.mean_score) << '\n';
  return out.str();
}

std::string error_profile_csv(const std::vector<ErrorProfile>& profiles) {
  std::ostringstream out;
  out << "system,total,identical,preferred,good_enough";
  for (ErrorCategory c : all_error_categories())
    if (c != ErrorCategory::good_enough) out << ',' << to_string(c);
  out << ",high_quality,extrapolated\n";
  for (const ErrorProfile& p : profiles) {
    out << csv_escape(p.system) << ',' << p.total << ',' << format_number(p.identical, 4) << ','
        << format_number(p.preferred, 4) << ',' << format_number(p.good_enough, 4);
    for (ErrorCategory c : all_error_categories()) {
      if (c == ErrorCategory::good_enough) continue;
      auto it = p.errors.find(c);
      out << ',' << format_number(it == p.errors.end() ? 0.0 : it->second, 4);
    }
    out << ',' << format_number(p.high_quality, 4) << ',' << (p.extrapolated ? 1 : 0) << '\n';
  }
  return out.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace shortdesc::analysis
