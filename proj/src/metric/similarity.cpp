#include "shortdesc/metric/similarity.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/corpus/text.hpp"

namespace shortdesc::metric {

double IdfTable::weight(const std::string& token) const {
  auto it = document_frequency.find(token);
  const double df = it == document_frequency.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((static_cast<double>(documents) + 1.0) / (df + 1.0)) + 1.0;
}

IdfTable compute_idf(const std::vector<std::vector<std::string>>& documents) {
  if (documents.empty()) throw std::invalid_argument("idf: empty reference corpus");
  IdfTable t;
  t.documents = documents.size();
  for (const auto& doc : documents) {
    const std::set<std::string> unique(doc.begin(), doc.end());
    for (const std::string& tok : unique) ++t.document_frequency[tok];
  }
  return t;
}

nn::Matrix EncoderEmbedder::embed(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  for (const std::string& tok : tokens) ids.push_back(vocab_.id(tok));
  if (ids.size() > encoder_.config().max_positions) ids.resize(encoder_.config().max_positions);
  nn::Tape t(false);
  return t.value(encoder_.forward(t, ids));
}

TokenDistribution make_distribution(const std::vector<std::string>& tokens, const TokenEmbedder& embedder,
                                    const SimilarityOptions& options) {
  if (tokens.empty()) throw std::invalid_argument("similarity: text has no tokens");
  nn::Matrix emb = embedder.embed(tokens);
  const std::size_t m = emb.rows();
  std::vector<double> masses(m, 1.0);
  if (options.weighting == Weighting::idf) {
    if (options.idf == nullptr) throw std::invalid_argument("similarity: idf weighting needs an idf table");
    for (std::size_t i = 0; i < m; ++i) masses[i] = options.idf->weight(tokens[i]);
  }
  double total = 0.0;
  for (double w : masses) total += w;
  for (double& w : masses) w /= total;
  return TokenDistribution{std::move(emb), std::move(masses)};
}

double similarity_from_distributions(const TokenDistribution& a, const TokenDistribution& b, const EmdOptions& options) {
  return 1.0 / (1.0 + emd(a, b, options));
}

double similarity(const std::string& generated, const std::string& reference, const TokenEmbedder& embedder,
                  const SimilarityOptions& options) {
  const TokenDistribution a = make_distribution(corpus::split_words(generated), embedder, options);
  const TokenDistribution b = make_distribution(corpus::split_words(reference), embedder, options);
  return similarity_from_distributions(a, b, options.emd);
}

void write_scores(const std::vector<ScoreRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write score table " + path.string());
  for (const ScoreRecord& r : records)
    out << nlohmann::json{{"id", r.id}, {"lang", r.lang}, {"system", r.system}, {"score", r.score}}.dump() << '\n';
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read score table " + path.string());
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("lang").get<std::string>(),
                     j.at("system").get<std::string>(), j.at("score").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw corpus::CorpusError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
  }
  return out;
}

CorpusAverage corpus_average(const std::vector<ScoreRecord>& records) {
  if (records.empty()) throw std::invalid_argument("corpus_average: no scores");
  CorpusAverage avg;
  std::map<std::string, double> sums;
  double total = 0.0;
  for (const ScoreRecord& r : records) {
    if (!avg.instances.emplace(std::make_pair(r.id, r.lang), r.score).second)
      throw std::invalid_argument("corpus_average: duplicate score for " + r.id + "/" + r.lang);
    sums[r.lang] += r.score;
    ++avg.counts[r.lang];
    total += r.score;
  }
  for (const auto& [lang, s] : sums) avg.per_language[lang] = s / static_cast<double>(avg.counts[lang]);
  avg.pooled = total / static_cast<double>(records.size());
  return avg;
}

}  // namespace shortdesc::metric
