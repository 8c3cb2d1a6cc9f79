#include "shortdesc/baselines/baselines.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "shortdesc/corpus/text.hpp"

namespace shortdesc::baselines {

std::size_t prefix_length(double average_length) {
  if (!(average_length >= 0.0) || !std::isfinite(average_length))
    throw std::invalid_argument("average description length must be finite and nonnegative");
  return static_cast<std::size_t>(std::floor(average_length + 0.5));
}

std::string prefix_text(const std::string& text, double average_length, corpus::LengthUnit unit) {
  const std::size_t n = prefix_length(average_length);
  if (unit == corpus::LengthUnit::character) return corpus::take_characters(text, n);
  std::vector<std::string> words = corpus::split_words(text);
  if (words.size() > n) words.resize(n);
  return corpus::join(words);
}

std::map<std::string, corpus::LanguageStats> stats_by_language(const std::vector<corpus::LanguageStats>& stats) {
  std::map<std::string, corpus::LanguageStats> out;
  for (const corpus::LanguageStats& s : stats) out.emplace(s.code, s);
  return out;
}

std::optional<std::string> prefix_description(const corpus::Entity& entity, const std::string& target,
                                              const std::map<std::string, corpus::LanguageStats>& stats,
                                              const corpus::LanguageConfig& config) {
  auto article = entity.articles.find(target);
  auto st = stats.find(target);
  if (article == entity.articles.end() || st == stats.end() || st->second.description_count == 0) return std::nullopt;
  std::string out = prefix_text(article->second.first_paragraph, st->second.avg_description_length, config.unit(target));
  if (out.empty()) return std::nullopt;
  return out;
}

ToyTranslator::ToyTranslator(const std::vector<corpus::TokenDictionary>& dictionaries) {
  for (const corpus::TokenDictionary& d : dictionaries) dictionaries_[{d.src_lang, d.tgt_lang}] = d.map;
}

ToyTranslator ToyTranslator::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dictionary file " + path.string());
  std::vector<corpus::TokenDictionary> dicts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      dicts.push_back({j.at("src_lang").get<std::string>(), j.at("tgt_lang").get<std::string>(),
                       j.at("map").get<std::map<std::string, std::string>>()});
    } catch (const nlohmann::json::exception& e) {
      throw corpus::CorpusError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
  }
  return ToyTranslator(dicts);
}

void ToyTranslator::save(const std::vector<corpus::TokenDictionary>& dictionaries, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dictionary file " + path.string());
  for (const corpus::TokenDictionary& d : dictionaries)
    out << nlohmann::json{{"src_lang", d.src_lang}, {"tgt_lang", d.tgt_lang}, {"map", d.map}}.dump() << '\n';
}

bool ToyTranslator::supports(const std::string& source, const std::string& target) const {
  return source == target || dictionaries_.contains({source, target});
}

std::string ToyTranslator::translate(const std::string& text, const std::string& source,
                                     const std::string& target) const {
  if (source == target) return corpus::normalize_text(text);
  auto it = dictionaries_.find({source, target});
  if (it == dictionaries_.end()) throw TranslationError("no dictionary for " + source + " -> " + target);
  std::vector<std::string> words = corpus::split_words(text);
  for (std::string& w : words) {
    auto hit = it->second.find(w);
    if (hit != it->second.end()) w = hit->second;
  }
  return corpus::join(words);
}

std::optional<std::string> translation_source(const corpus::Entity& entity, const std::string& target,
                                              const std::map<std::string, double>& resource_ranking) {
  std::optional<std::string> best;
  double best_rank = 0.0;
  for (const auto& [lang, _] : entity.descriptions) {  // lexicographic order
    if (lang == target) continue;
    auto r = resource_ranking.find(lang);
    const double rank = r == resource_ranking.end() ? 0.0 : r->second;
    if (!best || rank > best_rank) {
      best = lang;
      best_rank = rank;
    }
  }
  return best;
}

std::optional<std::string> translation_description(const corpus::Entity& entity, const std::string& target,
                                                   const Translator& translator,
                                                   const std::map<std::string, double>& resource_ranking) {
  const std::optional<std::string> source = translation_source(entity, target, resource_ranking);
  if (!source) return std::nullopt;
  return translator.translate(entity.descriptions.at(*source).text, *source, target);
}

std::map<std::string, double> article_count_ranking(const corpus::Corpus& corpus) {
  std::map<std::string, double> out;
  for (const auto& [_, e] : corpus)
    for (const auto& [lang, __] : e.articles) out[lang] += 1.0;
  return out;
}

}  // namespace shortdesc::baselines
