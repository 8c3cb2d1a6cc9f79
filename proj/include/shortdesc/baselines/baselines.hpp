#pragma once

// Non-neural reference systems: article prefix and description translation.
// Both return std::nullopt when the baseline cannot be applied to an instance.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/corpus/synthetic.hpp"

namespace shortdesc::baselines {

// Round half up; negative averages are an error.
std::size_t prefix_length(double average_length);

// First prefix_length(average_length) words or characters of text.
std::string prefix_text(const std::string& text, double average_length, corpus::LengthUnit unit);

// Prefix of the target-language article, sized by that language's average
// description length. nullopt when the article or the statistics are missing.
std::optional<std::string> prefix_description(const corpus::Entity& entity, const std::string& target,
                                              const std::map<std::string, corpus::LanguageStats>& stats,
                                              const corpus::LanguageConfig& config);

std::map<std::string, corpus::LanguageStats> stats_by_language(const std::vector<corpus::LanguageStats>& stats);

class TranslationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Translator {
 public:
  virtual ~Translator() = default;
  // Throws TranslationError on failure.
  virtual std::string translate(const std::string& text, const std::string& source,
                                const std::string& target) const = 0;
};

// Token-by-token dictionary lookup; tokens without an entry pass through.
class ToyTranslator : public Translator {
 public:
  ToyTranslator() = default;
  explicit ToyTranslator(const std::vector<corpus::TokenDictionary>& dictionaries);

  // JSONL: {"src_lang", "tgt_lang", "map": {token: token}} per line.
  static ToyTranslator load(const std::filesystem::path& path);
  static void save(const std::vector<corpus::TokenDictionary>& dictionaries, const std::filesystem::path& path);

  std::string translate(const std::string& text, const std::string& source,
                        const std::string& target) const override;
  bool supports(const std::string& source, const std::string& target) const;

 private:
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> dictionaries_;
};

// Language other than target with a description and the largest ranking
// value (missing from the ranking counts as 0); ties go to the
// lexicographically smaller code.
std::optional<std::string> translation_source(const corpus::Entity& entity, const std::string& target,
                                              const std::map<std::string, double>& resource_ranking);

// nullopt when no other-language description exists. Translator failures
// propagate as TranslationError.
std::optional<std::string> translation_description(const corpus::Entity& entity, const std::string& target,
                                                   const Translator& translator,
                                                   const std::map<std::string, double>& resource_ranking);

// Article counts per language, the resource measure used to rank sources.
std::map<std::string, double> article_count_ranking(const corpus::Corpus& corpus);

}  // namespace shortdesc::baselines
