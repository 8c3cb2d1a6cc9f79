#pragma once

// Deterministic synthetic multilingual corpus for desk-scale experiments.
//
// Every entity has a semantic type and an attribute. Each language renders
// the article as a templated sentence mentioning the entity name, the
// language's word for the type and for the attribute; the description is a
// per-language template over the same two words, so the correct description
// is a learnable function of article and type.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shortdesc/corpus/corpus.hpp"

namespace shortdesc::corpus {

struct SyntheticSpec {
  std::size_t n_entities = 500;
  std::vector<std::string> languages{"en", "de", "fr"};
  std::size_t vocab_size = 20;  // attribute values (and filler words) per language
  std::size_t n_types = 8;
  std::uint64_t seed = 1;

  // Per-language probabilities, indexed like `languages`; empty means 0.
  std::vector<double> missing_article_rate;
  std::vector<double> missing_description_rate;  // given an article exists
  double missing_type_rate = 0.0;
  std::size_t filler_words = 2;

  // When false the article never names the type: the type word in the
  // description is recoverable only from the type id.
  bool type_in_article = true;
  // Cap on description languages per entity (0 = no cap).
  std::size_t max_description_languages = 0;
};

// Word-for-word dictionary between two languages' synthetic vocabularies.
struct TokenDictionary {
  std::string src_lang;
  std::string tgt_lang;
  std::map<std::string, std::string> map;
};

struct SyntheticCorpus {
  Corpus corpus;
  LanguageConfig config;
  std::vector<TokenDictionary> dictionaries;  // every ordered language pair
  std::vector<std::string> type_ids;          // all type ids, sorted
};

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec);

std::string type_word(const std::string& lang, std::size_t type_index);
std::string attribute_word(const std::string& lang, std::size_t attribute_index);

}  // namespace shortdesc::corpus
