#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "shortdesc/corpus/corpus.hpp"

namespace shortdesc::encoding {

// Token <-> id map. Ids 0..3 are PAD, BOS, EOS, UNK; then one token per
// configured language; corpus tokens follow.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocabulary() = default;
  Vocabulary(std::vector<std::string> languages, std::vector<std::string> corpus_tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(const std::string& token) const;  // kUnk if unknown
  int language_id(const std::string& lang) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool is_reserved(int id) const { return id < static_cast<int>(first_corpus_id_); }
  const std::vector<std::string>& languages() const { return languages_; }
  std::size_t first_corpus_id() const { return first_corpus_id_; }

  // Whitespace tokenization, truncated to max_tokens (0 = no limit).
  std::vector<int> encode(const std::string& text, std::size_t max_tokens = 0) const;
  std::string decode(const std::vector<int>& ids) const;

  std::string to_json_text() const;
  static Vocabulary from_json_text(const std::string& text);

  static std::string language_token(const std::string& lang) { return "<2" + lang + ">"; }

 private:
  std::vector<std::string> languages_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::size_t first_corpus_id_ = 4;
};

// Most frequent tokens of article first paragraphs and descriptions, ties
// broken lexicographically. Only entities listed in `ids` are counted when it
// is nonempty. max_size bounds the number of corpus tokens.
Vocabulary build_vocab(const corpus::Corpus& corpus, const std::vector<std::string>& languages,
                       std::size_t max_size, const std::vector<std::string>& ids = {});

}  // namespace shortdesc::encoding
