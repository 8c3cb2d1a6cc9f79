#include "shortdesc/encoding/vocabulary.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "shortdesc/corpus/text.hpp"

namespace shortdesc::encoding {

Vocabulary::Vocabulary(std::vector<std::string> languages, std::vector<std::string> corpus_tokens)
    : languages_(std::move(languages)) {
  tokens_ = {"<pad>", "<s>", "</s>", "<unk>"};
  for (const std::string& l : languages_) tokens_.push_back(language_token(l));
  first_corpus_id_ = tokens_.size();
  for (std::string& t : corpus_tokens) tokens_.push_back(std::move(t));
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("vocabulary: duplicate token '" + tokens_[i] + "'");
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end() || it->second < static_cast<int>(first_corpus_id_)) return kUnk;
  return it->second;
}

int Vocabulary::language_id(const std::string& lang) const {
  auto it = index_.find(language_token(lang));
  if (it == index_.end()) throw std::out_of_range("vocabulary: unknown language " + lang);
  return it->second;
}

std::vector<int> Vocabulary::encode(const std::string& text, std::size_t max_tokens) const {
  std::vector<int> ids;
  for (const std::string& w : corpus::split_words(text)) {
    if (max_tokens != 0 && ids.size() >= max_tokens) break;
    ids.push_back(id(w));
  }
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> words;
  for (int i : ids) {
    if (i == kPad || i == kBos || i == kEos) continue;
    words.push_back(token(i));
  }
  return corpus::join(words);
}

std::string Vocabulary::to_json_text() const {
  nlohmann::json j;
  j["languages"] = languages_;
  j["tokens"] = std::vector<std::string>(tokens_.begin() + static_cast<std::ptrdiff_t>(first_corpus_id_), tokens_.end());
  return j.dump();
}

Vocabulary Vocabulary::from_json_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  return Vocabulary(j.at("languages").get<std::vector<std::string>>(),
                    j.at("tokens").get<std::vector<std::string>>());
}

Vocabulary build_vocab(const corpus::Corpus& corpus, const std::vector<std::string>& languages,
                       std::size_t max_size, const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> counts;
  auto count_text = [&](const std::string& text) {
    for (const std::string& w : corpus::split_words(text)) ++counts[w];
  };
  auto count_entity = [&](const corpus::Entity& e) {
    for (const auto& [_, a] : e.articles) count_text(a.first_paragraph);
    for (const auto& [_, d] : e.descriptions) count_text(d.text);
  };
  if (ids.empty()) {
    for (const auto& [_, e] : corpus) count_entity(e);
  } else {
    for (const std::string& id : ids) {
      auto it = corpus.find(id);
      if (it != corpus.end()) count_entity(it->second);
    }
  }
  for (const char* reserved : {"<pad>", "<s>", "</s>", "<unk>"}) counts.erase(reserved);
  for (const std::string& l : languages) counts.erase(Vocabulary::language_token(l));
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, _] : ranked) tokens.push_back(tok);
  return Vocabulary(languages, std::move(tokens));
}

}  // namespace shortdesc::encoding
