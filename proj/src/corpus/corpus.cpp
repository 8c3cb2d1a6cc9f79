#include "shortdesc/corpus/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shortdesc/corpus/text.hpp"
#include "shortdesc/util/random.hpp"

namespace shortdesc::corpus {

using nlohmann::json;

// ---- LanguageConfig -------------------------------------------------------

LanguageConfig::LanguageConfig(std::vector<Language> languages) : languages_(std::move(languages)) {
  std::set<std::string> seen;
  for (const Language& l : languages_) {
    if (l.code.empty()) throw ValidationError("language code must be nonempty");
    if (!seen.insert(l.code).second) throw ValidationError("duplicate language code: " + l.code);
  }
}

LanguageConfig LanguageConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  if (!j.is_array()) throw ValidationError("language config must be a JSON array");
  std::vector<Language> langs;
  for (const json& item : j) {
    Language l;
    l.code = item.at("code").get<std::string>();
    const std::string unit = item.value("length_unit", std::string("word"));
    if (unit == "word") {
      l.length_unit = LengthUnit::word;
    } else if (unit == "character") {
      l.length_unit = LengthUnit::character;
    } else {
      throw ValidationError("unknown length_unit '" + unit + "' for " + l.code);
    }
    langs.push_back(std::move(l));
  }
  return LanguageConfig(std::move(langs));
}

LanguageConfig LanguageConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open language config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string LanguageConfig::to_json_text() const {
  json j = json::array();
  for (const Language& l : languages_)
    j.push_back({{"code", l.code},
                 {"length_unit", l.length_unit == LengthUnit::word ? "word" : "character"}});
  return j.dump(2);
}

const Language* LanguageConfig::find(const std::string& code) const {
  for (const Language& l : languages_)
    if (l.code == code) return &l;
  return nullptr;
}

LengthUnit LanguageConfig::unit(const std::string& code) const {
  const Language* l = find(code);
  if (l == nullptr) throw ValidationError("unknown language code: " + code);
  return l->length_unit;
}

std::vector<std::string> LanguageConfig::codes() const {
  std::vector<std::string> out;
  for (const Language& l : languages_) out.push_back(l.code);
  return out;
}

// ---- Entity ---------------------------------------------------------------

bool Entity::admissible() const {
  for (const auto& [lang, _] : descriptions)
    if (articles.contains(lang)) return true;
  return false;
}

std::vector<std::string> Entity::article_languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, _] : articles) out.push_back(lang);
  return out;
}

std::vector<std::string> Entity::description_languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, _] : descriptions) out.push_back(lang);
  return out;
}

Entity make_entity(std::string id, const std::map<std::string, std::string>& articles,
                   const std::map<std::string, std::string>& descriptions,
                   std::vector<std::string> type_ids) {
  Entity e;
  e.id = std::move(id);
  for (const auto& [lang, text] : articles) {
    std::string para = first_paragraph(text);
    if (para.empty()) throw ValidationError("empty article for " + e.id + " in " + lang);
    e.articles[lang] = ArticleText{lang, std::move(para)};
  }
  for (const auto& [lang, text] : descriptions) {
    std::string norm = normalize_text(text);
    if (norm.empty()) throw ValidationError("empty description for " + e.id + " in " + lang);
    e.descriptions[lang] = DescriptionText{lang, std::move(norm), DescriptionSource::human};
  }
  e.type_ids = std::move(type_ids);
  return e;
}

// ---- JSONL I/O --------------------------------------------------------------

LoadResult parse_corpus(std::istream& in, const LanguageConfig& config) {
  LoadResult result;
  std::map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_text(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError("line " + std::to_string(lineno) + ": malformed JSON: " + e.what(), lineno);
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string())
      throw CorpusError("line " + std::to_string(lineno) + ": missing string field 'id'", lineno);
    const std::string id = j["id"].get<std::string>();
    std::map<std::string, std::string> articles, descriptions;
    std::vector<std::string> types;
    try {
      if (j.contains("articles")) articles = j["articles"].get<std::map<std::string, std::string>>();
      if (j.contains("descriptions"))
        descriptions = j["descriptions"].get<std::map<std::string, std::string>>();
      if (j.contains("types")) types = j["types"].get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw CorpusError("line " + std::to_string(lineno) + ": bad field type: " + e.what(), lineno);
    }
    for (const auto* m : {&articles, &descriptions})
      for (const auto& [lang, _] : *m)
        if (!config.contains(lang))
          throw ValidationError("line " + std::to_string(lineno) + ": unknown language code '" +
                                lang + "'");
    if (auto [it, inserted] = first_line.try_emplace(id, lineno); !inserted)
      throw CorpusError("duplicate id '" + id + "' on lines " + std::to_string(it->second) +
                            " and " + std::to_string(lineno),
                        lineno);
    Entity e;
    try {
      e = make_entity(id, articles, descriptions, std::move(types));
    } catch (const ValidationError& err) {
      result.warnings.push_back({lineno, id, err.what()});
      continue;
    }
    if (!e.admissible()) {
      result.warnings.push_back(
          {lineno, id, "rejected: no language has both an article and a description"});
      continue;
    }
    result.corpus.emplace(id, std::move(e));
  }
  return result;
}

LoadResult load_corpus(const std::filesystem::path& path, const LanguageConfig& config) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path.string(), 0);
  return parse_corpus(in, config);
}

std::string entity_to_json_line(const Entity& e) {
  json j;
  j["id"] = e.id;
  j["articles"] = json::object();
  for (const auto& [lang, a] : e.articles) j["articles"][lang] = a.first_paragraph;
  j["descriptions"] = json::object();
  for (const auto& [lang, d] : e.descriptions) j["descriptions"][lang] = d.text;
  j["types"] = e.type_ids;
  return j.dump();
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus: " + path.string());
  for (const auto& [_, e] : corpus) out << entity_to_json_line(e) << '\n';
}

// ---- statistics -------------------------------------------------------------

double missing_fraction_from_counts(std::uint64_t articles, std::uint64_t missing) {
  if (articles == 0) throw ValidationError("missing fraction undefined for zero articles");
  if (missing > articles)
    throw ValidationError("inconsistent counts: " + std::to_string(missing) + " missing of " +
                          std::to_string(articles) + " articles");
  return static_cast<double>(missing) / static_cast<double>(articles);
}

double description_length(const std::string& text, LengthUnit unit) {
  return unit == LengthUnit::word ? static_cast<double>(split_words(text).size())
                                  : static_cast<double>(count_characters(text));
}

std::vector<LanguageStats> compute_language_stats(const Corpus& corpus, const LanguageConfig& config) {
  std::vector<LanguageStats> out;
  for (const Language& lang : config.languages()) {
    LanguageStats s;
    s.code = lang.code;
    double total_len = 0.0;
    for (const auto& [_, e] : corpus) {
      const bool has_article = e.articles.contains(lang.code);
      auto d = e.descriptions.find(lang.code);
      if (has_article) {
        ++s.article_count;
        if (d == e.descriptions.end()) ++s.missing_description_count;
      }
      if (d != e.descriptions.end()) {
        ++s.description_count;
        total_len += description_length(d->second.text, lang.length_unit);
      }
    }
    s.missing_fraction =
        s.article_count == 0 ? 0.0
                             : missing_fraction_from_counts(s.article_count, s.missing_description_count);
    s.avg_description_length =
        s.description_count == 0 ? 0.0 : total_len / static_cast<double>(s.description_count);
    out.push_back(std::move(s));
  }
  return out;
}

CoverageDistribution language_coverage_distribution(const Corpus& corpus) {
  CoverageDistribution d;
  std::size_t multi_a = 0, multi_d = 0, typed = 0;
  auto bump = [](std::vector<std::size_t>& h, std::size_t k) {
    if (h.size() <= k) h.resize(k + 1, 0);
    ++h[k];
  };
  for (const auto& [_, e] : corpus) {
    bump(d.articles, e.articles.size());
    bump(d.descriptions, e.descriptions.size());
    if (e.articles.size() >= 2) ++multi_a;
    if (e.descriptions.size() >= 2) ++multi_d;
    if (!e.type_ids.empty()) ++typed;
  }
  if (!corpus.empty()) {
    const auto n = static_cast<double>(corpus.size());
    d.articles_multi_fraction = static_cast<double>(multi_a) / n;
    d.descriptions_multi_fraction = static_cast<double>(multi_d) / n;
    d.typed_fraction = static_cast<double>(typed) / n;
  }
  return d;
}

std::vector<OverlapStats> wikidata_overlap_stats(const KeyedDescriptions& a, const KeyedDescriptions& b) {
  std::map<std::string, OverlapStats> by_lang;
  std::map<std::string, std::size_t> copies;
  auto stats_for = [&](const std::string& lang) -> OverlapStats& {
    OverlapStats& s = by_lang[lang];
    s.language = lang;
    return s;
  };
  for (const auto& [key, text] : a) {
    OverlapStats& s = stats_for(key.second);
    ++s.either;
    auto it = b.find(key);
    if (it != b.end()) {
      ++s.both;
      if (normalize_text(text) == normalize_text(it->second)) ++copies[key.second];
    }
  }
  for (const auto& [key, _] : b)
    if (!a.contains(key)) ++stats_for(key.second).either;
  std::vector<OverlapStats> out;
  for (auto& [lang, s] : by_lang) {
    if (s.either > 0) s.jaccard = static_cast<double>(s.both) / static_cast<double>(s.either);
    if (s.both > 0)
      s.exact_copy_fraction = static_cast<double>(copies[lang]) / static_cast<double>(s.both);
    out.push_back(s);
  }
  return out;
}

// ---- splits -----------------------------------------------------------------

std::string SplitSpec::to_json_text() const {
  json j{{"seed", seed}, {"train", train_ids}, {"valid", valid_ids}, {"test", test_ids}};
  return j.dump(2);
}

SplitSpec SplitSpec::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  SplitSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_ids = j.at("train").get<std::vector<std::string>>();
  s.valid_ids = j.at("valid").get<std::vector<std::string>>();
  s.test_ids = j.at("test").get<std::vector<std::string>>();
  return s;
}

SplitSpec build_splits(const Corpus& corpus, SplitSizes sizes, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& [id, e] : corpus)
    if (e.admissible()) ids.push_back(id);
  const std::size_t need = sizes.train + sizes.valid + sizes.test;
  if (need > ids.size())
    throw ValidationError("build_splits: need " + std::to_string(need) + " admissible entities, have " +
                          std::to_string(ids.size()));
  util::Rng rng(seed);
  util::shuffle(ids, rng);
  SplitSpec s;
  s.seed = seed;
  auto take = [&](std::size_t begin, std::size_t n) {
    std::vector<std::string> part(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                                  ids.begin() + static_cast<std::ptrdiff_t>(begin + n));
    std::sort(part.begin(), part.end());
    return part;
  };
  s.train_ids = take(0, sizes.train);
  s.valid_ids = take(sizes.train, sizes.valid);
  s.test_ids = take(sizes.train + sizes.valid, sizes.test);
  return s;
}

TrainingInstance sample_training_instance(const Entity& entity, std::mt19937_64& rng) {
  if (entity.descriptions.empty())
    throw ValidationError("entity " + entity.id + " has no description to train on");
  const std::vector<std::string> langs = entity.description_languages();
  return TrainingInstance{&entity, langs[util::uniform_index(rng, langs.size())]};
}

DedupResult dedup_exact_matches(const std::map<std::string, std::string>& generated,
                                const std::map<std::string, std::string>& gold) {
  DedupResult r;
  std::size_t shared = 0;
  for (const auto& [id, text] : generated) {
    auto it = gold.find(id);
    if (it == gold.end()) continue;
    ++shared;
    if (fold_case(text) == fold_case(it->second)) {
      r.eliminated_ids.push_back(id);
    } else {
      r.surviving_ids.push_back(id);
    }
  }
  r.eliminated_fraction =
      shared == 0 ? 0.0 : static_cast<double>(r.eliminated_ids.size()) / static_cast<double>(shared);
  return r;
}

}  // namespace shortdesc::corpus
