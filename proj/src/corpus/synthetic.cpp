#include "shortdesc/corpus/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

#include "shortdesc/util/random.hpp"

namespace shortdesc::corpus {

std::string type_word(const std::string& lang, std::size_t type_index) {
  return lang + "_t" + std::to_string(type_index);
}

std::string attribute_word(const std::string& lang, std::size_t attribute_index) {
  return lang + "_a" + std::to_string(attribute_index);
}

namespace {

std::string filler_word(const std::string& lang, std::size_t i) {
  return lang + "_w" + std::to_string(i);
}

std::string function_word(const std::string& lang, const char* w) { return lang + "_" + w; }

double rate_at(const std::vector<double>& rates, std::size_t i) {
  return i < rates.size() ? rates[i] : 0.0;
}

// Three description conventions, chosen by language position, so that
// word-for-word translation is not a perfect strategy.
std::string render_description(const std::string& lang, std::size_t lang_index, std::size_t type,
                               std::size_t attr) {
  const std::string t = type_word(lang, type);
  const std::string a = attribute_word(lang, attr);
  switch (lang_index % 3) {
    case 0:
      return t + " " + function_word(lang, "of") + " " + a;
    case 1:
      return a + " " + t;
    default:
      return t + " " + a;
  }
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.n_entities == 0 || spec.languages.empty() || spec.vocab_size == 0 || spec.n_types == 0)
    throw std::invalid_argument("synthetic corpus parameters must be positive");

  SyntheticCorpus out;
  std::vector<Language> langs;
  for (const std::string& code : spec.languages) langs.push_back({code, LengthUnit::word});
  out.config = LanguageConfig(std::move(langs));
  for (std::size_t k = 0; k < spec.n_types; ++k) out.type_ids.push_back("T" + std::to_string(k));
  std::sort(out.type_ids.begin(), out.type_ids.end());

  util::Rng rng(spec.seed);
  const std::size_t n_lang = spec.languages.size();
  const std::size_t id_width = std::to_string(spec.n_entities - 1).size();

  for (std::size_t i = 0; i < spec.n_entities; ++i) {
    std::string num = std::to_string(i);
    std::string id = "Q" + std::string(id_width - num.size(), '0') + num;
    const std::size_t type = util::uniform_index(rng, spec.n_types);
    const std::size_t attr = util::uniform_index(rng, spec.vocab_size);
    const bool typed = util::uniform_unit(rng) >= spec.missing_type_rate;

    std::vector<bool> has_article(n_lang), has_desc(n_lang);
    for (std::size_t l = 0; l < n_lang; ++l) {
      has_article[l] = util::uniform_unit(rng) >= rate_at(spec.missing_article_rate, l);
      const bool desc_draw = util::uniform_unit(rng) >= rate_at(spec.missing_description_rate, l);
      has_desc[l] = has_article[l] && desc_draw;
    }
    if (spec.max_description_languages > 0) {
      std::vector<std::size_t> with_desc;
      for (std::size_t l = 0; l < n_lang; ++l)
        if (has_desc[l]) with_desc.push_back(l);
      util::shuffle(with_desc, rng);
      for (std::size_t k = spec.max_description_languages; k < with_desc.size(); ++k)
        has_desc[with_desc[k]] = false;
    }
    // Admission: force one language with both article and description.
    if (std::none_of(has_desc.begin(), has_desc.end(), [](bool b) { return b; })) {
      std::vector<std::size_t> with_article;
      for (std::size_t l = 0; l < n_lang; ++l)
        if (has_article[l]) with_article.push_back(l);
      const std::size_t pick = with_article.empty() ? util::uniform_index(rng, n_lang)
                                                    : with_article[util::uniform_index(rng, with_article.size())];
      has_article[pick] = true;
      has_desc[pick] = true;
    }

    Entity e;
    e.id = id;
    if (typed) e.type_ids.push_back("T" + std::to_string(type));
    for (std::size_t l = 0; l < n_lang; ++l) {
      const std::string& lang = spec.languages[l];
      if (has_article[l]) {
        std::string text = "n" + num + " " + function_word(lang, "is") + " ";
        if (spec.type_in_article) text += type_word(lang, type) + " ";
        text += function_word(lang, "from") + " " + attribute_word(lang, attr);
        for (std::size_t f = 0; f < spec.filler_words; ++f)
          text += " " + filler_word(lang, util::uniform_index(rng, spec.vocab_size));
        e.articles[lang] = ArticleText{lang, text};
      }
      if (has_desc[l])
        e.descriptions[lang] =
            DescriptionText{lang, render_description(lang, l, type, attr), DescriptionSource::human};
    }
    out.corpus.emplace(id, std::move(e));
  }

  for (std::size_t s = 0; s < n_lang; ++s) {
    for (std::size_t t = 0; t < n_lang; ++t) {
      if (s == t) continue;
      const std::string& a = spec.languages[s];
      const std::string& b = spec.languages[t];
      TokenDictionary d{a, b, {}};
      for (std::size_t k = 0; k < spec.n_types; ++k) d.map[type_word(a, k)] = type_word(b, k);
      for (std::size_t k = 0; k < spec.vocab_size; ++k) {
        d.map[attribute_word(a, k)] = attribute_word(b, k);
        d.map[filler_word(a, k)] = filler_word(b, k);
      }
      for (const char* w : {"is", "of", "from"}) d.map[function_word(a, w)] = function_word(b, w);
      out.dictionaries.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace shortdesc::corpus
