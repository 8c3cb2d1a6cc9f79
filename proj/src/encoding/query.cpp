#include "shortdesc/encoding/query.hpp"

#include <stdexcept>

namespace shortdesc::encoding {

std::string select_query_language(const corpus::Entity& entity, const std::string& target_language,
                                  QueryMode mode, util::Rng& rng) {
  if (entity.articles.empty())
    throw std::invalid_argument("entity " + entity.id + " has no article to query");
  if (mode == QueryMode::infer && entity.articles.contains(target_language)) return target_language;
  const std::vector<std::string> langs = entity.article_languages();
  return langs[util::uniform_index(rng, langs.size())];
}

}  // namespace shortdesc::encoding
