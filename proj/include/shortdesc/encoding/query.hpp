#pragma once

#include <string>

#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/util/random.hpp"

namespace shortdesc::encoding {

enum class QueryMode { train, infer };

// Training: uniform over article languages. Inference: the target language
// when it has an article, otherwise uniform over article languages.
std::string select_query_language(const corpus::Entity& entity, const std::string& target_language,
                                  QueryMode mode, util::Rng& rng);

}  // namespace shortdesc::encoding
