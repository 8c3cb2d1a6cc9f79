#include <doctest.h>

#include <map>

#include "shortdesc/encoding/encoders.hpp"
#include "shortdesc/encoding/query.hpp"
#include "shortdesc/encoding/types.hpp"
#include "shortdesc/encoding/vocabulary.hpp"
#include "support.hpp"

using namespace shortdesc;
using namespace shortdesc::encoding;

TEST_CASE("vocabulary layout, frequency order and lexicographic ties") {
  corpus::Corpus c;
  c.emplace("a", corpus::make_entity("a", {{"en", "b a c a"}}, {{"en", "c d"}}));
  const Vocabulary v = build_vocab(c, {"en", "de"}, 3);
  CHECK(v.token(Vocabulary::kPad) == "<pad>");
  CHECK(v.token(Vocabulary::kEos) == "</s>");
  CHECK(v.language_id("en") == 4);
  CHECK(v.language_id("de") == 5);
  CHECK(v.first_corpus_id() == 6);
  // counts: a 2, c 2, b 1, d 1 -> a, c, b (d cut by max_size)
  CHECK(v.token(6) == "a");
  CHECK(v.token(7) == "c");
  CHECK(v.token(8) == "b");
  CHECK(v.size() == 9);
  CHECK(v.id("d") == Vocabulary::kUnk);
  CHECK(v.encode("a b zz", 2) == std::vector<int>{6, 8});
  CHECK(v.decode({6, 7}) == "a c");
  const Vocabulary back = Vocabulary::from_json_text(v.to_json_text());
  CHECK(back.size() == v.size());
  CHECK(back.id("c") == 7);
  CHECK(v.is_reserved(5));
  CHECK_FALSE(v.is_reserved(6));
}

TEST_CASE("transformer encoder shapes and determinism") {
  const corpus::Corpus c = testing::tiny_corpus();
  const Vocabulary v = build_vocab(c, testing::tiny_languages(), 100);
  nn::ParameterStore store;
  util::Rng rng(1);
  const TransformerEncoder enc(store, "enc", EncoderConfig{8, 1, 2, 2, 16}, v.size(), rng);
  const EncodedArticle a = encode_article(c.at("e1").articles.at("en"), enc, v);
  CHECK(a.matrix.rows() == 6);
  CHECK(a.matrix.cols() == 8);
  CHECK(encode_article(c.at("e1").articles.at("en"), enc, v).matrix == a.matrix);
  CHECK(a.matrix.all_finite());
  CHECK(article_token_ids({"en", std::string(40, 'x')}, v, 16).size() == 1);
  CHECK_THROWS(article_token_ids({"en", "   "}, v, 16));
  const std::vector<int> too_long(17, 6);
  nn::Tape t(false);
  CHECK_THROWS(enc.forward(t, too_long));
}

TEST_CASE("description pooling never reads the target language") {
  corpus::Corpus c = testing::tiny_corpus();
  const Vocabulary v = build_vocab(c, testing::tiny_languages(), 100);
  nn::ParameterStore store;
  util::Rng rng(2);
  const TransformerEncoder enc(store, "desc", EncoderConfig{4, 1, 1, 2, 16}, v.size(), rng);

  const PooledDescription p = pool_descriptions(c.at("e1"), "en", enc, v);
  CHECK(p.n_sources == 2);
  CHECK(p.languages == std::vector<std::string>{"de", "fr"});
  CHECK(p.vector.cols() == 4);

  corpus::Entity mutated = c.at("e1");
  mutated.descriptions.at("en").text = "something entirely different";
  CHECK(pool_descriptions(mutated, "en", enc, v).vector == p.vector);
  mutated.descriptions.erase("en");
  CHECK(pool_descriptions(mutated, "en", enc, v).vector == p.vector);
  mutated.descriptions.at("de").text = "fluss";
  CHECK_FALSE(pool_descriptions(mutated, "en", enc, v).vector == p.vector);

  // Mean of the per-language means.
  const auto mean_of = [&](const std::string& lang) {
    corpus::Entity only = c.at("e1");
    for (auto it = only.descriptions.begin(); it != only.descriptions.end();)
      it = (it->first == lang || it->first == "en") ? std::next(it) : only.descriptions.erase(it);
    return pool_descriptions(only, "en", enc, v).vector;
  };
  const nn::Matrix de = mean_of("de"), fr = mean_of("fr");
  for (std::size_t i = 0; i < 4; ++i) CHECK(p.vector[i] == doctest::Approx((de[i] + fr[i]) / 2.0).epsilon(1e-14));

  const PooledDescription none = pool_descriptions(c.at("e4"), "en", enc, v);
  CHECK_FALSE(none.present());
  CHECK(none.vector == nn::Matrix(1, 4));
  nn::Tape t(false);
  CHECK_FALSE(pool_descriptions(t, c.at("e4"), "en", enc, v).has_value());
}

TEST_CASE("type representation averages known rows and falls back to the global mean") {
  TypeEmbeddingTable table(2);
  table.set("A", {1.0, 2.0});
  table.set("B", {3.0, 6.0});
  CHECK(table.global_mean() == std::vector<double>{2.0, 4.0});
  corpus::Entity e = corpus::make_entity("x", {{"en", "a"}}, {{"en", "b"}}, {"A", "B", "Z"});
  CHECK(type_representation(e, table) == std::vector<double>{2.0, 4.0});
  e.type_ids = {"A"};
  CHECK(type_representation(e, table) == std::vector<double>{1.0, 2.0});
  e.type_ids = {"Z"};
  CHECK(type_representation(e, table) == table.global_mean());
  table.erase("B");
  CHECK(table.global_mean() == std::vector<double>{1.0, 2.0});
  const TypeEmbeddingTable back = TypeEmbeddingTable::parse(table.serialize());
  CHECK(*back.find("A") == std::vector<double>{1.0, 2.0});
  CHECK_THROWS(table.set("C", {1.0}));
  const auto r1 = TypeEmbeddingTable::random({"A", "B"}, 3, 9), r2 = TypeEmbeddingTable::random({"A", "B"}, 3, 9);
  CHECK(*r1.find("B") == *r2.find("B"));
}

TEST_CASE("query language selection") {
  const corpus::Corpus c = testing::tiny_corpus();
  util::Rng rng(4);
  CHECK(select_query_language(c.at("e1"), "fr", QueryMode::infer, rng) == "fr");
  std::map<std::string, int> fallback;
  for (int i = 0; i < 3000; ++i) ++fallback[select_query_language(c.at("e3"), "fr", QueryMode::infer, rng)];
  CHECK(fallback.size() == 2);
  CHECK(std::abs(fallback["en"] - 1500) < 3 * std::sqrt(750.0));
  std::map<std::string, int> train;
  for (int i = 0; i < 9000; ++i) ++train[select_query_language(c.at("e1"), "en", QueryMode::train, rng)];
  for (const auto& l : {"de", "en", "fr"}) CHECK(std::abs(train[l] - 3000) < 3 * std::sqrt(9000 * 2.0 / 9.0));
}
