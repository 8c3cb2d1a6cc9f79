#include <doctest.h>

#include <cmath>
#include <fstream>

#include "shortdesc/generator/checkpoint.hpp"
#include "shortdesc/generator/model.hpp"
#include "shortdesc/generator/train.hpp"
#include "support.hpp"

using namespace shortdesc;
using namespace shortdesc::generator;

namespace {

struct Fixture {
  corpus::Corpus corpus = testing::tiny_corpus();
  encoding::Vocabulary vocab = encoding::build_vocab(corpus, testing::tiny_languages(), 100);
  encoding::TypeEmbeddingTable types = testing::tiny_types();

  std::unique_ptr<DescriptionModel> model(const std::string& preset = "full", std::size_t cap = 6) const {
    ModelConfig cfg = testing::tiny_config(preset);
    cfg.max_output_tokens = cap;
    return std::make_unique<DescriptionModel>(cfg, vocab, types);
  }
};

// Makes `token` the argmax at every decoder step: the decoder output becomes
// the constant bias row, aligned with a long embedding row for the token.
void force_token(DescriptionModel& m, int token) {
  nn::ParameterStore& s = m.params();
  s.at("decoder.final_norm.gain").value.fill(0.0);
  nn::Matrix& bias = s.at("decoder.final_norm.bias").value;
  nn::Matrix& emb = s.at("tokens").value;
  for (std::size_t c = 0; c < bias.cols(); ++c) {
    bias[c] = c == 0 ? 1.0 : 0.0;
    emb(static_cast<std::size_t>(token), c) = c == 0 ? 100.0 : 0.0;
  }
}

nn::Matrix logits_for(const DescriptionModel& m, const corpus::Entity& e, const std::string& target) {
  nn::Tape t(false);
  const std::vector<int> prefix{encoding::Vocabulary::kBos, 7, 8};
  return t.value(m.decoder_logits(t, m.context(t, e, target, m.inference_query(e, target)), prefix));
}

}  // namespace

TEST_CASE("presets and validation") {
  CHECK(ModelConfig::preset("full").use_desc);
  CHECK_FALSE(ModelConfig::preset("no-desc").use_desc);
  CHECK_FALSE(ModelConfig::preset("no-types").use_types);
  const ModelConfig both = ModelConfig::preset("no-desc/types");
  CHECK_FALSE(both.use_desc);
  CHECK_FALSE(both.use_types);
  const ModelConfig mono = ModelConfig::preset("monolingual");
  CHECK(mono.monolingual);
  CHECK_FALSE(mono.use_desc);
  CHECK_FALSE(mono.use_types);
  CHECK_THROWS(ModelConfig::preset("bogus"));
  ModelConfig bad = testing::tiny_config();
  bad.max_output_tokens = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = testing::tiny_config();
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const ModelConfig round = ModelConfig::from_json(testing::tiny_config("no-types").to_json());
  CHECK(round.to_json() == testing::tiny_config("no-types").to_json());
}

TEST_CASE("uniform output distribution gives n ln V") {
  Fixture f;
  auto m = f.model();
  m->params().at("decoder.final_norm.gain").value.fill(0.0);
  const corpus::Entity& e = f.corpus.at("e1");
  for (const std::string lang : {"en", "de", "fr"}) {
    const double n = static_cast<double>(target_ids(*m, e, lang).size());
    CHECK(n == static_cast<double>(f.vocab.encode(e.descriptions.at(lang).text).size() + 1));
    CHECK(training_loss(*m, e, lang) == doctest::Approx(n * std::log(static_cast<double>(f.vocab.size()))).epsilon(1e-12));
  }
}

TEST_CASE("loss is finite and sensitive to the target description") {
  Fixture f;
  auto m = f.model();
  corpus::Entity e = f.corpus.at("e2");
  const double before = training_loss(*m, e, "de");
  CHECK(std::isfinite(before));
  CHECK(before > 0.0);
  e.descriptions.at("de").text = "fluss fluss fluss";
  CHECK(training_loss(*m, e, "de") != before);
  CHECK_THROWS(target_ids(*m, f.corpus.at("e4"), "de"));
}

TEST_CASE("model parameters are deterministic in the seed") {
  Fixture f;
  auto a = f.model(), b = f.model();
  CHECK(parameters_to_json(a->params()) == parameters_to_json(b->params()));
  ModelConfig other = testing::tiny_config();
  other.seed = 2;
  DescriptionModel c(other, f.vocab, f.types);
  CHECK(parameters_to_json(a->params()) != parameters_to_json(c.params()));
  CHECK(generate(*a, f.corpus.at("e1"), "en").tokens == generate(*b, f.corpus.at("e1"), "en").tokens);
  CHECK(a->description_encoder() != nullptr);
  CHECK(f.model("no-desc")->description_encoder() == nullptr);
  CHECK_FALSE(f.model("no-desc")->params().contains("context.desc_proj.weight"));
  CHECK_FALSE(f.model("no-types")->params().contains("context.type_proj.weight"));
}

TEST_CASE("output cap: truncated outputs are not terminated") {
  Fixture f;
  auto m = f.model("full", 4);
  force_token(*m, 9);
  const GenerationResult r = generate(*m, f.corpus.at("e1"), "en");
  CHECK(r.tokens == std::vector<int>{9, 9, 9, 9});
  CHECK_FALSE(r.terminated);
  CHECK(generate(*m, f.corpus.at("e1"), "en", {3}).tokens.size() == 4);

  force_token(*m, encoding::Vocabulary::kEos);
  const GenerationResult stop = generate(*m, f.corpus.at("e1"), "en");
  CHECK(stop.tokens.empty());
  CHECK(stop.text.empty());
  CHECK(stop.terminated);
  CHECK(stop.logprob <= 0.0);
}

TEST_CASE("special tokens other than EOS are never produced") {
  Fixture f;
  auto m = f.model();
  force_token(*m, encoding::Vocabulary::kUnk);
  const GenerationResult r = generate(*m, f.corpus.at("e2"), "fr");
  for (int tok : r.tokens) CHECK_FALSE(f.vocab.is_reserved(tok));
  CHECK_THROWS(generate(*m, f.corpus.at("e2"), "fr", {6}));
  CHECK_THROWS(generate(*m, f.corpus.at("e2"), "fr", {0}));
}

TEST_CASE("filter_truncated drops unterminated outputs") {
  std::vector<GenerationResult> rs(4);
  rs[0].terminated = true;
  rs[1].terminated = false;
  rs[2].terminated = true;
  rs[3].terminated = false;
  rs[2].id = "keep";
  const FilterResult f = filter_truncated(rs);
  CHECK(f.kept.size() == 2);
  CHECK(f.kept[1].id == "keep");
  CHECK(f.dropped == 2);
  CHECK(f.dropped_fraction == 0.5);
  CHECK(filter_truncated({}).dropped_fraction == 0.0);
  GenerationResult g;
  g.id = "Q1";
  g.target_language = "en";
  g.text = "a b";
  g.terminated = true;
  g.logprob = -1.5;
  const GenerationResult back = GenerationResult::from_json(g.to_json());
  CHECK(back.text == "a b");
  CHECK(back.logprob == -1.5);
  CHECK(g.to_json().contains("lang"));
}

TEST_CASE("ablated modalities cannot influence the output") {
  Fixture f;
  const corpus::Entity& base = f.corpus.at("e1");

  auto no_desc = f.model("no-desc");
  corpus::Entity d = base;
  d.descriptions.at("de").text = "voellig anders";
  d.descriptions.at("fr").text = "tout autre chose";
  CHECK(logits_for(*no_desc, d, "en") == logits_for(*no_desc, base, "en"));
  auto full = f.model("full");
  CHECK_FALSE(logits_for(*full, d, "en") == logits_for(*full, base, "en"));

  auto no_types = f.model("no-types");
  corpus::Entity ty = base;
  ty.type_ids = {"Q5"};
  CHECK(logits_for(*no_types, ty, "en") == logits_for(*no_types, base, "en"));
  CHECK_FALSE(logits_for(*full, ty, "en") == logits_for(*full, base, "en"));

  auto mono = f.model("monolingual");
  corpus::Entity a = base;
  a.articles.at("de").first_paragraph = "ganz andere worte";
  a.articles.erase("fr");
  CHECK(logits_for(*mono, a, "en") == logits_for(*mono, base, "en"));
  CHECK(mono->fusion_languages(base, "en") == std::vector<std::string>{"en"});
  CHECK(full->fusion_languages(base, "en").size() == 3);
  CHECK_FALSE(logits_for(*full, a, "en") == logits_for(*full, base, "en"));
}

TEST_CASE("monolingual models need an article in the target language") {
  Fixture f;
  auto mono = f.model("monolingual");
  CHECK_THROWS_AS(generate(*mono, f.corpus.at("e3"), "fr"), NotApplicable);
  auto full = f.model("full");
  const GenerationResult r = generate(*full, f.corpus.at("e3"), "fr");  // query falls back
  CHECK(r.target_language == "fr");
  const std::string q = full->inference_query(f.corpus.at("e3"), "fr");
  CHECK((q == "en" || q == "de"));
  CHECK(full->inference_query(f.corpus.at("e3"), "fr") == q);
}

TEST_CASE("training lowers the loss and checkpoints round trip") {
  Fixture f;
  const corpus::SplitSpec splits{{"e1", "e2", "e3", "e4"}, {"e1"}, {"e2"}, 1};
  TrainOptions opt;
  opt.epochs = 40;
  opt.batch_size = 4;
  opt.learning_rate = 1e-2;
  TrainedModel trained = train(f.corpus, splits, testing::tiny_config(), opt, f.vocab, f.types);
  REQUIRE(trained.logs().size() == 1);
  const auto& epochs = trained.logs()[0].epochs;
  REQUIRE(epochs.size() == 40);
  CHECK(epochs.back().train_loss < 0.5 * epochs.front().train_loss);
  CHECK(std::isfinite(epochs.back().valid_loss));
  CHECK(trained.logs()[0].steps == 40);

  const auto dir = testing::temp_dir("ckpt");
  save_checkpoint(trained, dir / "m.json");
  const TrainedModel loaded = load_checkpoint(dir / "m.json");
  CHECK(parameters_to_json(loaded.for_language("en").params()) == parameters_to_json(trained.for_language("en").params()));
  for (const auto& [id, e] : f.corpus)
    for (const auto& [lang, _] : e.descriptions)
      CHECK(generate(loaded, e, lang).tokens == generate(trained, e, lang).tokens);

  nlohmann::json j = parameters_to_json(trained.for_language("en").params());
  DescriptionModel fresh(testing::tiny_config(), f.vocab, f.types);
  nlohmann::json missing = j;
  missing.erase(missing.begin());
  CHECK_THROWS(parameters_from_json(fresh.params(), missing));
  nlohmann::json extra = j;
  extra["bogus"] = j.begin().value();
  CHECK_THROWS(parameters_from_json(fresh.params(), extra));
  nlohmann::json shape = j;
  shape["tokens"]["rows"] = 1;
  CHECK_THROWS(parameters_from_json(fresh.params(), shape));
  parameters_from_json(fresh.params(), j);
  CHECK(parameters_to_json(fresh.params()) == j);
}

TEST_CASE("monolingual training builds one model per language") {
  Fixture f;
  const corpus::SplitSpec splits{{"e1", "e2", "e3", "e4"}, {}, {}, 1};
  TrainOptions opt;
  opt.epochs = 2;
  const TrainedModel mono = train(f.corpus, splits, testing::tiny_config("monolingual"), opt, f.vocab, f.types);
  CHECK(mono.members().size() == 3);
  CHECK(mono.logs().size() == 3);
  CHECK_NOTHROW(mono.for_language("fr"));
  CHECK_THROWS_AS(mono.for_language("it"), NotApplicable);
  const auto dir = testing::temp_dir("mono");
  save_checkpoint(mono, dir / "m.json");
  CHECK(load_checkpoint(dir / "m.json").members().size() == 3);
}

TEST_CASE("training is deterministic and reports divergence") {
  Fixture f;
  const corpus::SplitSpec splits{{"e1", "e2", "e3", "e4"}, {}, {}, 1};
  TrainOptions opt;
  opt.epochs = 3;
  opt.batch_size = 2;
  const TrainedModel a = train(f.corpus, splits, testing::tiny_config(), opt, f.vocab, f.types);
  const TrainedModel b = train(f.corpus, splits, testing::tiny_config(), opt, f.vocab, f.types);
  CHECK(parameters_to_json(a.for_language("en").params()) == parameters_to_json(b.for_language("en").params()));

  DescriptionModel m(testing::tiny_config(), f.vocab, f.types);
  m.params().at("decoder.final_norm.bias").value[0] = std::nan("");
  CHECK_THROWS_AS(train_model(m, f.corpus, splits.train_ids, {}, opt), TrainingDiverged);
}
