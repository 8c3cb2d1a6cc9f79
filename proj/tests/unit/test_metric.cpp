#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>

#include "../oracles/transport_oracle.hpp"
#include "shortdesc/metric/emd.hpp"
#include "shortdesc/metric/similarity.hpp"
#include "support.hpp"

using namespace shortdesc;
using namespace shortdesc::metric;

namespace {

std::vector<double> random_simplex(std::size_t n, util::Rng& rng) {
  std::vector<double> w(n);
  double s = 0.0;
  for (double& v : w) s += v = 0.05 + util::uniform_unit(rng);
  for (double& v : w) v /= s;
  return w;
}

// Deterministic per-token vectors so tests can reason about embeddings.
class HashEmbedder : public TokenEmbedder {
 public:
  nn::Matrix embed(const std::vector<std::string>& tokens) const override {
    nn::Matrix m(tokens.size(), 3);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      util::Rng rng(std::hash<std::string>{}(tokens[i]));
      for (std::size_t c = 0; c < 3; ++c) m(i, c) = util::gaussian(rng);
    }
    return m;
  }
};

}  // namespace

TEST_CASE("exact transport matches the LP vertex oracle") {
  util::Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + trial % 3, n = 1 + (trial / 3) % 3;
    const auto p = random_simplex(m, rng), q = random_simplex(n, rng);
    const nn::Matrix a = testing::random_matrix(m, 2, rng), b = testing::random_matrix(n, 2, rng);
    const nn::Matrix cost = euclidean_cost(a, b);
    const TransportResult r = exact_transport(p, q, cost);
    CHECK(std::fabs(r.cost - oracle::transport_lp(p, q, cost.values())) <= 1e-9);
    for (std::size_t i = 0; i < m; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(r.plan(i, j) >= -1e-12);
        row += r.plan(i, j);
      }
      CHECK(row == doctest::Approx(p[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("euclidean cost") {
  nn::Matrix a(1, 2), b(2, 2);
  a(0, 0) = 0.0;
  a(0, 1) = 0.0;
  b(0, 0) = 3.0;
  b(0, 1) = 4.0;
  b(1, 0) = 1.0;
  b(1, 1) = 0.0;
  const nn::Matrix c = euclidean_cost(a, b);
  CHECK(c(0, 0) == doctest::Approx(5.0));
  CHECK(c(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("sinkhorn approaches the exact optimum") {
  util::Rng rng(9);
  for (std::size_t m = 2; m <= 8; m += 2)
    for (std::size_t n = 1; n <= 8; n += 3) {
      const auto p = random_simplex(m, rng), q = random_simplex(n, rng);
      const nn::Matrix cost = euclidean_cost(testing::random_matrix(m, 4, rng), testing::random_matrix(n, 4, rng));
      const double exact = exact_transport(p, q, cost).cost;
      const double approx = sinkhorn_transport(p, q, cost).cost;
      CHECK(std::fabs(approx - exact) <= 1e-3);
    }
  SinkhornOptions tight;
  tight.max_iterations = 1;
  tight.tolerance = 1e-15;
  util::Rng r2(1);
  const nn::Matrix cost = euclidean_cost(testing::random_matrix(5, 2, r2), testing::random_matrix(5, 2, r2));
  CHECK_THROWS_AS(sinkhorn_transport(random_simplex(5, r2), random_simplex(5, r2), cost, tight), ConvergenceError);
}

TEST_CASE("sinkhorn finishes a stalled scaling with newton steps") {
  // The optimal plan links two blocks through a 1e-4 entry; plain scaling freezes near residual 2.5e-4.
  const std::vector<double> p{0.28631850274002874, 0.029590496022048898, 0.062245619608367816, 0.30531511409898621, 0.31653026753056834};
  const std::vector<double> q{0.21383886412814676, 0.028018590577272389, 0.12463029490952313, 0.062756289804069595, 0.21040090276980081, 0.073311335058536958, 0.095988813939060003, 0.19105490881359041};
  const std::vector<std::vector<double>> c{
      {3.5717106590084953, 4.8876947761794112, 4.9312306767103946, 3.3893025470473912, 3.6004645283385708, 4.8545597803593941, 3.403535888015675, 4.1923240795281105},
      {3.132145423775206, 1.9000617123324741, 1.7218417786065727, 3.2973134786559042, 3.1278837179234094, 2.567012437068148, 2.2395663174648277, 1.0224508350636392},
      {3.7958991085700742, 1.3936700119826861, 3.5691356579177489, 2.9580389191994927, 3.6157015210916645, 3.0489780660127841, 2.5443880898003317, 1.4399522303955412},
      {4.0715553192637053, 2.7423830145153043, 1.7630859495540023, 2.1361018720477847, 1.4250343637137546, 2.2971431626173584, 1.4192417931283221, 2.3726031002228898},
      {3.7636893900566202, 2.5013798838214374, 4.2496806076863578, 2.8388280896753089, 4.0691964225277788, 2.9590414228271964, 2.8617004492370182, 2.4449016096569247}};
  nn::Matrix cost(5, 8);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 8; ++j) cost(i, j) = c[i][j];
  const TransportResult r = sinkhorn_transport(p, q, cost);
  CHECK(r.residual <= 1e-6);
  CHECK(std::fabs(r.cost - exact_transport(p, q, cost).cost) <= 1e-3);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 8; ++j) s += r.plan(i, j);
    CHECK(s == doctest::Approx(p[i]).epsilon(1e-12));
  }
}

TEST_CASE("emd properties") {
  util::Rng rng(3);
  const nn::Matrix a = testing::random_matrix(4, 3, rng);
  const TokenDistribution da = TokenDistribution::uniform(a);
  CHECK(emd(da, da) == 0.0);
  // Permuting rows does not change the multiset.
  nn::Matrix perm(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 3; ++c) perm(i, c) = a(3 - i, c);
  CHECK(emd(da, TokenDistribution::uniform(perm)) == doctest::Approx(0.0).epsilon(1e-12).scale(1));
  const TokenDistribution db = TokenDistribution::uniform(testing::random_matrix(6, 3, rng));
  CHECK(emd(da, db) == doctest::Approx(emd(db, da)).epsilon(1e-9));
  CHECK(emd(da, db) > 0.0);
  // Above the exact limit the regularized path stays close to exact, including
  // square uniform problems where the scaling iterations stall.
  EmdOptions approx;
  approx.exact_limit = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const TokenDistribution big_a = TokenDistribution::uniform(testing::random_matrix(9, 3, rng));
    const TokenDistribution big_b = TokenDistribution::uniform(testing::random_matrix(9, 3, rng));
    CHECK(std::fabs(emd(big_a, big_b, approx) - emd(big_a, big_b)) <= 1e-3);
    CHECK(emd(big_a, big_b, approx) == emd(big_b, big_a, approx));
  }

  TokenDistribution bad = da;
  bad.masses[0] = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.masses = {0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("similarity") {
  HashEmbedder emb;
  CHECK(similarity("river in europe", "river in europe", emb) == 1.0);
  CHECK(similarity("europe in river", "river in europe", emb) == doctest::Approx(1.0).epsilon(1e-12));
  const double s = similarity("river in europe", "city in france", emb);
  CHECK(s > 0.0);
  CHECK(s < 1.0);
  CHECK(s == doctest::Approx(similarity("city in france", "river in europe", emb)).epsilon(1e-9));
  const auto emd_value = emd(TokenDistribution::uniform(emb.embed({"river", "in", "europe"})),
                             TokenDistribution::uniform(emb.embed({"city", "in", "france"})));
  CHECK(s == doctest::Approx(1.0 / (1.0 + emd_value)).epsilon(1e-12));
  CHECK_THROWS_AS(similarity("", "river", emb), std::invalid_argument);
}

TEST_CASE("idf weighting") {
  const IdfTable idf = compute_idf({{"river", "in", "europe"}, {"city", "in", "france"}, {"in"}});
  CHECK(idf.documents == 3);
  CHECK(idf.document_frequency.at("in") == 3);
  CHECK(idf.weight("in") == doctest::Approx(std::log(4.0 / 4.0) + 1.0));
  CHECK(idf.weight("river") == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
  CHECK(idf.weight("unseen") == doctest::Approx(std::log(4.0) + 1.0));
  CHECK_THROWS(compute_idf({}));

  HashEmbedder emb;
  SimilarityOptions opt;
  opt.weighting = Weighting::idf;
  CHECK_THROWS_AS(make_distribution({"in"}, emb, opt), std::invalid_argument);
  opt.idf = &idf;
  const TokenDistribution d = make_distribution({"river", "in"}, emb, opt);
  const double total = idf.weight("river") + idf.weight("in");
  CHECK(d.masses[0] == doctest::Approx(idf.weight("river") / total));
  CHECK(d.masses[1] == doctest::Approx(idf.weight("in") / total));
  CHECK(similarity("river in europe", "river in europe", emb, opt) == 1.0);
}

TEST_CASE("encoder embedder gives one row per token") {
  const corpus::Corpus c = testing::tiny_corpus();
  const encoding::Vocabulary vocab = encoding::build_vocab(c, testing::tiny_languages(), 100);
  nn::ParameterStore store;
  util::Rng rng(1);
  encoding::TransformerEncoder enc(store, "desc", {4, 1, 1, 2, 8}, vocab.size(), rng);
  EncoderEmbedder emb(enc, vocab);
  CHECK(emb.embed({"river", "in", "europe"}).rows() == 3);
  CHECK(emb.embed(std::vector<std::string>(20, "in")).rows() == 8);
  CHECK(similarity("river in europe", "river in europe", emb) == 1.0);
}

TEST_CASE("score files and corpus averages") {
  const std::vector<ScoreRecord> recs{{"e1", "en", "full", 0.5}, {"e2", "en", "full", 0.7}, {"e1", "de", "full", 0.9}};
  const auto dir = testing::temp_dir("scores");
  write_scores(recs, dir / "s.jsonl");
  const auto back = read_scores(dir / "s.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[2].lang == "de");
  CHECK(back[1].score == 0.7);
  const CorpusAverage avg = corpus_average(recs);
  CHECK(avg.per_language.at("en") == doctest::Approx(0.6));
  CHECK(avg.per_language.at("de") == doctest::Approx(0.9));
  CHECK(avg.counts.at("en") == 2);
  CHECK(avg.pooled == doctest::Approx(0.7));
  CHECK(avg.instances.at({"e1", "de"}) == 0.9);
  CHECK_THROWS(corpus_average({}));
  CHECK_THROWS(corpus_average({recs[0], recs[0]}));
  std::ofstream(dir / "bad.jsonl") << "{\"id\": 1}\n";
  CHECK_THROWS(read_scores(dir / "bad.jsonl"));
}
