#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "../oracles/analysis_oracles.hpp"
#include "shortdesc/analysis/agreement.hpp"
#include "shortdesc/analysis/bradley_terry.hpp"
#include "shortdesc/analysis/propensity.hpp"
#include "shortdesc/analysis/reports.hpp"
#include "shortdesc/analysis/sampling.hpp"
#include "support.hpp"

using namespace shortdesc;
using namespace shortdesc::analysis;

namespace {

OutcomeMatrix simulate(const std::vector<double>& strength, std::size_t per_pair, util::Rng& rng) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < strength.size(); ++i) names.push_back("s" + std::to_string(i));
  OutcomeMatrix m(names);
  for (std::size_t i = 0; i < strength.size(); ++i)
    for (std::size_t j = i + 1; j < strength.size(); ++j)
      for (std::size_t t = 0; t < per_pair; ++t) {
        if (util::uniform_unit(rng) < strength[i] / (strength[i] + strength[j]))
          ++m.wins[i][j];
        else
          ++m.wins[j][i];
      }
  return m;
}

std::vector<std::vector<double>> split_ties(const OutcomeMatrix& m) {
  std::vector<std::vector<double>> a(m.size(), std::vector<double>(m.size(), 0.0));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j)
      if (i != j) a[i][j] = static_cast<double>(m.wins[i][j]) + 0.5 * static_cast<double>(m.ties[i][j]);
  return a;
}

std::vector<ErrorLabel> labels_of(const std::vector<int>& cats, const std::string& who) {
  std::vector<ErrorLabel> out;
  for (std::size_t i = 0; i < cats.size(); ++i)
    out.push_back({"item" + std::to_string(1000 + i), all_error_categories()[static_cast<std::size_t>(cats[i])], who, 1});
  return out;
}

// Two annotators over 100 items and six categories: the first 100 - a items
// disagree cyclically, the rest agree; `skew` agreements sit on category 0
// and the others are spread evenly.
std::pair<std::vector<int>, std::vector<int>> coding_fixture(int a, int skew) {
  std::vector<int> x, y;
  for (int i = 0; i < 100 - a; ++i) {
    x.push_back(i % 6);
    y.push_back((i + 1) % 6);
  }
  std::vector<int> agreed(static_cast<std::size_t>(skew), 0);
  const int rest = a - skew;
  for (int c = 0; c < 6; ++c)
    for (int k = 0; k < rest / 6 + (c < rest % 6 ? 1 : 0); ++k) agreed.push_back(c);
  x.insert(x.end(), agreed.begin(), agreed.end());
  y.insert(y.end(), agreed.begin(), agreed.end());
  return {x, y};
}

}  // namespace

TEST_CASE("sign test equals exact binomial summation") {
  for (unsigned n = 1; n <= 50; ++n)
    for (unsigned a = 0; a <= n; ++a) CHECK(std::fabs(sign_test(a, n - a) - oracle::sign_test(a, n - a)) <= 1e-9);
  CHECK(sign_test(5, 5) == 1.0);
  CHECK_THROWS(sign_test(0, 0));
}

TEST_CASE("two-system Bradley-Terry equals the win fraction") {
  for (auto [w, l, t] : std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>{{7, 3, 0}, {1, 99, 0}, {40, 20, 10}}) {
    OutcomeMatrix m({"a", "b"});
    m.wins[0][1] = w;
    m.wins[1][0] = l;
    m.ties[0][1] = m.ties[1][0] = t;
    const BTScores s = fit_bradley_terry(m);
    const double expected = (static_cast<double>(w) + 0.5 * static_cast<double>(t)) / static_cast<double>(w + l + t);
    CHECK(std::fabs(s.probability(0, 1) - expected) <= 1e-9);
    CHECK(s.strength[0] == 1.0);
  }
}

TEST_CASE("Bradley-Terry recovers known strengths") {
  util::Rng rng(2024);
  const std::vector<double> truth{1.0, 2.0, 0.5, 4.0};
  const OutcomeMatrix m = simulate(truth, 10000, rng);
  const BTScores s = fit_bradley_terry(m);
  const std::vector<double> newton = oracle::bt_newton(split_ties(m));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(s.strength[i] == doctest::Approx(newton[i]).epsilon(1e-7));
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == j) continue;
      CHECK(std::fabs(s.probability(i, j) - truth[i] / (truth[i] + truth[j])) <= 0.02);
    }
  }
}

TEST_CASE("outcome matrices from instance scores") {
  const InstanceScores a{{{"e1", "en"}, 0.9}, {{"e2", "en"}, 0.5}, {{"e3", "en"}, 0.4}};
  const InstanceScores b{{{"e1", "en"}, 0.1}, {{"e2", "en"}, 0.5}, {{"e4", "en"}, 0.9}};
  const OutcomeMatrix m = build_outcomes({"a", "b"}, {a, b});
  CHECK(m.wins[0][1] == 1);
  CHECK(m.wins[1][0] == 0);
  CHECK(m.ties[0][1] == 1);
  CHECK(m.shared(0, 1) == 2);
  CHECK(OutcomeMatrix::from_json(m.to_json()).to_json() == m.to_json());
  CHECK_NOTHROW(fit_bradley_terry(m));  // the tie gives b half a win
  OutcomeMatrix shutout({"a", "b"});
  shutout.wins[0][1] = 4;
  CHECK_THROWS_AS(fit_bradley_terry(shutout), BTError);

  OutcomeMatrix disconnected({"a", "b", "c", "d"});
  disconnected.wins[0][1] = disconnected.wins[1][0] = 3;
  disconnected.wins[2][3] = disconnected.wins[3][2] = 3;
  CHECK_THROWS_AS(fit_bradley_terry(disconnected), BTError);

  OutcomeMatrix three({"x", "y", "z"});
  three.wins[0][1] = 30;
  three.wins[1][0] = 10;
  three.wins[1][2] = 20;
  three.wins[2][1] = 20;
  three.wins[0][2] = 9;
  three.wins[2][0] = 1;
  const BTScores s = fit_bradley_terry(three);
  const auto cells = pairwise_table(three, s);
  CHECK(cells.size() == 6);
  const PairwiseCell& xy = cells[0];
  CHECK(xy.row == "x");
  CHECK(xy.col == "y");
  CHECK(xy.wins == 30);
  CHECK(xy.win_fraction == doctest::Approx(0.75));
  CHECK(xy.sign_p == doctest::Approx(oracle::sign_test(30, 10)).epsilon(1e-9));
  CHECK(xy.significant);
  const std::string csv = bt_matrix_csv(three, s);
  CHECK(csv.rfind("system,x,y,z\n", 0) == 0);
  CHECK(csv.find('*') != std::string::npos);
  CHECK(pairwise_csv(cells).rfind("row,col,bt_probability,win_fraction,wins,losses,ties,sign_p,significant\n", 0) == 0);
  CHECK(bt_strengths_csv(s).rfind("system,strength\nx,", 0) == 0);
}

TEST_CASE("propensity weighting") {
  CHECK(propensity_weight(0.8) == doctest::Approx(0.25));
  CHECK(propensity_weight(0.2) == doctest::Approx(4.0));
  CHECK(propensity_weight(0.0) == doctest::Approx(99.0));
  CHECK(clip_propensity(1.0) == 0.99);
  const double worked = weighted_mean({0.9, 0.7}, {propensity_weight(0.8), propensity_weight(0.2)});
  CHECK(std::fabs(worked - 0.71176) <= 1e-5);
  CHECK(std::fabs(worked - 3.025 / 4.25) <= 1e-12);

  util::Rng rng(4);
  std::vector<double> scores(200), weights(200, propensity_weight(0.5));
  double plain = 0.0;
  for (double& s : scores) plain += s = util::uniform_unit(rng);
  plain /= 200.0;
  CHECK(std::fabs(weighted_mean(scores, weights) - plain) <= 1e-12);
  CHECK_THROWS(weighted_mean({1.0}, {1.0, 2.0}));
  CHECK_THROWS(weighted_mean({1.0}, {-1.0}));
  CHECK_THROWS(weighted_mean({1.0}, {0.0}));
  const PropensityRecord r = make_propensity_record("e1", 0.999);
  CHECK(r.p == 0.99);
  CHECK(r.weight == doctest::Approx(0.01 / 0.99));
}

TEST_CASE("decile stratification keeps every item") {
  util::Rng rng(8);
  for (std::size_t n : {7, 10, 95, 1000}) {
    std::vector<double> p(n), s(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = util::uniform_unit(rng);
      s[i] = util::uniform_unit(rng);
    }
    for (Binning b : {Binning::quantile, Binning::equal_width}) {
      const auto strata = stratify(p, s, 10, b);
      CHECK(strata.size() == 10);
      std::size_t total = 0;
      for (const Stratum& st : strata) total += st.count;
      CHECK(total == n);
    }
    const auto q = stratify(p, s, 10);
    std::size_t lo = n, hi = 0;
    for (const Stratum& st : q) {
      lo = std::min(lo, st.count);
      hi = std::max(hi, st.count);
    }
    if (n >= 10) CHECK(hi - lo <= 1);
  }
  const auto ew = stratify({0.05, 0.15, 0.95, 1.0}, {1.0, 2.0, 3.0, 5.0}, 10, Binning::equal_width);
  CHECK(ew[0].count == 1);
  CHECK(ew[9].count == 2);
  CHECK(ew[9].mean_score == 4.0);
  CHECK(std::isnan(ew[5].mean_score));
  CHECK(strata_csv(ew).rfind("bin,lower,upper,count,mean_score\n", 0) == 0);
}

TEST_CASE("propensity model learns a separable signal") {
  std::vector<std::pair<std::string, bool>> data;
  for (int i = 0; i < 40; ++i) {
    data.push_back({"famous city capital " + std::to_string(i), true});
    data.push_back({"obscure hamlet " + std::to_string(i), false});
  }
  const PropensityModel m = train_propensity(data);
  CHECK(m.predict("famous capital") > 0.7);
  CHECK(m.predict("obscure hamlet") < 0.3);
  CHECK(PropensityModel::from_json(m.to_json()).predict("famous capital") == m.predict("famous capital"));
  CHECK(train_propensity(data).to_json() == m.to_json());
  CHECK_THROWS_AS(train_propensity({{"a", true}, {"b", true}}), std::invalid_argument);
  const auto f = propensity_features("a b a", 64);
  CHECK(std::is_sorted(f.begin(), f.end()));
}

TEST_CASE("Fleiss kappa") {
  const auto worked = fleiss_kappa({{3, 0}, {0, 3}, {2, 1}, {1, 2}}, 3);
  REQUIRE(worked);
  CHECK(*worked == 1.0 / 3.0);
  CHECK(fleiss_kappa({{3, 0}, {0, 3}, {3, 0}}, 3) == std::optional<double>(1.0));
  CHECK_FALSE(fleiss_kappa({{3, 0}, {3, 0}}, 3));
  CHECK_THROWS(fleiss_kappa({{2, 0}}, 3));
}

TEST_CASE("coding rounds stop once kappa exceeds 0.6") {
  const auto [a55, b55] = coding_fixture(63, 10);
  const auto [a77, b77] = coding_fixture(81, 0);
  const CodingRoundResult r55 = coding_round(labels_of(a55, "x"), labels_of(b55, "y"));
  const CodingRoundResult r77 = coding_round(labels_of(a77, "x"), labels_of(b77, "y"));
  REQUIRE(r55.kappa);
  REQUIRE(r77.kappa);
  CHECK(*r55.kappa == doctest::Approx(oracle::two_rater_fleiss(a55, b55)).epsilon(1e-12));
  CHECK(*r77.kappa == doctest::Approx(oracle::two_rater_fleiss(a77, b77)).epsilon(1e-12));
  CHECK(std::fabs(*r55.kappa - 0.55) < 0.005);
  CHECK(std::fabs(*r77.kappa - 0.77) < 0.005);
  CHECK_FALSE(r55.stop);
  CHECK(r77.stop);
  CHECK(r55.disagreements.size() == 37);
  CHECK(r77.disagreements.size() == 19);
  CHECK(std::is_sorted(r55.disagreements.begin(), r55.disagreements.end(),
                       [](const Disagreement& l, const Disagreement& r) { return l.id < r.id; }));

  const CodingRoundResult same = coding_round(labels_of(a55, "x"), labels_of(a55, "y"));
  CHECK(same.kappa == std::optional<double>(1.0));
  CHECK(same.stop);
  std::vector<int> alt, flip;
  for (int i = 0; i < 20; ++i) {
    alt.push_back(i % 2);
    flip.push_back(1 - i % 2);
  }
  const CodingRoundResult orth = coding_round(labels_of(alt, "x"), labels_of(flip, "y"));
  CHECK(*orth.kappa <= 0.0);
  CHECK_FALSE(orth.stop);

  auto missing = labels_of(a55, "y");
  missing.pop_back();
  CHECK_THROWS_AS(coding_round(labels_of(a55, "x"), missing), std::invalid_argument);
  auto twice = labels_of(a55, "y");
  twice.back().id = twice.front().id;
  CHECK_THROWS_AS(coding_round(labels_of(a55, "x"), twice), std::invalid_argument);
  CHECK(kappa_csv({{1, 100, r55.kappa, false, 37}}).rfind("round,items,kappa,stop,disagreements\n1,100,", 0) == 0);
}

TEST_CASE("error categories and Wilson intervals") {
  for (ErrorCategory c : all_error_categories()) CHECK(parse_error_category(to_string(c)) == c);
  CHECK(all_error_categories().size() == 6);
  CHECK_THROWS_AS(parse_error_category("nonsense"), std::invalid_argument);
  const Interval w = wilson_interval(8, 10);
  CHECK(w.lower == doctest::Approx(0.4902).epsilon(1e-3));
  CHECK(w.upper == doctest::Approx(0.9433).epsilon(1e-3));
  const Interval zero = wilson_interval(0, 20);
  CHECK(zero.lower == doctest::Approx(0.0).scale(1));
  CHECK(zero.upper > 0.0);
}

TEST_CASE("error distribution report") {
  const std::vector<ItemOutcome> outcomes{{"i1", "model"}, {"i2", "human"}, {"i3", "human"}, {"i4", "human"},
                                          {"i5", "model"}};
  const std::map<std::string, ErrorCategory> labels{{"i2", ErrorCategory::too_vague},
                                                    {"i3", ErrorCategory::good_enough},
                                                    {"i1", ErrorCategory::factual_error},
                                                    {"i5", ErrorCategory::formatting_error}};
  const auto rows = error_distribution_report({"model", "human"}, 10, 5, outcomes, labels);
  const ErrorProfile& model = rows[0];
  CHECK(model.identical == 0.5);
  CHECK(model.preferred == 0.2);
  // Three lost items, two labeled: each label stands for 1.5 items.
  CHECK(model.extrapolated);
  CHECK(model.good_enough == doctest::Approx(0.15));
  CHECK(model.errors.at(ErrorCategory::too_vague) == doctest::Approx(0.15));
  CHECK(model.high_quality == doctest::Approx(0.85));
  const ErrorProfile& human = rows[1];
  CHECK(human.preferred == 0.3);
  CHECK_FALSE(human.extrapolated);
  CHECK(human.errors.at(ErrorCategory::factual_error) == doctest::Approx(0.1));
  CHECK(human.errors.at(ErrorCategory::formatting_error) == doctest::Approx(0.1));
  CHECK(error_profile_csv(rows).rfind("system,total,identical,preferred,good_enough,", 0) == 0);
  CHECK_THROWS(error_distribution_report({"model"}, 10, 5, outcomes, labels));
  CHECK_THROWS(error_distribution_report({"model", "human"}, 4, 0, outcomes, labels));
}

TEST_CASE("quantile bins and stratified sampling") {
  const auto bins = quantile_bins({0.5, 0.1, 0.9, 0.3, 0.7, 0.2}, 3);
  CHECK(bins == std::vector<std::size_t>{1, 0, 2, 1, 2, 0});
  std::vector<std::pair<std::string, double>> scores;
  for (int i = 0; i < 50; ++i) scores.push_back({"id" + std::to_string(100 + i), i * 0.01});
  util::Rng rng(1);
  const auto sample = stratified_sample_by_metric(scores, 2, 10, rng);
  REQUIRE(sample.size() == 20);
  for (std::size_t b = 0; b < 10; ++b) {
    for (std::size_t k = 0; k < 2; ++k) {
      const int idx = std::stoi(sample[2 * b + k].substr(2)) - 100;
      CHECK(static_cast<std::size_t>(idx / 5) == b);
    }
    CHECK(sample[2 * b] < sample[2 * b + 1]);
  }
  util::Rng again(1);
  CHECK(stratified_sample_by_metric(scores, 2, 10, again) == sample);
  util::Rng r3(1);
  CHECK_THROWS_AS(stratified_sample_by_metric(scores, 6, 10, r3), SamplingError);
}

TEST_CASE("k-means++ seeding prefers distinct, distant points") {
  const std::vector<std::vector<double>> pts{{0, 0}, {0, 0}, {0, 0}, {10, 0}, {0, 10}, {0.1, 0}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    util::Rng rng(seed);
    const auto pick = kmeanspp_sample(pts, 4, rng);
    std::set<std::size_t> uniq(pick.begin(), pick.end());
    CHECK(uniq.size() == 4);
    std::set<std::vector<double>> distinct;
    for (std::size_t i : pick) distinct.insert(pts[i]);
    CHECK(distinct.size() == 4);  // duplicates of the origin only after every distinct point
    util::Rng ext(seed);
    const auto more = kmeanspp_extend(pts, pick, 6, ext);
    CHECK(more.size() == 6);
    CHECK(std::equal(pick.begin(), pick.end(), more.begin()));
    CHECK(std::set<std::size_t>(more.begin(), more.end()).size() == 6);
  }
  util::Rng rng(0);
  CHECK_THROWS(kmeanspp_sample(pts, 7, rng));
  CHECK_THROWS(kmeanspp_extend(pts, {9}, 2, rng));
}

TEST_CASE("language statistics csv") {
  const corpus::LanguageConfig cfg({{"en", corpus::LengthUnit::word}, {"ja", corpus::LengthUnit::character}});
  const std::string csv = language_stats_csv({{"en", 100, 20, 0.2, 80, 3.5}, {"ja", 10, 1, 0.1, 9, 12.0}}, cfg);
  CHECK(csv.rfind("code,unit,articles,missing,missing_pct,descriptions,avg_length\n", 0) == 0);
  CHECK(csv.find("ja,character,10,1,") != std::string::npos);
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}
