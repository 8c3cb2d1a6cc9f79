#pragma once

// Shared fixtures for the unit tests.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "shortdesc/corpus/corpus.hpp"
#include "shortdesc/encoding/types.hpp"
#include "shortdesc/encoding/vocabulary.hpp"
#include "shortdesc/generator/model.hpp"
#include "shortdesc/nn/tape.hpp"
#include "shortdesc/util/random.hpp"

namespace testing {

using namespace shortdesc;

inline nn::Matrix random_matrix(std::size_t r, std::size_t c, util::Rng& rng, double scale = 1.0) {
  nn::Matrix m(r, c);
  for (double& v : m.values()) v = scale * util::gaussian(rng);
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("shortdesc-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

// Central differences of a scalar function of the flattened values.
inline std::vector<double> numeric_gradient(std::vector<double*> xs, const std::function<double()>& f,
                                            double h = 1e-6) {
  std::vector<double> g(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double keep = *xs[i];
    *xs[i] = keep + h;
    const double up = f();
    *xs[i] = keep - h;
    const double down = f();
    *xs[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Small three-language corpus where every entity has full coverage except
// where noted: e3 lacks the fr article, e4 has only an en description.
inline corpus::Corpus tiny_corpus() {
  corpus::Corpus c;
  auto add = [&](corpus::Entity e) { c.emplace(e.id, std::move(e)); };
  add(corpus::make_entity("e1", {{"en", "paris is a city in france"}, {"de", "paris ist eine stadt"}, {"fr", "paris est une ville"}},
                          {{"en", "capital of france"}, {"de", "hauptstadt von frankreich"}, {"fr", "capitale de la france"}},
                          {"Q515"}));
  add(corpus::make_entity("e2", {{"en", "the rhine is a river"}, {"de", "der rhein ist ein fluss"}, {"fr", "le rhin est un fleuve"}},
                          {{"en", "river in europe"}, {"de", "fluss in europa"}, {"fr", "fleuve d europe"}}, {"Q4022"}));
  add(corpus::make_entity("e3", {{"en", "bach was a composer"}, {"de", "bach war ein komponist"}},
                          {{"en", "german composer"}, {"de", "deutscher komponist"}, {"fr", "compositeur allemand"}},
                          {"Q5", "Q36834"}));
  add(corpus::make_entity("e4", {{"en", "a small village"}, {"fr", "un petit village"}}, {{"en", "village in france"}}, {}));
  return c;
}

inline std::vector<std::string> tiny_languages() { return {"de", "en", "fr"}; }

inline generator::ModelConfig tiny_config(const std::string& preset = "full") {
  generator::ModelConfig cfg = generator::ModelConfig::preset(preset);
  cfg.d_model = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.encoder_layers = 1;
  cfg.encoder_heads = 2;
  cfg.ff_mult = 2;
  cfg.max_positions = 32;
  cfg.d_desc = 4;
  cfg.desc_layers = 1;
  cfg.desc_heads = 1;
  cfg.d_type = 4;
  cfg.max_output_tokens = 6;
  return cfg;
}

inline encoding::TypeEmbeddingTable tiny_types() {
  return encoding::TypeEmbeddingTable::random({"Q4022", "Q5", "Q515", "Q36834"}, 4, 11);
}

}  // namespace testing
