#pragma once

// Multilingual entity corpus: data model, JSONL ingestion, statistics,
// splits and training-instance sampling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace shortdesc::corpus {

enum class LengthUnit { word, character };

struct Language {
  std::string code;
  LengthUnit length_unit = LengthUnit::word;
};

// Configured languages; codes are unique.
class LanguageConfig {
 public:
  LanguageConfig() = default;
  explicit LanguageConfig(std::vector<Language> languages);

  static LanguageConfig from_json_text(const std::string& text);
  static LanguageConfig load(const std::filesystem::path& path);
  std::string to_json_text() const;

  const std::vector<Language>& languages() const { return languages_; }
  const Language* find(const std::string& code) const;
  bool contains(const std::string& code) const { return find(code) != nullptr; }
  LengthUnit unit(const std::string& code) const;
  std::vector<std::string> codes() const;

 private:
  std::vector<Language> languages_;
};

struct ArticleText {
  std::string language;
  std::string first_paragraph;
};

enum class DescriptionSource { human, model, baseline };

struct DescriptionText {
  std::string language;
  std::string text;
  DescriptionSource source = DescriptionSource::human;
};

struct Entity {
  std::string id;
  std::map<std::string, ArticleText> articles;          // language -> article
  std::map<std::string, DescriptionText> descriptions;  // language -> description
  std::vector<std::string> type_ids;

  // At least one language has both an article and a description.
  bool admissible() const;
  std::vector<std::string> article_languages() const;
  std::vector<std::string> description_languages() const;
};

// Ordered by id so that every traversal is deterministic.
using Corpus = std::map<std::string, Entity>;

class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, std::size_t line)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Diagnostic {
  std::size_t line = 0;
  std::string entity_id;
  std::string message;
};

struct LoadResult {
  Corpus corpus;
  std::vector<Diagnostic> warnings;  // rejected entities
};

Entity make_entity(std::string id, const std::map<std::string, std::string>& articles,
                   const std::map<std::string, std::string>& descriptions,
                   std::vector<std::string> type_ids = {});

LoadResult parse_corpus(std::istream& in, const LanguageConfig& config);
LoadResult load_corpus(const std::filesystem::path& path, const LanguageConfig& config);
std::string entity_to_json_line(const Entity& e);
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// ---- statistics ---------------------------------------------------------

struct LanguageStats {
  std::string code;
  std::size_t article_count = 0;
  std::size_t missing_description_count = 0;
  double missing_fraction = 0.0;
  std::size_t description_count = 0;
  double avg_description_length = 0.0;  // in the language's unit
};

// Missing fraction from raw counts. Throws ValidationError when missing > articles
// or articles == 0.
double missing_fraction_from_counts(std::uint64_t articles, std::uint64_t missing);

std::vector<LanguageStats> compute_language_stats(const Corpus& corpus, const LanguageConfig& config);
double description_length(const std::string& text, LengthUnit unit);

struct CoverageDistribution {
  // histogram[k] = number of entities with exactly k languages.
  std::vector<std::size_t> articles;
  std::vector<std::size_t> descriptions;
  double articles_multi_fraction = 0.0;      // k >= 2
  double descriptions_multi_fraction = 0.0;  // k >= 2
  double typed_fraction = 0.0;               // entities with at least one type id
};

CoverageDistribution language_coverage_distribution(const Corpus& corpus);

// (entity id, language) -> description text
using KeyedDescriptions = std::map<std::pair<std::string, std::string>, std::string>;

struct OverlapStats {
  std::string language;
  std::optional<double> jaccard;
  std::optional<double> exact_copy_fraction;
  std::size_t both = 0;
  std::size_t either = 0;
};

std::vector<OverlapStats> wikidata_overlap_stats(const KeyedDescriptions& a, const KeyedDescriptions& b);

// ---- splits and sampling ------------------------------------------------

struct SplitSizes {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> valid_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;

  std::string to_json_text() const;
  static SplitSpec from_json_text(const std::string& text);
};

SplitSpec build_splits(const Corpus& corpus, SplitSizes sizes, std::uint64_t seed);

struct TrainingInstance {
  const Entity* entity = nullptr;
  std::string target_language;
};

TrainingInstance sample_training_instance(const Entity& entity, std::mt19937_64& rng);

struct DedupResult {
  std::vector<std::string> surviving_ids;
  std::vector<std::string> eliminated_ids;
  double eliminated_fraction = 0.0;
};

// Compares ids present in both maps; equal up to case and whitespace -> eliminated.
DedupResult dedup_exact_matches(const std::map<std::string, std::string>& generated,
                                const std::map<std::string, std::string>& gold);

}  // namespace shortdesc::corpus
