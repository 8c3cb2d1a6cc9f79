#pragma once

// Similarity between a generated and a reference description: 1 / (1 + EMD)
// over contextual token embeddings.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "shortdesc/encoding/encoders.hpp"
#include "shortdesc/encoding/vocabulary.hpp"
#include "shortdesc/metric/emd.hpp"

namespace shortdesc::metric {

struct IdfTable {
  std::size_t documents = 0;
  std::map<std::string, std::size_t> document_frequency;

  // ln((N + 1) / (df + 1)) + 1
  double weight(const std::string& token) const;
};

// Each inner vector is one document's tokens. Throws on an empty corpus.
IdfTable compute_idf(const std::vector<std::vector<std::string>>& documents);

class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  // One row per token; tokens is nonempty.
  virtual nn::Matrix embed(const std::vector<std::string>& tokens) const = 0;
};

// Contextual embeddings from a trained description encoder.
class EncoderEmbedder : public TokenEmbedder {
 public:
  EncoderEmbedder(const encoding::TransformerEncoder& encoder, const encoding::Vocabulary& vocab)
      : encoder_(encoder), vocab_(vocab) {}
  nn::Matrix embed(const std::vector<std::string>& tokens) const override;

 private:
  const encoding::TransformerEncoder& encoder_;
  const encoding::Vocabulary& vocab_;
};

enum class Weighting { uniform, idf };

struct SimilarityOptions {
  Weighting weighting = Weighting::uniform;
  const IdfTable* idf = nullptr;  // required for Weighting::idf
  EmdOptions emd;
};

TokenDistribution make_distribution(const std::vector<std::string>& tokens, const TokenEmbedder& embedder,
                                    const SimilarityOptions& options);

double similarity_from_distributions(const TokenDistribution& a, const TokenDistribution& b,
                                     const EmdOptions& options = {});

// Throws std::invalid_argument when either text has no tokens.
double similarity(const std::string& generated, const std::string& reference, const TokenEmbedder& embedder,
                  const SimilarityOptions& options = {});

struct ScoreRecord {
  std::string id;
  std::string lang;
  std::string system;
  double score = 0.0;
};

void write_scores(const std::vector<ScoreRecord>& records, const std::filesystem::path& path);
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path);

struct CorpusAverage {
  std::map<std::string, double> per_language;
  std::map<std::string, std::size_t> counts;
  double pooled = 0.0;  // mean over all instances
  // (id, lang) -> score, kept for pairwise aggregation
  std::map<std::pair<std::string, std::string>, double> instances;
};

// Records of a single system. Throws on an empty input or a repeated (id, lang).
CorpusAverage corpus_average(const std::vector<ScoreRecord>& records);

}  // namespace shortdesc::metric
