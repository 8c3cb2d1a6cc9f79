#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "shortdesc/corpus/corpus.hpp"

namespace shortdesc::encoding {

// Fixed (non-trainable) embedding per semantic-type id. global_mean is the
// mean over all rows and is kept current on every mutation.
class TypeEmbeddingTable {
 public:
  explicit TypeEmbeddingTable(std::size_t dim = 16) : dim_(dim), global_mean_(dim, 0.0) {}

  // Seeded Gaussian rows for the given ids.
  static TypeEmbeddingTable random(const std::vector<std::string>& ids, std::size_t dim, std::uint64_t seed);
  // One row per line: id<TAB>f1<TAB>...<TAB>fd
  static TypeEmbeddingTable load(const std::filesystem::path& path);
  static TypeEmbeddingTable parse(const std::string& text);
  std::string serialize() const;

  void set(const std::string& id, std::vector<double> vec);
  bool erase(const std::string& id);
  const std::vector<double>* find(const std::string& id) const;

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<double>& global_mean() const { return global_mean_; }
  const std::map<std::string, std::vector<double>>& rows() const { return rows_; }

 private:
  void recompute_mean();

  std::size_t dim_;
  std::map<std::string, std::vector<double>> rows_;
  std::vector<double> global_mean_;
};

// Mean of the rows of the entity's resolvable type ids, else the global mean.
std::vector<double> type_representation(const corpus::Entity& entity, const TypeEmbeddingTable& table);

}  // namespace shortdesc::encoding
