#include "shortdesc/encoding/types.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "shortdesc/util/random.hpp"

namespace shortdesc::encoding {

TypeEmbeddingTable TypeEmbeddingTable::random(const std::vector<std::string>& ids, std::size_t dim,
                                              std::uint64_t seed) {
  TypeEmbeddingTable t(dim);
  util::Rng rng(seed);
  for (const std::string& id : ids) {
    std::vector<double> v(dim);
    for (double& x : v) x = util::gaussian(rng);
    t.rows_[id] = std::move(v);
  }
  t.recompute_mean();
  return t;
}

TypeEmbeddingTable TypeEmbeddingTable::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::vector<double>> rows;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, cell;
    std::getline(fields, id, '\t');
    std::vector<double> v;
    while (std::getline(fields, cell, '\t')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("type embeddings line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (v.empty()) throw std::runtime_error("type embeddings line " + std::to_string(lineno) + ": no values");
    if (dim == 0) dim = v.size();
    if (v.size() != dim)
      throw std::runtime_error("type embeddings line " + std::to_string(lineno) + ": expected " +
                               std::to_string(dim) + " values");
    rows[id] = std::move(v);
  }
  TypeEmbeddingTable t(dim == 0 ? 16 : dim);
  t.rows_ = std::move(rows);
  t.recompute_mean();
  return t;
}

TypeEmbeddingTable TypeEmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open type embeddings: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string TypeEmbeddingTable::serialize() const {
  std::ostringstream out;
  out.precision(17);
  for (const auto& [id, v] : rows_) {
    out << id;
    for (double x : v) out << '\t' << x;
    out << '\n';
  }
  return out.str();
}

void TypeEmbeddingTable::set(const std::string& id, std::vector<double> vec) {
  if (vec.size() != dim_) throw std::invalid_argument("type embedding dimension mismatch for " + id);
  rows_[id] = std::move(vec);
  recompute_mean();
}

bool TypeEmbeddingTable::erase(const std::string& id) {
  const bool removed = rows_.erase(id) > 0;
  if (removed) recompute_mean();
  return removed;
}

const std::vector<double>* TypeEmbeddingTable::find(const std::string& id) const {
  auto it = rows_.find(id);
  return it == rows_.end() ? nullptr : &it->second;
}

void TypeEmbeddingTable::recompute_mean() {
  global_mean_.assign(dim_, 0.0);
  if (rows_.empty()) return;
  for (const auto& [_, v] : rows_)
    for (std::size_t i = 0; i < dim_; ++i) global_mean_[i] += v[i];
  for (double& x : global_mean_) x /= static_cast<double>(rows_.size());
}

std::vector<double> type_representation(const corpus::Entity& entity, const TypeEmbeddingTable& table) {
  std::vector<double> acc(table.dim(), 0.0);
  std::size_t hits = 0;
  for (const std::string& id : entity.type_ids) {
    const std::vector<double>* row = table.find(id);
    if (row == nullptr) continue;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (*row)[i];
    ++hits;
  }
  if (hits == 0) return table.global_mean();
  for (double& x : acc) x /= static_cast<double>(hits);
  return acc;
}

}  // namespace shortdesc::encoding
