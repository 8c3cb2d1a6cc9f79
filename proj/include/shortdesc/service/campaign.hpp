#pragma once

// Rating campaigns: batches of nine real forced-choice items plus one
// honeypot, each pair shown in a seeded random order.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace shortdesc::service {

// One test instance to be judged: the model's and the human description of an entity.
struct CampaignInput {
  std::string entity_id;
  std::string snippet;
  std::string model_description;
  std::string human_description;
  std::optional<double> metric_score;  // for per-decile summaries
};

// Source of honeypots: entities with their genuine description.
struct HoneypotSource {
  std::string entity_id;
  std::string snippet;
  std::string description;
};

struct RatingItem {
  std::string item_id;
  std::string entity_id;
  std::string snippet;
  std::string option_1;
  std::string option_2;
  // Hidden truth: which system produced each option. Real items use
  // "model" / "human"; honeypots use "human" / "decoy".
  std::string system_1;
  std::string system_2;
  bool honeypot = false;
  std::string decoy_entity_id;
  std::optional<double> metric_score;

  // Served form: item_id, snippet, option_1, option_2 only.
  nlohmann::json public_json() const;
  nlohmann::json to_json() const;
  static RatingItem from_json(const nlohmann::json& j);
};

struct RatingBatch {
  std::string batch_id;
  std::vector<RatingItem> items;  // 10
  std::size_t honeypot_position = 0;

  nlohmann::json to_json() const;
  static RatingBatch from_json(const nlohmann::json& j);
};

struct Campaign {
  std::string campaign_id;
  std::string language;
  std::uint64_t seed = 0;
  std::vector<RatingBatch> batches;
  std::vector<std::string> dropped_entities;  // did not fill a whole batch

  nlohmann::json to_json() const;
  static Campaign from_json(const nlohmann::json& j);
};

constexpr std::size_t kRealItemsPerBatch = 9;
constexpr std::size_t kBatchSize = 10;
constexpr std::size_t kRatersPerItem = 3;

// Items are shuffled, cut into groups of nine (a remainder smaller than nine
// is dropped and listed), and each group gets one honeypot at a uniformly
// random position. A honeypot shows a pool entity's article with its own
// description against the description of a different pool entity.
// Throws std::invalid_argument with fewer than nine items or fewer than two
// honeypot sources.
Campaign create_campaign(const std::string& campaign_id, const std::vector<CampaignInput>& items,
                         const std::string& language, const std::vector<HoneypotSource>& honeypot_pool,
                         std::uint64_t seed);

}  // namespace shortdesc::service
