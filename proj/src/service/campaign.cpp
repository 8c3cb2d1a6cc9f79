#include "shortdesc/service/campaign.hpp"

#include <stdexcept>

#include "shortdesc/util/random.hpp"

namespace shortdesc::service {

using nlohmann::json;

json RatingItem::public_json() const {
  return json{{"item_id", item_id}, {"snippet", snippet}, {"option_1", option_1}, {"option_2", option_2}};
}

json RatingItem::to_json() const {
  json j{{"item_id", item_id},   {"entity_id", entity_id}, {"snippet", snippet},   {"option_1", option_1},
         {"option_2", option_2}, {"system_1", system_1},   {"system_2", system_2}, {"honeypot", honeypot},
         {"decoy_entity_id", decoy_entity_id}};
  j["metric_score"] = metric_score ? json(*metric_score) : json(nullptr);
  return j;
}

RatingItem RatingItem::from_json(const json& j) {
  RatingItem it;
  it.item_id = j.at("item_id").get<std::string>();
  it.entity_id = j.at("entity_id").get<std::string>();
  it.snippet = j.at("snippet").get<std::string>();
  it.option_1 = j.at("option_1").get<std::string>();
  it.option_2 = j.at("option_2").get<std::string>();
  it.system_1 = j.at("system_1").get<std::string>();
  it.system_2 = j.at("system_2").get<std::string>();
  it.honeypot = j.at("honeypot").get<bool>();
  it.decoy_entity_id = j.value("decoy_entity_id", std::string());
  if (j.contains("metric_score") && !j.at("metric_score").is_null()) it.metric_score = j.at("metric_score").get<double>();
  return it;
}

json RatingBatch::to_json() const {
  json items_json = json::array();
  for (const RatingItem& it : items) items_json.push_back(it.to_json());
  return json{{"batch_id", batch_id}, {"honeypot_position", honeypot_position}, {"items", std::move(items_json)}};
}

RatingBatch RatingBatch::from_json(const json& j) {
  RatingBatch b;
  b.batch_id = j.at("batch_id").get<std::string>();
  b.honeypot_position = j.at("honeypot_position").get<std::size_t>();
  for (const json& it : j.at("items")) b.items.push_back(RatingItem::from_json(it));
  return b;
}

json Campaign::to_json() const {
  json batches_json = json::array();
  for (const RatingBatch& b : batches) batches_json.push_back(b.to_json());
  return json{{"campaign_id", campaign_id},
              {"language", language},
              {"seed", seed},
              {"batches", std::move(batches_json)},
              {"dropped_entities", dropped_entities}};
}

Campaign Campaign::from_json(const json& j) {
  Campaign c;
  c.campaign_id = j.at("campaign_id").get<std::string>();
  c.language = j.at("language").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  for (const json& b : j.at("batches")) c.batches.push_back(RatingBatch::from_json(b));
  c.dropped_entities = j.value("dropped_entities", std::vector<std::string>{});
  return c;
}

Campaign create_campaign(const std::string& campaign_id, const std::vector<CampaignInput>& items,
                         const std::string& language, const std::vector<HoneypotSource>& honeypot_pool,
                         std::uint64_t seed) {
  if (items.size() < kRealItemsPerBatch)
    throw std::invalid_argument("campaign needs at least " + std::to_string(kRealItemsPerBatch) + " items, got " +
                                std::to_string(items.size()));
  if (honeypot_pool.size() < 2) throw std::invalid_argument("honeypot pool needs at least two entities");

  util::Rng rng(seed);
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  util::shuffle(order, rng);

  Campaign c;
  c.campaign_id = campaign_id;
  c.language = language;
  c.seed = seed;
  const std::size_t n_batches = items.size() / kRealItemsPerBatch;
  for (std::size_t k = n_batches * kRealItemsPerBatch; k < order.size(); ++k)
    c.dropped_entities.push_back(items[order[k]].entity_id);

  for (std::size_t b = 0; b < n_batches; ++b) {
    RatingBatch batch;
    batch.batch_id = campaign_id + "-b" + std::to_string(b);
    batch.honeypot_position = util::uniform_index(rng, kBatchSize);
    std::size_t next_real = b * kRealItemsPerBatch;
    for (std::size_t pos = 0; pos < kBatchSize; ++pos) {
      RatingItem it;
      it.item_id = batch.batch_id + "-i" + std::to_string(pos);
      std::string first, second, first_sys, second_sys;
      if (pos == batch.honeypot_position) {
        const std::size_t h = util::uniform_index(rng, honeypot_pool.size());
        std::size_t d = util::uniform_index(rng, honeypot_pool.size() - 1);
        if (d >= h) ++d;  // never the item's own entity
        it.honeypot = true;
        it.entity_id = honeypot_pool[h].entity_id;
        it.snippet = honeypot_pool[h].snippet;
        it.decoy_entity_id = honeypot_pool[d].entity_id;
        first = honeypot_pool[h].description;
        first_sys = "human";
        second = honeypot_pool[d].description;
        second_sys = "decoy";
      } else {
        const CampaignInput& in = items[order[next_real++]];
        it.entity_id = in.entity_id;
        it.snippet = in.snippet;
        it.metric_score = in.metric_score;
        first = in.model_description;
        first_sys = "model";
        second = in.human_description;
        second_sys = "human";
      }
      if (util::uniform_unit(rng) < 0.5) {
        std::swap(first, second);
        std::swap(first_sys, second_sys);
      }
      it.option_1 = std::move(first);
      it.option_2 = std::move(second);
      it.system_1 = std::move(first_sys);
      it.system_2 = std::move(second_sys);
      batch.items.push_back(std::move(it));
    }
    c.batches.push_back(std::move(batch));
  }
  return c;
}

}  // namespace shortdesc::service
