#pragma once

// Scripted rating campaign over HTTP: five admitted workers, one of whom
// answers honeypots badly, plus one worker who fails the entry question.
// Every observation is recorded as a named check so the unit test and the
// acceptance binary can both report on it.

#include <httplib.h>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shortdesc/service/http.hpp"

namespace scenario {

using nlohmann::json;
using namespace shortdesc;

struct Check {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct ProtocolReport {
  std::vector<Check> checks;
  bool all_ok() const {
    for (const Check& c : checks)
      if (!c.ok) return false;
    return true;
  }
  void add(std::string name, bool ok, std::string detail = {}) { checks.push_back({std::move(name), ok, std::move(detail)}); }
};

inline service::Campaign protocol_campaign() {
  std::vector<service::CampaignInput> inputs;
  for (int i = 0; i < 90; ++i) {
    const std::string id = "Q" + std::to_string(1000 + i);
    inputs.push_back({id, "article about " + id, "model text " + id, "human text " + id, 0.01 * i});
  }
  std::vector<service::HoneypotSource> pool;
  for (int i = 0; i < 12; ++i) {
    const std::string id = "H" + std::to_string(i);
    pool.push_back({id, "article about " + id, "description of " + id});
  }
  return service::create_campaign("c1", inputs, "en", pool, 99);
}

// Good workers vote by a fixed rule on real items; honeypots are answered correctly.
inline std::string good_choice(const service::RatingItem& item, int worker) {
  if (item.honeypot) return item.system_1 == "decoy" ? "b" : "a";
  const bool prefer_model = (std::hash<std::string>{}(item.item_id) + static_cast<std::size_t>(worker)) % 3 != 0;
  const std::string wanted = prefer_model ? "model" : "human";
  return item.system_1 == wanted ? "a" : "b";
}

inline bool public_item_schema(const json& item) {
  if (!item.is_object() || item.size() != 4) return false;
  for (const char* key : {"item_id", "snippet", "option_1", "option_2"})
    if (!item.contains(key) || !item.at(key).is_string()) return false;
  return true;
}

inline ProtocolReport run_service_protocol(const std::filesystem::path& dir) {
  ProtocolReport rep;
  const service::Campaign campaign = protocol_campaign();
  std::map<std::string, const service::RatingItem*> truth;
  for (const auto& b : campaign.batches)
    for (const auto& it : b.items) truth[it.item_id] = &it;

  const std::filesystem::path log = dir / "events.jsonl";
  std::filesystem::remove(log);
  std::int64_t now = 0;
  service::EvalService svc(log, {"Pick the fruit", {"apple", "chair"}, "apple"}, [&now] { return ++now; });
  svc.add_campaign(campaign);
  service::HttpServer server(svc);
  const int port = server.start();
  httplib::Client cli("127.0.0.1", port);

  auto post = [&](const std::string& path, const json& body) {
    auto res = cli.Post(path, body.dump(), "application/json");
    return std::pair<int, json>{res ? res->status : -1, res ? json::parse(res->body, nullptr, false) : json()};
  };
  auto get = [&](const std::string& path) {
    auto res = cli.Get(path);
    return std::pair<int, json>{res ? res->status : -1, res ? json::parse(res->body, nullptr, false) : json()};
  };

  const auto entry = get("/entry");
  rep.add("entry question served", entry.first == 200 && entry.second.at("options").size() == 2 &&
                                       !entry.second.contains("answer"));

  const std::vector<std::string> good{"w1", "w2", "w3", "w4"};
  bool gates_ok = true;
  for (const std::string& w : good) gates_ok &= post("/gate", {{"worker_id", w}, {"answer", "apple"}}).second.value("admitted", false);
  gates_ok &= post("/gate", {{"worker_id", "bad"}, {"answer", "apple"}}).second.value("admitted", false);
  const auto refused = post("/gate", {{"worker_id", "guess"}, {"answer", "chair"}});
  rep.add("entry gate admits correct answers and refuses others",
          gates_ok && refused.first == 200 && !refused.second.value("admitted", true) &&
              get("/batch?worker_id=guess&request_id=r").first == 403);

  bool schema_ok = true;
  auto check_batch_schema = [&](const std::pair<int, json>& got) {
    const json& b = got.second;
    if (got.first != 200 || !b.is_object() || b.size() != 2 || !b.contains("batch_id") || !b.contains("items") ||
        !b.at("items").is_array()) {
      schema_ok = false;
      return;
    }
    for (const json& it : b.at("items")) schema_ok &= public_item_schema(it);
  };

  // The unreliable worker takes ten batches and answers the honeypots of the
  // last three wrongly; real items always go to the model.
  std::size_t bad_accepted = 0, bad_refused = 0;
  std::vector<std::string> bad_batches;
  std::vector<json> bad_items;
  for (int b = 0; b < 10; ++b) {
    const auto got = get("/batch?worker_id=bad&request_id=bad-" + std::to_string(b));
    check_batch_schema(got);
    if (got.first != 200 || got.second.at("batch_id").is_null()) break;
    bad_batches.push_back(got.second.at("batch_id").get<std::string>());
    bad_items.push_back(got.second.at("items"));
  }
  rep.add("unreliable worker holds ten batches", bad_batches.size() == 10);
  const auto repeat = get("/batch?worker_id=bad&request_id=bad-0");
  rep.add("repeated batch request is idempotent",
          repeat.first == 200 && !bad_batches.empty() && repeat.second.at("batch_id") == bad_batches[0]);
  for (std::size_t b = 0; b < bad_batches.size(); ++b) {
    for (const json& it : bad_items[b]) {
      const service::RatingItem& t = *truth.at(it.at("item_id").get<std::string>());
      std::string choice;
      if (t.honeypot) {
        const bool fail = b >= 7;
        choice = (t.system_1 == "decoy") == fail ? "a" : "b";
      } else {
        choice = t.system_1 == "model" ? "a" : "b";
      }
      const auto res = post("/vote", {{"batch_id", bad_batches[b]}, {"item_id", t.item_id}, {"worker_id", "bad"}, {"choice", choice}});
      if (res.first == 200) ++bad_accepted;
      else if (res.first == 403 && res.second.value("code", "") == "excluded") ++bad_refused;
    }
  }
  const auto bad_record = svc.worker("bad");
  rep.add("unreliable worker excluded once failures exceed 20% of honeypots",
          bad_record && bad_record->excluded && bad_record->honeypots_failed == 2 && bad_record->honeypots_seen == 9,
          bad_record ? std::to_string(bad_record->honeypots_failed) + "/" + std::to_string(bad_record->honeypots_seen) : "");
  rep.add("votes after exclusion are refused", bad_refused > 0 && bad_accepted + bad_refused == 100);
  rep.add("excluded worker cannot take more batches", get("/batch?worker_id=bad&request_id=more").first == 403);

  // Reliable workers request batches until nothing is left.
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> real_votes;  // item -> (worker, choice)
  std::map<std::string, std::size_t> batches_done;
  for (std::size_t round = 0; round < 20; ++round) {
    bool any = false;
    for (std::size_t w = 0; w < good.size(); ++w) {
      const auto got = get("/batch?worker_id=" + good[w] + "&request_id=r" + std::to_string(round));
      check_batch_schema(got);
      if (got.first != 200 || got.second.at("batch_id").is_null()) continue;
      any = true;
      ++batches_done[good[w]];
      const std::string bid = got.second.at("batch_id");
      for (const json& it : got.second.at("items")) {
        const service::RatingItem& t = *truth.at(it.at("item_id").get<std::string>());
        const std::string choice = good_choice(t, static_cast<int>(w));
        const auto res = post("/vote", {{"batch_id", bid}, {"item_id", t.item_id}, {"worker_id", good[w]}, {"choice", choice}});
        if (res.first != 200) schema_ok = false;
        if (!t.honeypot) real_votes[t.item_id].push_back({good[w], choice});
      }
    }
    if (!any) break;
  }
  std::size_t total_batches = 0;
  for (const auto& [_, n] : batches_done) total_batches += n;
  rep.add("items re-queued to reliable workers", total_batches == 30, std::to_string(total_batches) + " batch assignments");
  rep.add("served payloads carry no honeypot or system fields", schema_ok);

  const auto dup_item = campaign.batches[0].items[0].item_id;
  const auto dup = post("/vote", {{"batch_id", campaign.batches[0].batch_id}, {"item_id", dup_item},
                                  {"worker_id", real_votes.begin()->second[0].first}, {"choice", "a"}});
  const auto unauthorized = post("/vote", {{"batch_id", campaign.batches[0].batch_id}, {"item_id", dup_item},
                                           {"worker_id", "stranger"}, {"choice", "a"}});
  const auto malformed = post("/vote", {{"batch_id", 3}});
  rep.add("protocol errors", (dup.first == 409 || dup.first == 403) && unauthorized.first == 403 &&
                                 malformed.first == 400 && get("/nowhere").first == 404);

  // Hand computation: majority of the three reliable votes on every real item.
  const auto results = get("/results?campaign_id=c1");
  bool majority_ok = results.first == 200 && results.second.at("items").size() == 90;
  std::size_t model_wins = 0;
  if (majority_ok) {
    for (const json& r : results.second.at("items")) {
      const std::string id = r.at("item_id");
      const auto& votes = real_votes.at(id);
      std::size_t model = 0;
      std::set<std::string> voters;
      for (const auto& [w, choice] : votes) {
        const service::RatingItem& t = *truth.at(id);
        model += (choice == "a" ? t.system_1 : t.system_2) == "model";
        voters.insert(w);
      }
      const std::string expected = model >= 2 ? "model" : "human";
      model_wins += expected == "model";
      majority_ok &= votes.size() == 3 && r.at("winner") == expected && r.at("model_votes") == model &&
                     std::set<std::string>(r.at("voters").begin(), r.at("voters").end()) == voters;
    }
  }
  rep.add("majority results match hand computation", majority_ok);
  const json& summary = results.second;
  rep.add("summary counts",
          summary.value("complete", 0) == 90 && summary.value("model_wins", 0u) == model_wins &&
              !summary.value("partial", true) && summary.at("excluded_workers") == json::array({"bad"}) &&
              summary.value("discarded_votes", 0u) == bad_accepted,
          "discarded " + summary.value("discarded_votes", json()).dump());

  server.stop();
  const json live = svc.snapshot();
  const std::filesystem::path copy = dir / "replay.jsonl";
  std::filesystem::copy_file(log, copy, std::filesystem::copy_options::overwrite_existing);
  service::EvalService replayed(copy, svc.entry_question());
  rep.add("event-log replay reconstructs identical state",
          replayed.snapshot() == live && replayed.aggregate_results("c1").to_json() == svc.aggregate_results("c1").to_json() &&
              replayed.log_length() == svc.log_length());
  return rep;
}

}  // namespace scenario
