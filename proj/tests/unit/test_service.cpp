#include <doctest.h>

#include <fstream>

#include "../scenarios/service_protocol.hpp"
#include "support.hpp"

using namespace shortdesc;
using namespace shortdesc::service;

namespace {

std::vector<CampaignInput> inputs(int n) {
  std::vector<CampaignInput> out;
  for (int i = 0; i < n; ++i) {
    const std::string id = "E" + std::to_string(i);
    out.push_back({id, "snippet " + id, "model " + id, "human " + id, std::nullopt});
  }
  return out;
}

std::vector<HoneypotSource> pool(int n) {
  std::vector<HoneypotSource> out;
  for (int i = 0; i < n; ++i) out.push_back({"P" + std::to_string(i), "pool snippet", "pool description " + std::to_string(i)});
  return out;
}

const EntryQuestion kEntry{"2 + 2?", {"4", "5"}, "4"};

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

}  // namespace

TEST_CASE("campaign assembly") {
  const Campaign c = create_campaign("c", inputs(90), "en", pool(5), 3);
  REQUIRE(c.batches.size() == 10);
  std::set<std::string> entities;
  for (const RatingBatch& b : c.batches) {
    CHECK(b.items.size() == kBatchSize);
    std::size_t honeypots = 0;
    for (std::size_t k = 0; k < b.items.size(); ++k) {
      const RatingItem& it = b.items[k];
      if (it.honeypot) {
        ++honeypots;
        CHECK(k == b.honeypot_position);
        CHECK(it.decoy_entity_id != it.entity_id);
        CHECK(std::set<std::string>{it.system_1, it.system_2} == std::set<std::string>{"human", "decoy"});
      } else {
        entities.insert(it.entity_id);
        CHECK(std::set<std::string>{it.system_1, it.system_2} == std::set<std::string>{"human", "model"});
        CHECK((it.system_1 == "model" ? it.option_1 : it.option_2) == "model " + it.entity_id);
      }
      const nlohmann::json pub = it.public_json();
      CHECK(scenario::public_item_schema(pub));
      CHECK(RatingItem::from_json(it.to_json()).to_json() == it.to_json());
    }
    CHECK(honeypots == 1);
  }
  CHECK(entities.size() == 90);
  CHECK(create_campaign("c", inputs(90), "en", pool(5), 3).to_json() == c.to_json());
  CHECK(create_campaign("c", inputs(90), "en", pool(5), 4).to_json() != c.to_json());
  CHECK(Campaign::from_json(c.to_json()).to_json() == c.to_json());

  // Both presentation orders occur.
  std::size_t model_first = 0;
  for (const RatingBatch& b : c.batches)
    for (const RatingItem& it : b.items) model_first += it.system_1 == "model";
  CHECK(model_first > 10);
  CHECK(model_first < 80);

  const Campaign partial = create_campaign("p", inputs(20), "en", pool(2), 1);
  CHECK(partial.batches.size() == 2);
  CHECK(partial.dropped_entities.size() == 2);
  CHECK_THROWS_AS(create_campaign("x", inputs(8), "en", pool(3), 1), std::invalid_argument);
  CHECK_THROWS_AS(create_campaign("x", inputs(9), "en", pool(1), 1), std::invalid_argument);
}

TEST_CASE("gating, assignment and vote validation") {
  const auto dir = testing::temp_dir("svc");
  EvalService svc(dir / "log.jsonl", kEntry, [] { return 7; });
  const Campaign c = create_campaign("c", inputs(18), "en", pool(3), 1);
  svc.add_campaign(c);
  CHECK(status_of([&] { svc.add_campaign(c); }) == 409);

  CHECK(status_of([&] { svc.assign_batch("w", "r"); }) == 403);
  CHECK(svc.gate_worker("w", "4"));
  CHECK_FALSE(svc.gate_worker("x", "5"));
  CHECK(svc.gate_worker("w", "5"));  // first answer stands
  CHECK(status_of([&] { svc.assign_batch("x", "r"); }) == 403);

  const auto b1 = svc.assign_batch("w", "r1");
  const auto b2 = svc.assign_batch("w", "r2");
  CHECK(b1.at("batch_id") != b2.at("batch_id"));
  CHECK(svc.assign_batch("w", "r1") == b1);
  CHECK(svc.assign_batch("w", "r3").at("batch_id").is_null());  // one batch per worker per batch id

  const std::string bid = b1.at("batch_id");
  std::string item;
  for (const nlohmann::json& it : b1.at("items"))
    for (const RatingBatch& b : c.batches)
      for (const RatingItem& ri : b.items)
        if (ri.item_id == it.at("item_id") && !ri.honeypot && item.empty()) item = ri.item_id;
  CHECK(canonical_choice("option_2") == "b");
  CHECK(status_of([&] { canonical_choice("c"); }) == 400);
  CHECK(status_of([&] { svc.record_vote(bid, "nope", "w", "a"); }) == 404);
  CHECK(status_of([&] { svc.record_vote("nope", item, "w", "a"); }) == 404);
  CHECK(status_of([&] { svc.record_vote(bid, item, "x", "a"); }) == 403);
  CHECK(status_of([&] { svc.record_vote(bid, item, "w", "maybe"); }) == 400);
  const std::size_t before = svc.log_length();
  svc.record_vote(bid, item, "w", "a");
  CHECK(svc.log_length() == before + 1);
  CHECK(status_of([&] { svc.record_vote(bid, item, "w", "b"); }) == 409);
  CHECK(status_of([&] { svc.aggregate_results("none"); }) == 404);

  const CampaignResults r = svc.aggregate_results("c");
  CHECK(r.partial);
  CHECK(r.complete == 0);
  CHECK_FALSE(r.model_win_fraction);
  CHECK(r.to_json().at("model_win_fraction").is_null());
}

TEST_CASE("three raters per batch and majority aggregation") {
  const auto dir = testing::temp_dir("svc3");
  EvalService svc(dir / "log.jsonl", kEntry);
  const Campaign c = create_campaign("c", inputs(9), "en", pool(3), 5);
  svc.add_campaign(c);
  const RatingBatch& batch = c.batches[0];
  for (const std::string w : {"a", "b", "c", "d"}) svc.gate_worker(w, "4");
  for (const std::string w : {"a", "b", "c"}) CHECK(svc.assign_batch(w, "r").at("batch_id") == batch.batch_id);
  CHECK(svc.assign_batch("d", "r").at("batch_id").is_null());

  // a and b always pick the model, c always the human side.
  for (const RatingItem& it : batch.items) {
    const std::string model = it.system_1 == "model" ? "a" : "b";
    const std::string human = it.system_1 == "human" ? "a" : "b";
    const std::string truth = it.system_1 == "decoy" ? "b" : "a";
    for (const std::string w : {"a", "b"}) svc.record_vote(batch.batch_id, it.item_id, w, it.honeypot ? truth : model);
    svc.record_vote(batch.batch_id, it.item_id, "c", it.honeypot ? truth : human);
  }
  const CampaignResults r = svc.aggregate_results("c");
  CHECK(r.items.size() == 9);
  CHECK(r.complete == 9);
  CHECK_FALSE(r.partial);
  CHECK(r.model_wins == 9);
  CHECK(*r.model_win_fraction == 1.0);
  for (const ItemResult& it : r.items) {
    CHECK(it.winner == std::optional<std::string>("model"));
    CHECK(it.model_votes == 2);
    CHECK(it.human_votes == 1);
  }
  REQUIRE(r.wilson95);
  CHECK(r.wilson95->lower == doctest::Approx(analysis::wilson_interval(9, 9).lower));
  // Every item is split 2:1 the same way.
  std::vector<std::vector<std::size_t>> counts(9, {2, 1});
  CHECK(r.fleiss_kappa == analysis::fleiss_kappa(counts, 3));
}

TEST_CASE("log replay and corruption") {
  const auto dir = testing::temp_dir("svcreplay");
  {
    EvalService svc(dir / "log.jsonl", kEntry);
    svc.add_campaign(create_campaign("c", inputs(9), "en", pool(3), 5));
    svc.gate_worker("w", "4");
    const auto b = svc.assign_batch("w", "r");
    svc.record_vote(b.at("batch_id"), b.at("items")[0].at("item_id"), "w", "a");
    const nlohmann::json snap = svc.snapshot();
    EvalService again(dir / "log.jsonl", kEntry);  // the first writer has flushed every line
    CHECK(again.snapshot() == snap);
    CHECK(again.log_length() == 4);
  }
  std::ofstream(dir / "log.jsonl", std::ios::app) << "{not json\n";
  try {
    EvalService broken(dir / "log.jsonl", kEntry);
    FAIL("corrupt log accepted");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("log.jsonl:5") != std::string::npos);
  }
}

TEST_CASE("HTTP protocol with an unreliable worker") {
  const auto dir = testing::temp_dir("svchttp");
  const scenario::ProtocolReport rep = scenario::run_service_protocol(dir);
  for (const scenario::Check& c : rep.checks) {
    INFO(c.name << " " << c.detail);
    CHECK(c.ok);
  }
  CHECK(rep.checks.size() >= 12);
}
