#include "shortdesc/service/store.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>

#include "shortdesc/analysis/sampling.hpp"

namespace shortdesc::service {

using nlohmann::json;

std::string canonical_choice(const std::string& choice) {
  if (choice == "a" || choice == "option_1") return "a";
  if (choice == "b" || choice == "option_2") return "b";
  throw ServiceError("bad_request", 400, "choice must be one of a, b, option_1, option_2");
}

json CampaignResults::to_json() const {
  json items_json = json::array();
  for (const ItemResult& r : items) {
    json j{{"item_id", r.item_id},         {"entity_id", r.entity_id}, {"model_votes", r.model_votes},
           {"human_votes", r.human_votes}, {"voters", r.voters}};
    j["winner"] = r.winner ? json(*r.winner) : json(nullptr);
    j["metric_score"] = r.metric_score ? json(*r.metric_score) : json(nullptr);
    items_json.push_back(std::move(j));
  }
  json deciles_json = json::array();
  for (const DecileResult& d : deciles)
    deciles_json.push_back({{"bin", d.bin}, {"items", d.items}, {"model_win_fraction", d.model_win_fraction}});
  json j{{"campaign_id", campaign_id},
         {"items", std::move(items_json)},
         {"complete", complete},
         {"model_wins", model_wins},
         {"deciles", std::move(deciles_json)},
         {"partial", partial},
         {"excluded_workers", excluded_workers},
         {"discarded_votes", discarded_votes},
         {"dropped_entities", dropped_entities}};
  j["model_win_fraction"] = model_win_fraction ? json(*model_win_fraction) : json(nullptr);
  j["wilson95"] = wilson95 ? json::array({wilson95->lower, wilson95->upper}) : json(nullptr);
  j["fleiss_kappa"] = fleiss_kappa ? json(*fleiss_kappa) : json(nullptr);
  return j;
}

EvalService::EvalService(std::filesystem::path log_path, EntryQuestion entry, Clock clock)
    : log_path_(std::move(log_path)), entry_(std::move(entry)), clock_(std::move(clock)) {
  if (!clock_)
    clock_ = [] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count();
    };
  if (std::filesystem::exists(log_path_)) {
    std::ifstream in(log_path_);
    if (!in) throw std::runtime_error("cannot read event log " + log_path_.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        apply(json::parse(line));
      } catch (const std::exception& e) {
        throw std::runtime_error("event log " + log_path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      ++log_length_;
    }
  }
  log_.open(log_path_, std::ios::app);
  if (!log_) throw std::runtime_error("cannot open event log " + log_path_.string());
}

void EvalService::append(const json& event) {
  log_ << event.dump() << '\n';
  log_.flush();
  if (!log_) throw ServiceError("storage", 500, "failed to append to the event log");
  ++log_length_;
}

void EvalService::apply(const json& e) {
  const std::string type = e.at("type").get<std::string>();
  if (type == "campaign_created") {
    apply_campaign(Campaign::from_json(e.at("campaign")));
  } else if (type == "gate") {
    apply_gate(e.at("worker_id").get<std::string>(), e.at("admitted").get<bool>());
  } else if (type == "assign") {
    apply_assign(e.at("worker_id").get<std::string>(), e.at("batch_id").get<std::string>(),
                 e.at("request_id").get<std::string>());
  } else if (type == "vote") {
    apply_vote(Vote{e.at("batch_id").get<std::string>(), e.at("item_id").get<std::string>(),
                    e.at("worker_id").get<std::string>(), e.at("choice").get<std::string>(),
                    e.at("timestamp").get<std::int64_t>()});
  } else {
    throw std::runtime_error("unknown event type " + type);
  }
}

void EvalService::apply_campaign(const Campaign& campaign) {
  auto [it, inserted] = campaigns_.emplace(campaign.campaign_id, campaign);
  if (!inserted) throw std::runtime_error("duplicate campaign " + campaign.campaign_id);
  for (const RatingBatch& b : it->second.batches) {
    batches_[b.batch_id] = BatchState{campaign.campaign_id, &b, {}};
    batch_order_.push_back(b.batch_id);
  }
}

void EvalService::apply_gate(const std::string& worker_id, bool admitted) {
  WorkerRecord& w = workers_[worker_id];
  w.worker_id = worker_id;
  w.gated = true;
  w.admitted = admitted;
}

void EvalService::apply_assign(const std::string& worker_id, const std::string& batch_id, const std::string& request_id) {
  batches_.at(batch_id).assignees.push_back(worker_id);
  workers_.at(worker_id).batches.push_back(batch_id);
  requests_[{worker_id, request_id}] = batch_id;
}

void EvalService::apply_vote(const Vote& vote) {
  const BatchState& b = batches_.at(vote.batch_id);
  const RatingItem& item = find_item(b, vote.item_id);
  votes_.push_back(vote);
  voted_.insert({vote.item_id, vote.worker_id});
  if (!item.honeypot) return;
  WorkerRecord& w = workers_.at(vote.worker_id);
  ++w.honeypots_seen;
  const std::string& chosen = vote.choice == "a" ? item.system_1 : item.system_2;
  if (chosen == "decoy") ++w.honeypots_failed;
  // Monotone: once excluded, always excluded.
  if (static_cast<double>(w.honeypots_failed) > 0.2 * static_cast<double>(w.honeypots_seen)) w.excluded = true;
}

const RatingItem& EvalService::find_item(const BatchState& b, const std::string& item_id) const {
  for (const RatingItem& it : b.batch->items)
    if (it.item_id == item_id) return it;
  throw ServiceError("not_found", 404, "item " + item_id + " is not in batch " + b.batch->batch_id);
}

std::size_t EvalService::active_assignees(const BatchState& b) const {
  std::size_t n = 0;
  for (const std::string& w : b.assignees)
    if (!workers_.at(w).excluded) ++n;
  return n;
}

bool EvalService::batch_needs_raters(const BatchState& b) const { return active_assignees(b) < kRatersPerItem; }

void EvalService::add_campaign(const Campaign& campaign) {
  std::unique_lock lock(mutex_);
  if (campaigns_.contains(campaign.campaign_id))
    throw ServiceError("conflict", 409, "campaign " + campaign.campaign_id + " already exists");
  for (const RatingBatch& b : campaign.batches)
    if (batches_.contains(b.batch_id)) throw ServiceError("conflict", 409, "batch id " + b.batch_id + " already in use");
  const json event{{"type", "campaign_created"}, {"campaign", campaign.to_json()}};
  append(event);
  apply_campaign(campaign);
}

bool EvalService::gate_worker(const std::string& worker_id, const std::string& answer) {
  if (worker_id.empty()) throw ServiceError("bad_request", 400, "worker_id is required");
  std::unique_lock lock(mutex_);
  auto it = workers_.find(worker_id);
  if (it != workers_.end() && it->second.gated) return it->second.admitted;  // recorded once
  const bool admitted = answer == entry_.answer;
  append(json{{"type", "gate"}, {"worker_id", worker_id}, {"answer", answer}, {"admitted", admitted}});
  apply_gate(worker_id, admitted);
  return admitted;
}

json EvalService::assign_batch(const std::string& worker_id, const std::string& request_id) {
  if (worker_id.empty()) throw ServiceError("bad_request", 400, "worker_id is required");
  std::unique_lock lock(mutex_);
  auto w = workers_.find(worker_id);
  if (w == workers_.end() || !w->second.gated)
    throw ServiceError("not_gated", 403, "worker " + worker_id + " has not answered the entry question");
  if (!w->second.admitted) throw ServiceError("rejected", 403, "worker " + worker_id + " did not pass the entry question");
  if (w->second.excluded) throw ServiceError("excluded", 403, "worker " + worker_id + " is excluded");

  auto view = [&](const std::string& batch_id) {
    json items = json::array();
    for (const RatingItem& it : batches_.at(batch_id).batch->items) items.push_back(it.public_json());
    return json{{"batch_id", batch_id}, {"items", std::move(items)}};
  };
  if (!request_id.empty()) {
    auto r = requests_.find({worker_id, request_id});
    if (r != requests_.end()) return view(r->second);
  }
  for (const std::string& batch_id : batch_order_) {
    const BatchState& b = batches_.at(batch_id);
    if (std::find(b.assignees.begin(), b.assignees.end(), worker_id) != b.assignees.end()) continue;
    if (!batch_needs_raters(b)) continue;
    append(json{{"type", "assign"}, {"worker_id", worker_id}, {"batch_id", batch_id}, {"request_id", request_id}});
    apply_assign(worker_id, batch_id, request_id);
    return view(batch_id);
  }
  return json{{"batch_id", nullptr}, {"items", json::array()}};
}

void EvalService::record_vote(const std::string& batch_id, const std::string& item_id, const std::string& worker_id,
                              const std::string& choice) {
  const std::string c = canonical_choice(choice);
  std::unique_lock lock(mutex_);
  auto b = batches_.find(batch_id);
  if (b == batches_.end()) throw ServiceError("not_found", 404, "unknown batch " + batch_id);
  find_item(b->second, item_id);
  const auto& assignees = b->second.assignees;
  if (std::find(assignees.begin(), assignees.end(), worker_id) == assignees.end())
    throw ServiceError("unauthorized", 403, "worker " + worker_id + " is not assigned to batch " + batch_id);
  if (workers_.at(worker_id).excluded) throw ServiceError("excluded", 403, "worker " + worker_id + " is excluded");
  if (voted_.contains({item_id, worker_id}))
    throw ServiceError("conflict", 409, "worker " + worker_id + " already voted on item " + item_id);
  const Vote vote{batch_id, item_id, worker_id, c, clock_()};
  append(json{{"type", "vote"},
              {"batch_id", vote.batch_id},
              {"item_id", vote.item_id},
              {"worker_id", vote.worker_id},
              {"choice", vote.choice},
              {"timestamp", vote.timestamp}});
  apply_vote(vote);
}

CampaignResults EvalService::aggregate_results(const std::string& campaign_id) const {
  std::shared_lock lock(mutex_);
  auto c = campaigns_.find(campaign_id);
  if (c == campaigns_.end()) throw ServiceError("not_found", 404, "unknown campaign " + campaign_id);
  CampaignResults r;
  r.campaign_id = campaign_id;
  r.dropped_entities = c->second.dropped_entities;

  std::map<std::string, std::vector<const Vote*>> by_item;
  for (const Vote& v : votes_) {
    if (batches_.at(v.batch_id).campaign_id != campaign_id) continue;
    if (workers_.at(v.worker_id).excluded) {
      ++r.discarded_votes;
      continue;
    }
    by_item[v.item_id].push_back(&v);
  }
  std::set<std::string> excluded;
  for (const Vote& v : votes_)
    if (batches_.at(v.batch_id).campaign_id == campaign_id && workers_.at(v.worker_id).excluded) excluded.insert(v.worker_id);
  for (const auto& [id, w] : workers_)
    if (w.excluded)
      for (const std::string& bid : w.batches)
        if (batches_.at(bid).campaign_id == campaign_id) excluded.insert(id);
  r.excluded_workers.assign(excluded.begin(), excluded.end());

  std::vector<std::vector<std::size_t>> kappa_table;
  for (const RatingBatch& batch : c->second.batches) {
    for (const RatingItem& item : batch.items) {
      if (item.honeypot) continue;
      ItemResult ir;
      ir.item_id = item.item_id;
      ir.entity_id = item.entity_id;
      ir.metric_score = item.metric_score;
      auto votes = by_item.find(item.item_id);
      if (votes != by_item.end()) {
        for (const Vote* v : votes->second) {
          if (ir.voters.size() == kRatersPerItem) break;
          ir.voters.push_back(v->worker_id);
          const std::string& sys = v->choice == "a" ? item.system_1 : item.system_2;
          (sys == "model" ? ir.model_votes : ir.human_votes) += 1;
        }
      }
      if (ir.voters.size() == kRatersPerItem) {
        ir.winner = ir.model_votes > ir.human_votes ? "model" : "human";
        ++r.complete;
        if (*ir.winner == "model") ++r.model_wins;
        kappa_table.push_back({ir.model_votes, ir.human_votes});
      } else {
        r.partial = true;
      }
      r.items.push_back(std::move(ir));
    }
  }
  if (r.complete > 0) {
    r.model_win_fraction = static_cast<double>(r.model_wins) / static_cast<double>(r.complete);
    r.wilson95 = analysis::wilson_interval(r.model_wins, r.complete);
    r.fleiss_kappa = analysis::fleiss_kappa(kappa_table, kRatersPerItem);
  }

  std::vector<const ItemResult*> scored;
  for (const ItemResult& ir : r.items)
    if (ir.winner && ir.metric_score) scored.push_back(&ir);
  if (!scored.empty()) {
    const std::size_t n_bins = std::min<std::size_t>(10, scored.size());
    std::vector<double> values;
    for (const ItemResult* ir : scored) values.push_back(*ir->metric_score);
    const std::vector<std::size_t> bins = analysis::quantile_bins(values, n_bins);
    std::vector<DecileResult> d(n_bins);
    std::vector<std::size_t> wins(n_bins, 0);
    for (std::size_t i = 0; i < scored.size(); ++i) {
      ++d[bins[i]].items;
      if (*scored[i]->winner == "model") ++wins[bins[i]];
    }
    for (std::size_t b = 0; b < n_bins; ++b) {
      d[b].bin = b;
      d[b].model_win_fraction = static_cast<double>(wins[b]) / static_cast<double>(d[b].items);
    }
    r.deciles = std::move(d);
  }
  return r;
}

std::optional<WorkerRecord> EvalService::worker(const std::string& worker_id) const {
  std::shared_lock lock(mutex_);
  auto it = workers_.find(worker_id);
  if (it == workers_.end()) return std::nullopt;
  return it->second;
}

std::size_t EvalService::log_length() const {
  std::shared_lock lock(mutex_);
  return log_length_;
}

std::vector<std::string> EvalService::campaign_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : campaigns_) out.push_back(id);
  return out;
}

json EvalService::snapshot() const {
  std::shared_lock lock(mutex_);
  json campaigns = json::object();
  for (const auto& [id, c] : campaigns_) campaigns[id] = c.to_json();
  json batches = json::object();
  for (const auto& [id, b] : batches_) batches[id] = json{{"campaign_id", b.campaign_id}, {"assignees", b.assignees}};
  json workers = json::object();
  for (const auto& [id, w] : workers_)
    workers[id] = json{{"gated", w.gated},
                       {"admitted", w.admitted},
                       {"honeypots_seen", w.honeypots_seen},
                       {"honeypots_failed", w.honeypots_failed},
                       {"excluded", w.excluded},
                       {"batches", w.batches}};
  json votes = json::array();
  for (const Vote& v : votes_)
    votes.push_back({v.batch_id, v.item_id, v.worker_id, v.choice, v.timestamp});
  json requests = json::array();
  for (const auto& [key, batch] : requests_) requests.push_back({key.first, key.second, batch});
  return json{{"campaigns", std::move(campaigns)}, {"batches", std::move(batches)}, {"workers", std::move(workers)},
              {"votes", std::move(votes)},         {"requests", std::move(requests)}};
}

}  // namespace shortdesc::service
