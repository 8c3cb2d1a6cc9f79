#pragma once

// Evaluation service state. Every mutation is appended to a JSONL event log
// before it is applied, and the state can be rebuilt by replaying the log.
//
// Event lines:
//   {"type":"campaign_created","campaign":{...}}
//   {"type":"gate","worker_id":w,"answer":a,"admitted":bool}
//   {"type":"assign","worker_id":w,"batch_id":b,"request_id":r}
//   {"type":"vote","batch_id":b,"item_id":i,"worker_id":w,"choice":"a"|"b","timestamp":ms}

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shortdesc/analysis/agreement.hpp"
#include "shortdesc/service/campaign.hpp"

namespace shortdesc::service {

// Error with a stable machine-readable code and an HTTP status.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(std::string code, int status, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), status_(status) {}
  const std::string& code() const { return code_; }
  int status() const { return status_; }

 private:
  std::string code_;
  int status_;
};

struct EntryQuestion {
  std::string question;
  std::vector<std::string> options;
  std::string answer;
};

struct WorkerRecord {
  std::string worker_id;
  bool gated = false;
  bool admitted = false;
  std::size_t honeypots_seen = 0;
  std::size_t honeypots_failed = 0;
  bool excluded = false;
  std::vector<std::string> batches;  // assignment order
};

struct Vote {
  std::string batch_id;
  std::string item_id;
  std::string worker_id;
  std::string choice;  // "a" (option_1) or "b" (option_2)
  std::int64_t timestamp = 0;
};

struct ItemResult {
  std::string item_id;
  std::string entity_id;
  std::optional<std::string> winner;  // "model" or "human"; absent without quorum
  std::size_t model_votes = 0;
  std::size_t human_votes = 0;
  std::vector<std::string> voters;
  std::optional<double> metric_score;
};

struct DecileResult {
  std::size_t bin = 0;
  std::size_t items = 0;
  double model_win_fraction = 0.0;
};

struct CampaignResults {
  std::string campaign_id;
  std::vector<ItemResult> items;  // real items only
  std::size_t complete = 0;
  std::size_t model_wins = 0;
  std::optional<double> model_win_fraction;
  std::optional<analysis::Interval> wilson95;
  std::optional<double> fleiss_kappa;
  std::vector<DecileResult> deciles;
  bool partial = false;
  std::vector<std::string> excluded_workers;
  std::size_t discarded_votes = 0;
  std::vector<std::string> dropped_entities;

  nlohmann::json to_json() const;
};

// Normalizes "a"/"b"/"option_1"/"option_2" to "a" or "b"; throws ServiceError.
std::string canonical_choice(const std::string& choice);

class EvalService {
 public:
  using Clock = std::function<std::int64_t()>;

  // Replays an existing log at log_path, then appends to it.
  EvalService(std::filesystem::path log_path, EntryQuestion entry, Clock clock = {});

  const EntryQuestion& entry_question() const { return entry_; }

  void add_campaign(const Campaign& campaign);
  bool gate_worker(const std::string& worker_id, const std::string& answer);
  // Public batch view {"batch_id", "items": [...]}, or {"batch_id": null, "items": []}
  // when nothing is eligible. Repeating a request id returns the same batch.
  nlohmann::json assign_batch(const std::string& worker_id, const std::string& request_id);
  void record_vote(const std::string& batch_id, const std::string& item_id, const std::string& worker_id,
                   const std::string& choice);
  CampaignResults aggregate_results(const std::string& campaign_id) const;

  std::optional<WorkerRecord> worker(const std::string& worker_id) const;
  std::size_t log_length() const;
  std::vector<std::string> campaign_ids() const;
  // Full state, used to check that replay reproduces it.
  nlohmann::json snapshot() const;

 private:
  struct BatchState {
    std::string campaign_id;
    const RatingBatch* batch = nullptr;
    std::vector<std::string> assignees;
  };

  void append(const nlohmann::json& event);
  void apply(const nlohmann::json& event);
  void apply_campaign(const Campaign& campaign);
  void apply_gate(const std::string& worker_id, bool admitted);
  void apply_assign(const std::string& worker_id, const std::string& batch_id, const std::string& request_id);
  void apply_vote(const Vote& vote);
  std::size_t active_assignees(const BatchState& b) const;
  bool batch_needs_raters(const BatchState& b) const;
  const RatingItem& find_item(const BatchState& b, const std::string& item_id) const;

  std::filesystem::path log_path_;
  std::ofstream log_;
  std::size_t log_length_ = 0;
  EntryQuestion entry_;
  Clock clock_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, Campaign> campaigns_;
  std::vector<std::string> batch_order_;  // creation order across campaigns
  std::map<std::string, BatchState> batches_;
  std::map<std::string, WorkerRecord> workers_;
  std::map<std::pair<std::string, std::string>, std::string> requests_;  // (worker, request) -> batch
  std::vector<Vote> votes_;
  std::set<std::pair<std::string, std::string>> voted_;  // (item, worker)
};

}  // namespace shortdesc::service
