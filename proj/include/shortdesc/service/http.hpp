#pragma once

// HTTP+JSON front end for EvalService.
//
//   GET  /entry                          {question, options}
//   POST /gate     {worker_id, answer}   {worker_id, admitted}
//   GET  /batch?worker_id=&request_id=   {batch_id, items:[{item_id, snippet, option_1, option_2}]}
//   POST /vote     {batch_id, item_id, worker_id, choice}   {ok, log_length}
//   GET  /results?campaign_id=           CampaignResults::to_json
//
// Errors are {"code", "message"} with the ServiceError status; malformed
// requests are 400 "bad_request".

#include <memory>
#include <string>
#include <thread>

#include "shortdesc/service/store.hpp"

namespace httplib {
class Server;
}

namespace shortdesc::service {

class HttpServer {
 public:
  explicit HttpServer(EvalService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocking variant for the serve command.
  void listen(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  EvalService& service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace shortdesc::service
