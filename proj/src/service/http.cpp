#include "shortdesc/service/http.hpp"

#include <httplib.h>

#include <stdexcept>

namespace shortdesc::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, json{{"code", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw ServiceError("bad_request", 400, "request body must be a JSON object");
  return body;
}

std::string field(const json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end() || !it->is_string()) throw ServiceError("bad_request", 400, std::string("missing string field ") + name);
  return it->get<std::string>();
}

std::string param(const httplib::Request& req, const char* name, bool required) {
  if (!req.has_param(name)) {
    if (required) throw ServiceError("bad_request", 400, std::string("missing query parameter ") + name);
    return {};
  }
  return req.get_param_value(name);
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

HttpServer::HttpServer(EvalService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Get("/entry", guarded([this](const httplib::Request&, httplib::Response& res) {
          const EntryQuestion& q = service_.entry_question();
          send_json(res, 200, json{{"question", q.question}, {"options", q.options}});
        }));
  s.Post("/gate", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           const std::string worker = field(body, "worker_id");
           const bool admitted = service_.gate_worker(worker, field(body, "answer"));
           send_json(res, 200, json{{"worker_id", worker}, {"admitted", admitted}});
         }));
  s.Get("/batch", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, service_.assign_batch(param(req, "worker_id", true), param(req, "request_id", false)));
        }));
  s.Post("/vote", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const json body = parse_body(req);
           service_.record_vote(field(body, "batch_id"), field(body, "item_id"), field(body, "worker_id"),
                                field(body, "choice"));
           send_json(res, 200, json{{"ok", true}, {"log_length", service_.log_length()}});
         }));
  s.Get("/results", guarded([this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, service_.aggregate_results(param(req, "campaign_id", true)).to_json());
        }));
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "not_found" : "http_error", "no such route");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  if (thread_.joinable()) throw std::logic_error("server already started");
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpServer::listen(const std::string& host, int port) {
  port_ = port;
  if (!server_->listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace shortdesc::service
