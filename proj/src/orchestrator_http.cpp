#include <spdlog/spdlog.h>

#include "http_util.hpp"
#include "sense/orchestrator.hpp"

namespace sense {

using namespace http_util;

namespace {

json body_json(const httplib::Request& req, const std::string& what) {
  try {
    return parse_json(req.body, what);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedIntent, e.what(), e.detail());
  }
}

}  // namespace

OrchestratorServer::OrchestratorServer(std::shared_ptr<Orchestrator> orch)
    : orch_(std::move(orch)), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  const std::string base = "/sense-o/v1/services";

  s.Post(base, [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, protocol::encode(orch_->create(body_json(req, "intent")))); });
  });
  s.Post(base + "/:id/negotiate", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      send_json(res, 200,
                protocol::encode(orch_->negotiate(req.path_params.at("id"), body_json(req, "intent"))));
    });
  });
  s.Post(base + "/:id/reserve", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, protocol::encode(orch_->reserve(req.path_params.at("id")))); });
  });
  s.Post(base + "/:id/commit", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      bool async = req.get_param_value("async") == "true";
      send_json(res, async ? 202 : 200, protocol::encode(orch_->commit(req.path_params.at("id"), async)));
    });
  });
  s.Delete(base + "/:id", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, protocol::encode(orch_->cancel(req.path_params.at("id")))); });
  });
  s.Get(base + "/:id/status", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, protocol::encode(orch_->status(req.path_params.at("id")))); });
  });
  s.Get("/sense-o/v1/models/union", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      auto u = orch_->union_model();
      send_json(res, 200, u ? u->export_graph() : json::object());
    });
  });
  s.Post("/sense-o/v1/callbacks/:rm", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      orch_->handle_notification(protocol::decode_notification(body_json(req, "notification")));
      res.status = 204;
    });
  });
}

OrchestratorServer::~OrchestratorServer() { stop(); }

int OrchestratorServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) {
    throw Error(ErrorCode::kTransport, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void OrchestratorServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string OrchestratorServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

// --- client ------------------------------------------------------------------------------

protocol::ServiceResponse HttpOrchestratorClient::create(const json& intent) {
  auto cli = make_client(base_url_, "");
  auto r = cli->Post("/sense-o/v1/services", intent.dump(), "application/json");
  return protocol::decode_service_response(expect_json(r, "create"));
}

protocol::ServiceResponse HttpOrchestratorClient::negotiate(const std::string& id, const json& intent) {
  auto cli = make_client(base_url_, "");
  auto r = cli->Post("/sense-o/v1/services/" + id + "/negotiate", intent.dump(), "application/json");
  return protocol::decode_service_response(expect_json(r, "negotiate"));
}

protocol::ServiceResponse HttpOrchestratorClient::reserve(const std::string& id) {
  auto cli = make_client(base_url_, "");
  auto r = cli->Post("/sense-o/v1/services/" + id + "/reserve", "", "application/json");
  return protocol::decode_service_response(expect_json(r, "reserve"));
}

protocol::ServiceResponse HttpOrchestratorClient::commit(const std::string& id, bool async) {
  auto cli = make_client(base_url_, "");
  cli->set_read_timeout(900);
  auto r = cli->Post("/sense-o/v1/services/" + id + "/commit" + (async ? "?async=true" : ""), "",
                     "application/json");
  return protocol::decode_service_response(expect_json(r, "commit"));
}

protocol::ServiceResponse HttpOrchestratorClient::cancel(const std::string& id) {
  auto cli = make_client(base_url_, "");
  auto r = cli->Delete("/sense-o/v1/services/" + id);
  return protocol::decode_service_response(expect_json(r, "cancel"));
}

protocol::ServiceStatus HttpOrchestratorClient::status(const std::string& id) {
  auto cli = make_client(base_url_, "");
  auto r = cli->Get("/sense-o/v1/services/" + id + "/status");
  return protocol::decode_service_status(expect_json(r, "status"));
}

json HttpOrchestratorClient::union_graph() {
  auto cli = make_client(base_url_, "");
  return expect_json(cli->Get("/sense-o/v1/models/union"), "union model");
}

}  // namespace sense
