#include <httplib.h>
#include <spdlog/spdlog.h>

#include <ctime>
#include <regex>

#include "http_util.hpp"
#include "sense/error.hpp"
#include "sense/json_util.hpp"
#include "sense/rm.hpp"

namespace sense {

using protocol::DeltaStateWire;
using namespace http_util;

// --- shared HTTP helpers ------------------------------------------------------------

int http_status_for(ErrorCode code) {
  switch (wire_code(code)) {
    case ErrorCode::kMalformedIntent: return 400;
    case ErrorCode::kUnknownUrn:
    case ErrorCode::kUnknownDelta: return 404;
    case ErrorCode::kHoldExpired: return 410;
    case ErrorCode::kInsufficientBandwidth:
    case ErrorCode::kVlanConflict:
    case ErrorCode::kBadState:
    case ErrorCode::kTooManyRounds: return 409;
    default: return 422;
  }
}

[[noreturn]] void throw_envelope(const std::string& body, int status) {
  protocol::ErrorEnvelope env;
  try {
    env = protocol::decode_error(parse_json(body, "error envelope"));
  } catch (const Error&) {
    throw Error(ErrorCode::kTransport, "HTTP " + std::to_string(status) + " without error envelope",
                {{"status", status}});
  }
  // Internal refinements travel as detail.reason; restore them when present.
  ErrorCode code = env.code;
  if (env.detail.contains("reason") && env.detail["reason"].is_string()) {
    try {
      code = code_from_name(env.detail["reason"].get<std::string>());
    } catch (const Error&) {
    }
  }
  std::string msg = env.detail.value("message", std::string(code_name(code)));
  throw Error(code, msg, env.detail);
}

std::string format_http_date(int64_t epoch) {
  std::time_t t = static_cast<std::time_t>(epoch);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%a, %d %b %Y %H:%M:%S GMT", &tm);
  return buf;
}

std::optional<int64_t> parse_http_date(const std::string& text) {
  std::tm tm{};
  const char* end = strptime(text.c_str(), "%a, %d %b %Y %H:%M:%S GMT", &tm);
  if (!end || *end != '\0') return std::nullopt;
  return static_cast<int64_t>(timegm(&tm));
}

namespace {

bool valid_endpoint(const std::string& url) {
  static const std::regex re(R"(^https?://[A-Za-z0-9.\-]+(:[0-9]{1,5})?(/[^\s]*)?$)");
  return std::regex_match(url, re);
}

// Splits "http://host:port/path" into scheme+authority and path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

// --- allocation json ----------------------------------------------------------------

json to_json(const Allocation& a) {
  json j{{"segment", to_json(a.segment)},
         {"state", a.state == AllocationState::kHeld ? "held" : "committed"},
         {"delta_id", a.delta_id}};
  if (a.hold_expires_at) j["hold_expires_at"] = *a.hold_expires_at;
  return j;
}

Allocation allocation_from_json(const json& j) {
  ObjectReader r(j, "allocation");
  Allocation a;
  a.segment = segment_from_json(r.raw("segment"));
  std::string state = r.required<std::string>("state");
  if (state != "held" && state != "committed") {
    throw Error(ErrorCode::kMalformedDocument, "allocation state must be held|committed");
  }
  a.state = state == "held" ? AllocationState::kHeld : AllocationState::kCommitted;
  a.delta_id = r.required<std::string>("delta_id");
  a.hold_expires_at = r.optional<int64_t>("hold_expires_at");
  r.finish();
  return a;
}

// --- client ---------------------------------------------------------------------------

HttpRmClient::HttpRmClient(std::string domain_id, std::string base_url, std::string token,
                           std::string callback_endpoint)
    : domain_id_(std::move(domain_id)),
      base_url_(std::move(base_url)),
      token_(std::move(token)),
      callback_endpoint_(std::move(callback_endpoint)) {}

HttpRmClient::~HttpRmClient() = default;

ModelReply HttpRmClient::get_model(std::optional<int64_t> ims) {
  auto cli = make_client(base_url_, token_);
  httplib::Headers headers;
  if (ims) headers.emplace("If-Modified-Since", format_http_date(*ims));
  auto r = cli->Get("/sense-rm/v1/models", headers);
  if (!r) {
    throw Error(ErrorCode::kTransport, "model pull from " + domain_id_ + ": " + httplib::to_string(r.error()),
                {{"domain", domain_id_}});
  }
  ModelReply reply;
  if (auto lm = parse_http_date(r->get_header_value("Last-Modified"))) reply.last_modified = *lm;
  if (r->has_header("X-Model-Version")) reply.version = std::stoll(r->get_header_value("X-Model-Version"));
  if (r->status == 304) return reply;
  if (r->status >= 400) throw_envelope(r->body, r->status);
  reply.model = parse_model(r->body);
  reply.version = reply.model->version;
  return reply;
}

protocol::PropagateResponse HttpRmClient::propagate(const ModelDelta& d) {
  auto cli = make_client(base_url_, token_);
  auto r = cli->Post("/sense-rm/v1/deltas", serialize_delta(d), "application/json");
  return protocol::decode_propagate_response(expect_json(r, "propagate to " + domain_id_));
}

protocol::DeltaStatusDoc HttpRmClient::commit(const std::string& id) {
  auto cli = make_client(base_url_, token_);
  auto r = cli->Put("/sense-rm/v1/deltas/" + id + "/actions/commit", "", "application/json");
  return protocol::decode_delta_status(expect_json(r, "commit at " + domain_id_));
}

protocol::DeltaStatusDoc HttpRmClient::status(const std::string& id) {
  auto cli = make_client(base_url_, token_);
  auto r = cli->Get("/sense-rm/v1/deltas/" + id);
  return protocol::decode_delta_status(expect_json(r, "status at " + domain_id_));
}

std::string HttpRmClient::subscribe(NotificationSink) {
  if (callback_endpoint_.empty()) {
    throw Error(ErrorCode::kMalformedEndpoint, "no callback endpoint configured for " + domain_id_);
  }
  auto cli = make_client(base_url_, token_);
  auto body = protocol::encode(protocol::SubscriptionRequest{callback_endpoint_}).dump();
  auto r = cli->Post("/sense-rm/v1/subscriptions", body, "application/json");
  return protocol::decode_subscription_response(expect_json(r, "subscribe at " + domain_id_)).subscription_id;
}

std::vector<Allocation> HttpRmClient::allocations() {
  auto cli = make_client(base_url_, token_);
  json j = expect_json(cli->Get("/sense-rm/v1/allocations"), "allocations at " + domain_id_);
  std::vector<Allocation> out;
  for (const auto& a : j) out.push_back(allocation_from_json(a));
  return out;
}

// --- server ----------------------------------------------------------------------------

RmServer::RmServer(std::shared_ptr<ResourceManager> rm)
    : rm_(std::move(rm)), server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  std::string token = rm_->config().token;
  s.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    if (token.empty() || req.get_header_value("Authorization") == "Bearer " + token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    send_json(res, 401,
              protocol::encode(protocol::ErrorEnvelope{ErrorCode::kBadState, {{"reason", "unauthorized"}}}));
    return httplib::Server::HandlerResponse::Handled;
  });

  s.Get("/sense-rm/v1/models", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<int64_t> ims;
      if (req.has_header("If-Modified-Since")) ims = parse_http_date(req.get_header_value("If-Modified-Since"));
      ModelReply reply = rm_->get_model(ims);
      res.set_header("Last-Modified", format_http_date(reply.last_modified));
      res.set_header("X-Model-Version", std::to_string(reply.version));
      if (!reply.model) {
        res.status = 304;
        return;
      }
      res.status = 200;
      res.set_content(serialize_model(*reply.model), "application/json");
    });
  });

  s.Post("/sense-rm/v1/deltas", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ModelDelta d = parse_delta(req.body);
      auto reply = rm_->propagate(d);
      send_json(res, reply.accepted ? 201 : 200, protocol::encode(reply));
    });
  });

  s.Put("/sense-rm/v1/deltas/:id/actions/commit", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 202, protocol::encode(rm_->commit(req.path_params.at("id")))); });
  });

  s.Get("/sense-rm/v1/deltas/:id", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, protocol::encode(rm_->status(req.path_params.at("id")))); });
  });

  s.Post("/sense-rm/v1/subscriptions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto sub = protocol::decode_subscription_request(parse_json(req.body, "subscription"));
      if (!valid_endpoint(sub.endpoint)) {
        throw Error(ErrorCode::kMalformedEndpoint, "bad callback endpoint '" + sub.endpoint + "'",
                    {{"endpoint", sub.endpoint}});
      }
      auto [base, path] = split_url(sub.endpoint);
      std::string domain = rm_->domain_id();
      // At-least-once: a few retries, then give up and let the poller catch up.
      auto sink = [base = base, path = path, domain](const protocol::NotificationEvent& ev) {
        std::string body = protocol::encode(ev).dump();
        for (int attempt = 0; attempt < 3; ++attempt) {
          httplib::Client cli(base);
          cli.set_connection_timeout(2);
          auto r = cli.Post(path, body, "application/json");
          if (r && r->status < 300) return;
          std::this_thread::sleep_for(std::chrono::milliseconds(50 << attempt));
        }
        spdlog::warn("rm {}: callback to {}{} undeliverable", domain, base, path);
      };
      std::string id = rm_->subscribe(sink);
      send_json(res, 201, protocol::encode(protocol::SubscriptionResponse{id}));
    });
  });

  s.Delete("/sense-rm/v1/subscriptions/:id", [this](const httplib::Request& req, httplib::Response& res) {
    rm_->unsubscribe(req.path_params.at("id"));
    res.status = 204;
  });

  s.Get("/sense-rm/v1/allocations", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json out = json::array();
      for (const auto& a : rm_->allocations()) out.push_back(to_json(a));
      send_json(res, 200, out);
    });
  });
}

RmServer::~RmServer() { stop(); }

int RmServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) {
    throw Error(ErrorCode::kTransport, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void RmServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string RmServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace sense
