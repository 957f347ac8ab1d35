#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <string>
#include <vector>

#include "sense/calendar.hpp"
#include "sense/clock.hpp"
#include "sense/model.hpp"
#include "sense/protocol.hpp"
#include "sense/timer_queue.hpp"

namespace httplib {
class Server;
}

namespace sense {

struct RmConfig {
  std::string domain_id;
  std::vector<NodeDesc> nodes;
  std::vector<Link> links;
  Verbosity verbosity = Verbosity::kFull;
  double model_gen_latency_ms = 0;
  double propagate_latency_ms = 0;
  double commit_latency_ms = 0;
  int64_t hold_duration = 300;  // seconds
  bool notify_enabled = true;
  double overbook_factor = kDefaultOverbookFactor;
  std::string token;  // bearer token the HTTP server requires; empty disables the check

  bool operator==(const RmConfig&) const = default;
};

json to_json(const RmConfig& c);
RmConfig rm_config_from_json(const json& j);
// Throws invariant-violation on bad latencies / hold duration / topology.
void validate(const RmConfig& c);

struct DeltaRecord {
  ModelDelta delta;
  protocol::DeltaStateWire state = protocol::DeltaStateWire::kPropagated;
  int64_t received_at = 0;
  std::optional<int64_t> committed_at;
  std::optional<int64_t> hold_expires_at;

  protocol::DeltaStatusDoc status() const {
    return {delta.delta_id, state, received_at, committed_at};
  }
};

using NotificationSink = std::function<void(const protocol::NotificationEvent&)>;

struct ModelReply {
  std::optional<DomainModel> model;  // empty means not modified
  int64_t last_modified = 0;         // epoch seconds
  int64_t version = 0;
};

// One emulated domain Resource Manager. Calendar and record mutations are
// serialized under one lock; injected latencies are slept before taking it so
// concurrent callers overlap their waits the way remote RMs would.
class ResourceManager {
 public:
  ResourceManager(RmConfig config, std::shared_ptr<const Clock> clock);
  ~ResourceManager();
  ResourceManager(const ResourceManager&) = delete;
  ResourceManager& operator=(const ResourceManager&) = delete;

  const RmConfig& config() const { return config_; }
  const std::string& domain_id() const { return config_.domain_id; }
  int64_t now() const { return clock_->now(); }

  // Not modified iff nothing changed after `if_modified_since`.
  ModelReply get_model(std::optional<int64_t> if_modified_since);
  // Throws insufficient-bandwidth, vlan-conflict (no alternative), unknown-port,
  // unknown-connection, malformed-intent (wrong target).
  protocol::PropagateResponse propagate(const ModelDelta& delta);
  // Asynchronous: returns the record right after the request is accepted.
  protocol::DeltaStatusDoc commit(const std::string& delta_id);
  protocol::DeltaStatusDoc status(const std::string& delta_id) const;

  std::string subscribe(NotificationSink sink);
  void unsubscribe(const std::string& subscription_id);

  // Expires due holds now (also runs on a background tick).
  void sweep();

  // Audit views.
  std::vector<Allocation> allocations() const;
  std::map<std::string, protocol::DeltaStateWire> delta_states() const;
  int64_t version() const;

  // Test hook: place a committed allocation without admission control.
  void inject_allocation(const ReservationSegment& segment);

 private:
  void sweep_locked(int64_t now);
  void bump_locked();
  void notify(protocol::NotificationEvent event);
  DomainModel build_model_locked() const;
  ReservationCalendar* calendar_for(const Urn& port);
  bool has_connection_locked(const std::string& connection_id) const;

  RmConfig config_;
  std::shared_ptr<const Clock> clock_;

  mutable std::mutex mu_;
  std::map<std::string, ReservationCalendar> calendars_;  // by port URN
  std::map<std::string, DeltaRecord> records_;
  int64_t version_ = 1;
  int64_t last_modified_ = 0;

  std::mutex sub_mu_;
  std::map<std::string, NotificationSink> subscribers_;

  TimerQueue notifier_;
  TimerQueue timers_;
};

json to_json(const Allocation& a);
Allocation allocation_from_json(const json& j);

// Orchestrator-side handle on one RM, local or remote.
class RmClient {
 public:
  virtual ~RmClient() = default;
  virtual const std::string& domain_id() const = 0;
  virtual ModelReply get_model(std::optional<int64_t> if_modified_since) = 0;
  virtual protocol::PropagateResponse propagate(const ModelDelta& delta) = 0;
  virtual protocol::DeltaStatusDoc commit(const std::string& delta_id) = 0;
  virtual protocol::DeltaStatusDoc status(const std::string& delta_id) = 0;
  // Local clients deliver to `sink`; remote ones register the callback
  // endpoint they were built with and deliveries arrive over HTTP.
  virtual std::string subscribe(NotificationSink sink) = 0;
  virtual std::vector<Allocation> allocations() = 0;
};

class LocalRmClient final : public RmClient {
 public:
  explicit LocalRmClient(std::shared_ptr<ResourceManager> rm) : rm_(std::move(rm)) {}

  const std::string& domain_id() const override { return rm_->domain_id(); }
  ModelReply get_model(std::optional<int64_t> ims) override { return rm_->get_model(ims); }
  protocol::PropagateResponse propagate(const ModelDelta& d) override { return rm_->propagate(d); }
  protocol::DeltaStatusDoc commit(const std::string& id) override { return rm_->commit(id); }
  protocol::DeltaStatusDoc status(const std::string& id) override { return rm_->status(id); }
  std::string subscribe(NotificationSink sink) override { return rm_->subscribe(std::move(sink)); }
  std::vector<Allocation> allocations() override { return rm_->allocations(); }

 private:
  std::shared_ptr<ResourceManager> rm_;
};

// HTTP client for the RM API. Errors returned by the RM are rethrown with
// their wire code; socket failures raise transport.
class HttpRmClient final : public RmClient {
 public:
  HttpRmClient(std::string domain_id, std::string base_url, std::string token,
               std::string callback_endpoint = {});
  ~HttpRmClient() override;

  const std::string& domain_id() const override { return domain_id_; }
  ModelReply get_model(std::optional<int64_t> ims) override;
  protocol::PropagateResponse propagate(const ModelDelta& d) override;
  protocol::DeltaStatusDoc commit(const std::string& id) override;
  protocol::DeltaStatusDoc status(const std::string& id) override;
  std::string subscribe(NotificationSink sink) override;
  std::vector<Allocation> allocations() override;

 private:
  std::string domain_id_;
  std::string base_url_;
  std::string token_;
  std::string callback_endpoint_;
};

// HTTP front end for one ResourceManager.
class RmServer {
 public:
  explicit RmServer(std::shared_ptr<ResourceManager> rm);
  ~RmServer();

  // Binds to host:port (port 0 picks a free one) and serves on a background
  // thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  std::string url() const;

 private:
  std::shared_ptr<ResourceManager> rm_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

// HTTP status for an error code.
int http_status_for(ErrorCode code);
// Rebuilds an Error from an error-envelope response body.
[[noreturn]] void throw_envelope(const std::string& body, int status);

std::string format_http_date(int64_t epoch);
std::optional<int64_t> parse_http_date(const std::string& text);

}  // namespace sense
