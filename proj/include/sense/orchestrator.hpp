#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sense/clock.hpp"
#include "sense/compute.hpp"
#include "sense/protocol.hpp"
#include "sense/rm.hpp"
#include "sense/topology.hpp"

namespace httplib {
class Server;
}

namespace sense {

enum class ServiceState {
  kCreated,
  kComputed,
  kComputeFailed,
  kPropagating,
  kReserved,
  kCommitting,
  kCommitted,
  kFailed,
  kExpired,
  kCancelled,
};
std::string_view to_string(ServiceState s);
ServiceState service_state_from_string(std::string_view s);
bool is_terminal(ServiceState s);

struct RetryPolicy {
  double base_ms = 1000;
  double factor = 2;
  double cap_ms = 60000;
  int attempts = 10;
};

struct OrchestratorConfig {
  double pull_period_s = 30;
  double poll_interval_s = 5;
  int max_negotiation_rounds = 5;
  double commit_guard_s = 2;
  double commit_timeout_s = 600;
  bool use_notify = true;
  bool pull_loop = true;
  int max_requests_per_rm = 8;
  int64_t default_duration = kDefaultDuration;
  int wire_utc_offset_minutes = 0;
  double overbook_factor = kDefaultOverbookFactor;
  RetryPolicy rollback;
  std::string journal_path;               // empty disables persistence
  std::optional<std::string> id_seed;     // deterministic instance ids
};

struct ServiceInstance {
  std::string instance_id;
  int64_t revision = 0;
  ServiceState state = ServiceState::kCreated;
  json intent_doc;
  std::optional<ServiceDesign> design;
  std::optional<protocol::QueryResponseDoc> answer;
  std::optional<protocol::ErrorEnvelope> error;
  std::map<std::string, std::string> rm_states;     // domain -> delta state
  std::map<std::string, std::string> rm_delta_ids;  // domain -> delta id
  std::map<std::string, double> phase_timings_ms;
  std::optional<int64_t> hold_expires_at;
  int negotiation_rounds = 0;  // intent revisions plus counter-proposal rounds
  int64_t computed_at = 0;      // "now" the intent was resolved against

  protocol::ServiceResponse response() const;
  protocol::ServiceStatus status() const;
};

json to_json(const ServiceInstance& s);
ServiceInstance service_from_json(const json& j);

struct PullRecord {
  std::string domain_id;
  bool modified = false;
  bool reachable = true;
  double elapsed_ms = 0;
  int64_t version = 0;
};

struct PullCycle {
  std::vector<PullRecord> rms;
  bool integrated = false;
  double integrate_ms = 0;
  double feedback_ms = 0;  // slowest RM plus integration
};

// Northbound operations, served in-process or over HTTP.
class OrchestratorApi {
 public:
  virtual ~OrchestratorApi() = default;
  virtual protocol::ServiceResponse create(const json& intent) = 0;
  virtual protocol::ServiceResponse negotiate(const std::string& id, const json& intent) = 0;
  virtual protocol::ServiceResponse reserve(const std::string& id) = 0;
  virtual protocol::ServiceResponse commit(const std::string& id, bool async) = 0;
  virtual protocol::ServiceResponse cancel(const std::string& id) = 0;
  virtual protocol::ServiceStatus status(const std::string& id) = 0;
};

class Orchestrator final : public OrchestratorApi {
 public:
  // Replays the journal when one exists; throws corrupt-journal on a bad record.
  Orchestrator(OrchestratorConfig config, std::vector<std::shared_ptr<RmClient>> rms,
               std::shared_ptr<const Clock> clock);
  ~Orchestrator() override;
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  // First pull, notification subscriptions, pull loop, and re-polling of any
  // commit that was in flight when the journal was written.
  void start();
  void stop();

  PullCycle pull_once();
  std::vector<PullCycle> pull_history() const;
  std::shared_ptr<const UnionModel> union_model() const;
  // Seconds since each domain's model was last refreshed.
  std::map<std::string, int64_t> staleness() const;

  protocol::ServiceResponse create(const json& intent) override;
  protocol::ServiceResponse negotiate(const std::string& id, const json& intent) override;
  protocol::ServiceResponse reserve(const std::string& id) override;
  protocol::ServiceResponse commit(const std::string& id, bool async) override;
  protocol::ServiceResponse cancel(const std::string& id) override;
  protocol::ServiceStatus status(const std::string& id) override;

  void handle_notification(const protocol::NotificationEvent& event);

  std::vector<std::string> instance_ids() const;
  std::optional<ServiceInstance> snapshot(const std::string& id) const;
  // Blocks until the instance leaves committing (or the timeout passes).
  bool wait_settled(const std::string& id, double timeout_s);
  const OrchestratorConfig& config() const { return config_; }

 private:
  struct Entry {
    std::mutex op;  // serializes lifecycle operations on one instance
    ServiceInstance data;
  };
  struct DomainState {
    std::shared_ptr<RmClient> client;
    std::optional<DomainModel> model;
    int64_t last_modified = 0;
    int64_t refreshed_at = 0;
    bool stale = false;
  };

  std::shared_ptr<Entry> entry(const std::string& id) const;
  std::string next_id();
  std::shared_ptr<const UnionModel> current_union();
  void evaluate(ServiceInstance& s, const json& doc, int64_t now);
  void persist(const ServiceInstance& s);
  void load_journal();
  void update(Entry& e, const std::function<void(ServiceInstance&)>& f);

  // Segments of every other instance that holds or may hold resources.
  std::vector<ReservationSegment> in_flight(const std::string& except) const;
  void run_commit(const std::shared_ptr<Entry>& e);
  void release(const std::string& key, const std::map<std::string, std::vector<std::string>>& by_domain);
  bool release_domain(const std::string& key, const std::string& domain,
                      const std::vector<std::string>& connections);
  std::map<std::string, std::vector<std::string>> held_connections(const ServiceInstance& s,
                                                                   bool include_committed) const;
  RmClient& client(const std::string& domain) const;
  std::string wait_delta(const std::string& domain, const std::string& delta_id, double timeout_s);

  OrchestratorConfig config_;
  std::shared_ptr<const Clock> clock_;

  mutable std::mutex union_mu_;
  std::map<std::string, DomainState> domains_;
  std::shared_ptr<const UnionModel> union_;
  std::vector<PullCycle> pulls_;
  std::mutex pull_op_mu_;
  std::mutex plan_mu_;

  mutable std::mutex data_mu_;
  std::condition_variable data_cv_;
  std::map<std::string, std::shared_ptr<Entry>> instances_;
  std::map<std::string, std::pair<std::string, std::string>> delta_owner_;  // delta -> (instance, domain)
  uint64_t id_counter_ = 0;

  std::mutex journal_mu_;
  std::ofstream journal_;

  std::atomic<bool> running_{false};
  std::mutex loop_mu_;
  std::condition_variable loop_cv_;
  std::thread pull_thread_;
  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
};

// NBI HTTP front end, including the RM callback receiver.
class OrchestratorServer {
 public:
  explicit OrchestratorServer(std::shared_ptr<Orchestrator> orch);
  ~OrchestratorServer();
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();
  std::string url() const;

 private:
  std::shared_ptr<Orchestrator> orch_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

class HttpOrchestratorClient final : public OrchestratorApi {
 public:
  explicit HttpOrchestratorClient(std::string base_url) : base_url_(std::move(base_url)) {}
  protocol::ServiceResponse create(const json& intent) override;
  protocol::ServiceResponse negotiate(const std::string& id, const json& intent) override;
  protocol::ServiceResponse reserve(const std::string& id) override;
  protocol::ServiceResponse commit(const std::string& id, bool async) override;
  protocol::ServiceResponse cancel(const std::string& id) override;
  protocol::ServiceStatus status(const std::string& id) override;
  json union_graph();

 private:
  std::string base_url_;
};

}  // namespace sense
