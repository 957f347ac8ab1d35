#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sense/clock.hpp"
#include "sense/orchestrator.hpp"
#include "sense/rm.hpp"

namespace sense::harness {

// Injected RM latencies at paper scale, in seconds.
struct LatencyProfile {
  double model_gen_s = 0;
  double propagate_s = 0;
  double commit_s = 0;
};

struct TopologySpec {
  std::string preset = "custom";
  int transit_domains = 3;
  int endsite_domains = 5;
  int dtns_per_endsite = 1;
  int endsite_uplinks = 1;       // transit attachments per end site
  int extra_transit_links = 0;   // random chords on top of the transit ring
  Mbps capacity = 100000;
  LabelRange labels{{{1000, 1999}}};
  uint64_t seed = 1;
  double latency_scale = 0.1;
  LatencyProfile network{2.0, 11.2, 30.0};
  LatencyProfile dtn{0.5, 0.3, 1.2};
  Verbosity verbosity = Verbosity::kFull;
};

TopologySpec preset_spec(const std::string& name, uint64_t seed = 1);

struct Manifest {
  std::string preset;
  uint64_t seed = 0;
  double latency_scale = 0;
  std::vector<RmConfig> rms;
  std::map<std::string, std::string> roles;  // domain -> network | endsite
  std::map<std::string, std::string> sites;  // short site name -> DTN node URN
  size_t node_count = 0;
  size_t link_count = 0;  // intra-domain links plus inter-domain port pairs

  const RmConfig& rm(const std::string& domain) const;
};

json to_json(const Manifest& m);
Manifest manifest_from_json(const json& j);

// Deterministic for a seed. Throws disconnected-spec when the domain graph
// is not connected, invariant-violation on nonsensical counts.
Manifest gen_topology(const TopologySpec& spec);

// --- fabric ------------------------------------------------------------------------------------

struct FabricOptions {
  bool http = false;
  OrchestratorConfig orchestrator;
  std::shared_ptr<const Clock> clock;  // defaults to the system clock
  bool start = true;
};

// Scales the orchestrator's periods to match the manifest's latency scale.
OrchestratorConfig scaled_config(double latency_scale);

// RM fleet plus orchestrator, in-process or behind real sockets.
class Fabric {
 public:
  Fabric(const Manifest& manifest, FabricOptions options);
  ~Fabric();
  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  const Manifest& manifest() const { return manifest_; }
  std::shared_ptr<Orchestrator> orchestrator() const { return orch_; }
  // In-process or HTTP northbound client, matching the fabric mode.
  OrchestratorApi& api() const { return *api_; }
  std::shared_ptr<ResourceManager> rm(const std::string& domain) const;
  const std::map<std::string, std::shared_ptr<ResourceManager>>& rms() const { return rms_; }
  // Fresh clients for the fleet (HTTP ones in HTTP mode).
  std::vector<std::shared_ptr<RmClient>> clients(const std::string& callback_base = {}) const;
  std::map<std::string, std::string> endpoints() const;
  std::shared_ptr<const Clock> clock() const { return clock_; }
  void stop();

 private:
  Manifest manifest_;
  FabricOptions options_;
  std::shared_ptr<const Clock> clock_;
  std::map<std::string, std::shared_ptr<ResourceManager>> rms_;
  std::map<std::string, std::unique_ptr<RmServer>> servers_;
  std::shared_ptr<Orchestrator> orch_;
  std::unique_ptr<OrchestratorServer> nbi_;
  std::unique_ptr<OrchestratorApi> api_;
};

// --- batches -------------------------------------------------------------------------------

struct IntentTemplate {
  std::string name;
  std::vector<std::string> sites;  // short site names or terminal URNs
  Mbps mbps = 1000;
  std::optional<size_t> expected_span;
};

struct BatchSpec {
  std::vector<IntentTemplate> intents;
  int concurrency = 1;
  int repeat = 1;
};

void validate(const BatchSpec& b);

// The six Table I intents on the baseline8 roster.
BatchSpec table1_batch(Mbps mbps = 1000);
// `count` random intents between end sites; roughly one in five is multipoint.
BatchSpec random_batch(const Manifest& m, size_t count, uint64_t seed, Mbps mbps = 1000);

json intent_for(const IntentTemplate& t, const Manifest& m);

struct ServiceReport {
  std::string name;
  int repeat = 0;
  std::string instance_id;
  std::string state;
  std::vector<std::string> domains;
  std::optional<size_t> expected_span;
  double compute_ms = 0;
  double propagate_ms = 0;
  double commit_ms = 0;
  double wall_ms = 0;
  std::map<std::string, double> propagate_ms_by_rm;
  std::map<std::string, double> commit_ms_by_rm;
  std::optional<protocol::ErrorEnvelope> error;

  size_t rm_span() const { return domains.size(); }
};

struct BatchReport {
  std::string preset;
  uint64_t seed = 0;
  double latency_scale = 0;
  std::vector<ServiceReport> services;
  std::vector<PullCycle> pulls;
};

// Issues each repeat's intents `concurrency` at a time, drives every one to a
// terminal state, then starts the next repeat.
BatchReport run_batch(const BatchSpec& batch, OrchestratorApi& api, const Manifest& m);
// Same, plus the orchestrator's pull history.
BatchReport run_batch(const BatchSpec& batch, Fabric& fabric);

// --- reporting ---------------------------------------------------------------------------------

struct LawCheck {
  std::string service;
  double propagate_expected_ms = 0;  // sum of injected propagate latencies
  double propagate_measured_ms = 0;
  double commit_expected_ms = 0;     // max of injected commit latencies
  double commit_measured_ms = 0;
  bool propagate_ok = false;
  bool commit_ok = false;
};

struct FeedbackCheck {
  double expected_ms = 0;  // slowest model generation plus integration
  double measured_ms = 0;
  bool ok = false;
};

struct ReportSummary {
  std::vector<LawCheck> laws;
  std::vector<FeedbackCheck> feedback;
  std::map<std::string, double> not_modified_ratio;  // per RM
  size_t committed = 0;
  size_t failed = 0;
  size_t span_mismatches = 0;
};

// `commit_slack_ms` allows for the polling penalty.
ReportSummary summarize(const BatchReport& r, const Manifest& m, double tolerance_ms = 1000,
                        double commit_slack_ms = 0);

json to_json(const BatchReport& r);
json to_json(const ReportSummary& s);
std::string services_csv(const BatchReport& r);
std::string rm_csv(const BatchReport& r, const Manifest& m);

// Writes services.{csv,json}, rms.csv, laws.json and optionally graph.json.
std::vector<std::string> write_report(const BatchReport& r, const Manifest& m, const std::string& dir,
                                      const std::string& format, const json* graph = nullptr);

// --- audit ---------------------------------------------------------------------------------------

struct Violation {
  std::string kind;  // overbooked | vlan-conflict | bad-label | unknown-port | orphan | leak | residual-hold
  std::string urn;
  std::string detail;
};

// Calendar invariants for one domain's allocations against its model.
std::vector<Violation> audit_domain(const DomainModel& model, const std::vector<Allocation>& allocations,
                                    double overbook_factor, int64_t now);

struct AuditResult {
  std::vector<Violation> violations;
  size_t allocations = 0;
  size_t committed_services = 0;

  bool ok() const { return violations.empty(); }
};

// Sweeps every RM, then cross-checks the committed services of all
// orchestrators against what the RMs hold.
AuditResult audit(const std::vector<std::shared_ptr<ResourceManager>>& rms,
                  const std::vector<std::shared_ptr<Orchestrator>>& orchestrators);
AuditResult audit(const Fabric& fabric);

json to_json(const AuditResult& a);

// --- conformance corpus --------------------------------------------------------------------------

// 2018-09-01T14:00:00Z, the instant the reference documents were produced at.
inline constexpr int64_t kReferenceNow = 1535810400;
inline constexpr int kReferenceUtcOffset = -240;

// Baseline8 with `committed_mbps` of guaranteed traffic already committed on
// the NERSC DTN port, frozen at the reference instant.
std::unique_ptr<Fabric> reference_fabric(Mbps committed_mbps);

// The paper documents plus intent/response.json as produced by the
// orchestrator on the reference fabric.
std::map<std::string, std::string> conformance_corpus();
std::vector<std::string> write_conformance(const std::string& dir);

}  // namespace sense::harness
