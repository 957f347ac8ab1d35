#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sense/error.hpp"
#include "sense/model.hpp"

// Wire contract shared by the orchestrator NBI, the RM API and their clients.
// Every decoder is strict: unknown fields raise malformed-document.
namespace sense::protocol {

using Label = std::variant<std::string, int64_t>;

struct TerminalDoc {
  std::string uri;
  std::optional<Label> label;
  bool operator==(const TerminalDoc&) const = default;
};

struct BandwidthDoc {
  std::string qos_class;
  std::optional<int64_t> capacity;
  std::optional<std::string> unit;
  bool operator==(const BandwidthDoc&) const = default;
};

// Absolute ISO-8601 instants or relative tokens ("now", "+2d", "+4h").
struct ScheduleDoc {
  std::optional<std::string> start;
  std::optional<std::string> end;
  std::optional<std::string> start_after;
  std::optional<std::string> end_before;
  bool operator==(const ScheduleDoc&) const = default;
};

struct ConnectionDoc {
  std::string name;
  std::vector<TerminalDoc> terminals;
  std::optional<BandwidthDoc> bandwidth;
  std::optional<ScheduleDoc> schedule;
  bool operator==(const ConnectionDoc&) const = default;
};

using DurationDoc = std::variant<int64_t, std::string>;

struct QueryOptionsDoc {
  std::string name;
  std::optional<std::string> start;
  std::optional<std::string> end;
  std::optional<std::string> start_after;
  std::optional<std::string> end_before;
  std::optional<DurationDoc> duration;
  std::optional<int64_t> tbp_mbytes;
  std::optional<int64_t> bandwidth_max;  // "bandwidth-mbps <="
  std::optional<int64_t> bandwidth_min;  // "bandwidth-mbps >="
  std::optional<bool> use_highest_bandwidth;
  std::optional<bool> use_lowest_bandwidth;
  bool operator==(const QueryOptionsDoc&) const = default;
};

struct QueryDoc {
  std::string ask;
  QueryOptionsDoc options;
  bool operator==(const QueryDoc&) const = default;
};

struct IntentDocument {
  std::string service_type;
  std::string service_alias;
  std::vector<ConnectionDoc> connections;
  std::optional<std::vector<QueryDoc>> queries;
  bool operator==(const IntentDocument&) const = default;
};

// Per-connection bandwidth answer ("capacity" + "units").
struct ConnectionAnswerDoc {
  std::string name;
  std::string qos_class;
  int64_t capacity = 0;
  std::string units = "mbps";
  bool operator==(const ConnectionAnswerDoc&) const = default;
};

// maximum-bandwidth answers are keyed "asked" and carry "units"; schedule
// answers (time-block, sliding window, time-bandwidth product) are keyed
// "ask" and carry "unit", "start" and "end".
struct QueryAnswerDoc {
  std::string ask;
  std::string name;
  int64_t bandwidth = 0;
  std::string unit = "mbps";
  std::optional<std::string> start;
  std::optional<std::string> end;
  bool operator==(const QueryAnswerDoc&) const = default;
};

struct QueryResponseDoc {
  std::vector<ConnectionAnswerDoc> connections;
  std::vector<QueryAnswerDoc> queries;
  bool operator==(const QueryResponseDoc&) const = default;
};

struct ErrorEnvelope {
  ErrorCode code = ErrorCode::kMalformedIntent;  // always a wire code
  json detail = json::object();
  bool operator==(const ErrorEnvelope&) const = default;
};

ErrorEnvelope envelope_from(const Error& e);

enum class DeltaStateWire { kPropagated, kCommitting, kCommitted, kFailed, kExpired };
std::string_view to_string(DeltaStateWire s);
DeltaStateWire delta_state_from_string(std::string_view s);
bool is_terminal(DeltaStateWire s);

struct PropagateResponse {
  bool accepted = true;  // false: `delta` is the RM's counter-proposal
  ModelDelta delta;
  std::optional<int64_t> hold_expires_at;
  bool operator==(const PropagateResponse&) const = default;
};

struct DeltaStatusDoc {
  std::string delta_id;
  DeltaStateWire state = DeltaStateWire::kPropagated;
  int64_t received_at = 0;
  std::optional<int64_t> committed_at;
  bool operator==(const DeltaStatusDoc&) const = default;
};

struct SubscriptionRequest {
  std::string endpoint;
  bool operator==(const SubscriptionRequest&) const = default;
};

struct SubscriptionResponse {
  std::string subscription_id;
  bool operator==(const SubscriptionResponse&) const = default;
};

struct NotificationEvent {
  std::string subscription_id;
  std::string domain_id;
  std::string event;  // "delta-state" | "model-version"
  std::optional<std::string> delta_id;
  std::optional<DeltaStateWire> state;
  std::optional<int64_t> version;
  bool operator==(const NotificationEvent&) const = default;
};

// Reply to create / negotiate / reserve / commit / cancel.
struct ServiceResponse {
  std::string instance_id;
  int64_t revision = 0;
  std::string state;
  std::optional<json> design;
  std::optional<QueryResponseDoc> answer;
  std::optional<ErrorEnvelope> error;
  bool operator==(const ServiceResponse&) const = default;
};

// Full status view.
struct ServiceStatus {
  ServiceResponse service;
  std::map<std::string, std::string> rm_states;
  std::map<std::string, std::string> rm_delta_ids;
  std::map<std::string, double> phase_timings_ms;
  std::optional<int64_t> hold_expires_at;
  bool operator==(const ServiceStatus&) const = default;
};

json encode(const IntentDocument& d);
json encode(const QueryResponseDoc& d);
json encode(const ErrorEnvelope& d);
json encode(const PropagateResponse& d);
json encode(const DeltaStatusDoc& d);
json encode(const SubscriptionRequest& d);
json encode(const SubscriptionResponse& d);
json encode(const NotificationEvent& d);
json encode(const ServiceResponse& d);
json encode(const ServiceStatus& d);

IntentDocument decode_intent(const json& j);
QueryResponseDoc decode_query_response(const json& j);
ErrorEnvelope decode_error(const json& j);
PropagateResponse decode_propagate_response(const json& j);
DeltaStatusDoc decode_delta_status(const json& j);
SubscriptionRequest decode_subscription_request(const json& j);
SubscriptionResponse decode_subscription_response(const json& j);
NotificationEvent decode_notification(const json& j);
ServiceResponse decode_service_response(const json& j);
ServiceStatus decode_service_status(const json& j);

// Golden-file text form: two-space indent, sorted keys, trailing newline.
std::string to_pretty(const json& j);

inline constexpr int kConformanceVersion = 1;

// Relative path ("intent/request.json", ...) -> golden bytes.
std::map<std::string, std::string> conformance_vectors();

}  // namespace sense::protocol
