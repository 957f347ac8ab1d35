#include "sense/protocol.hpp"

#include "sense/json_util.hpp"

namespace sense::protocol {

namespace {

template <typename T>
void put(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

const json& array_of(ObjectReader& r, const std::string& key) {
  const json& v = r.raw(key);
  if (!v.is_array()) throw Error(ErrorCode::kMalformedDocument, "'" + key + "' must be an array");
  return v;
}

json encode_label(const Label& l) {
  return std::visit([](const auto& v) { return json(v); }, l);
}

Label decode_label(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.get<int64_t>();
  throw Error(ErrorCode::kMalformedDocument, "terminal label must be a string or integer");
}

json encode(const ConnectionDoc& c) {
  json terminals = json::array();
  for (const auto& t : c.terminals) {
    json tj{{"uri", t.uri}};
    if (t.label) tj["label"] = encode_label(*t.label);
    terminals.push_back(std::move(tj));
  }
  json j{{"name", c.name}, {"terminals", terminals}};
  if (c.bandwidth) {
    json b{{"qos_class", c.bandwidth->qos_class}};
    put(b, "capacity", c.bandwidth->capacity);
    put(b, "unit", c.bandwidth->unit);
    j["bandwidth"] = b;
  }
  if (c.schedule) {
    json s = json::object();
    put(s, "start", c.schedule->start);
    put(s, "end", c.schedule->end);
    put(s, "start-after", c.schedule->start_after);
    put(s, "end-before", c.schedule->end_before);
    j["schedule"] = s;
  }
  return j;
}

ConnectionDoc decode_connection(const json& j) {
  ObjectReader r(j, "connection");
  ConnectionDoc c;
  c.name = r.required<std::string>("name");
  for (const auto& tj : array_of(r, "terminals")) {
    ObjectReader tr(tj, "terminal");
    TerminalDoc t;
    t.uri = tr.required<std::string>("uri");
    if (const json* l = tr.raw_optional("label")) t.label = decode_label(*l);
    tr.finish();
    c.terminals.push_back(std::move(t));
  }
  if (const json* bj = r.raw_optional("bandwidth")) {
    ObjectReader br(*bj, "bandwidth");
    BandwidthDoc b;
    b.qos_class = br.required<std::string>("qos_class");
    b.capacity = br.optional<int64_t>("capacity");
    b.unit = br.optional<std::string>("unit");
    br.finish();
    c.bandwidth = b;
  }
  if (const json* sj = r.raw_optional("schedule")) {
    ObjectReader sr(*sj, "schedule");
    ScheduleDoc s;
    s.start = sr.optional<std::string>("start");
    s.end = sr.optional<std::string>("end");
    s.start_after = sr.optional<std::string>("start-after");
    s.end_before = sr.optional<std::string>("end-before");
    sr.finish();
    c.schedule = s;
  }
  r.finish();
  return c;
}

json encode(const QueryDoc& q) {
  const auto& o = q.options;
  json opts{{"name", o.name}};
  put(opts, "start", o.start);
  put(opts, "end", o.end);
  put(opts, "start-after", o.start_after);
  put(opts, "end-before", o.end_before);
  if (o.duration) opts["duration"] = std::visit([](const auto& v) { return json(v); }, *o.duration);
  put(opts, "tbp-mbytes", o.tbp_mbytes);
  put(opts, "bandwidth-mbps <=", o.bandwidth_max);
  put(opts, "bandwidth-mbps >=", o.bandwidth_min);
  put(opts, "use-highest-bandwidth", o.use_highest_bandwidth);
  put(opts, "use-lowest-bandwidth", o.use_lowest_bandwidth);
  return json{{"ask", q.ask}, {"options", opts}};
}

QueryDoc decode_query(const json& j) {
  ObjectReader r(j, "query");
  QueryDoc q;
  q.ask = r.required<std::string>("ask");
  ObjectReader o(r.raw("options"), "options");
  q.options.name = o.required<std::string>("name");
  q.options.start = o.optional<std::string>("start");
  q.options.end = o.optional<std::string>("end");
  q.options.start_after = o.optional<std::string>("start-after");
  q.options.end_before = o.optional<std::string>("end-before");
  if (const json* d = o.raw_optional("duration")) {
    if (d->is_number_integer()) {
      q.options.duration = d->get<int64_t>();
    } else if (d->is_string()) {
      q.options.duration = d->get<std::string>();
    } else {
      throw Error(ErrorCode::kMalformedDocument, "duration must be seconds or '<n>h'");
    }
  }
  q.options.tbp_mbytes = o.optional<int64_t>("tbp-mbytes");
  q.options.bandwidth_max = o.optional<int64_t>("bandwidth-mbps <=");
  q.options.bandwidth_min = o.optional<int64_t>("bandwidth-mbps >=");
  q.options.use_highest_bandwidth = o.optional<bool>("use-highest-bandwidth");
  q.options.use_lowest_bandwidth = o.optional<bool>("use-lowest-bandwidth");
  o.finish();
  r.finish();
  return q;
}

json encode(const QueryAnswerDoc& a) {
  if (a.ask == "maximum-bandwidth") {
    return json{{"asked", a.ask},
                {"options", {{"name", a.name}, {"bandwidth", a.bandwidth}, {"units", a.unit}}}};
  }
  json opts{{"name", a.name}, {"bandwidth", a.bandwidth}, {"unit", a.unit}};
  put(opts, "start", a.start);
  put(opts, "end", a.end);
  return json{{"ask", a.ask}, {"options", opts}};
}

QueryAnswerDoc decode_answer(const json& j) {
  ObjectReader r(j, "query answer");
  QueryAnswerDoc a;
  bool max_bw = r.has("asked");
  a.ask = r.required<std::string>(max_bw ? "asked" : "ask");
  if (max_bw != (a.ask == "maximum-bandwidth")) {
    throw Error(ErrorCode::kMalformedDocument,
                "maximum-bandwidth answers use 'asked'; schedule answers use 'ask'");
  }
  ObjectReader o(r.raw("options"), "answer options");
  a.name = o.required<std::string>("name");
  a.bandwidth = o.required<int64_t>("bandwidth");
  a.unit = o.required<std::string>(max_bw ? "units" : "unit");
  if (!max_bw) {
    a.start = o.optional<std::string>("start");
    a.end = o.optional<std::string>("end");
  }
  o.finish();
  r.finish();
  return a;
}

json encode_delta_state(DeltaStateWire s) { return std::string(to_string(s)); }

}  // namespace

// --- error envelope / states ---------------------------------------------------

ErrorEnvelope envelope_from(const Error& e) {
  json detail = e.detail().is_object() ? e.detail() : json{{"value", e.detail()}};
  if (!is_wire_code(e.code())) detail["reason"] = std::string(code_name(e.code()));
  if (!detail.contains("message")) detail["message"] = e.what();
  return ErrorEnvelope{wire_code(e.code()), detail};
}

std::string_view to_string(DeltaStateWire s) {
  switch (s) {
    case DeltaStateWire::kPropagated: return "propagated";
    case DeltaStateWire::kCommitting: return "committing";
    case DeltaStateWire::kCommitted: return "committed";
    case DeltaStateWire::kFailed: return "failed";
    case DeltaStateWire::kExpired: return "expired";
  }
  return "";
}

DeltaStateWire delta_state_from_string(std::string_view s) {
  for (auto st : {DeltaStateWire::kPropagated, DeltaStateWire::kCommitting,
                  DeltaStateWire::kCommitted, DeltaStateWire::kFailed, DeltaStateWire::kExpired}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::kMalformedDocument, "unknown delta state '" + std::string(s) + "'");
}

bool is_terminal(DeltaStateWire s) {
  return s == DeltaStateWire::kCommitted || s == DeltaStateWire::kFailed ||
         s == DeltaStateWire::kExpired;
}

// --- intent ---------------------------------------------------------------------

json encode(const IntentDocument& d) {
  json conns = json::array();
  for (const auto& c : d.connections) conns.push_back(encode(c));
  json j{{"service_type", d.service_type}, {"service_alias", d.service_alias}, {"connections", conns}};
  if (d.queries) {
    json qs = json::array();
    for (const auto& q : *d.queries) qs.push_back(encode(q));
    j["queries"] = qs;
  }
  return j;
}

IntentDocument decode_intent(const json& j) {
  ObjectReader r(j, "intent");
  IntentDocument d;
  d.service_type = r.required<std::string>("service_type");
  d.service_alias = r.required<std::string>("service_alias");
  for (const auto& c : array_of(r, "connections")) d.connections.push_back(decode_connection(c));
  if (r.has("queries")) {
    std::vector<QueryDoc> qs;
    for (const auto& q : array_of(r, "queries")) qs.push_back(decode_query(q));
    d.queries = std::move(qs);
  }
  r.finish();
  return d;
}

// --- query responses ---------------------------------------------------------------

json encode(const QueryResponseDoc& d) {
  json j = json::object();
  if (!d.connections.empty()) {
    json conns = json::array();
    for (const auto& c : d.connections) {
      conns.push_back({{"name", c.name},
                       {"bandwidth",
                        {{"qos_class", c.qos_class}, {"capacity", c.capacity}, {"units", c.units}}}});
    }
    j["connections"] = conns;
  }
  json qs = json::array();
  for (const auto& a : d.queries) qs.push_back(encode(a));
  j["queries"] = qs;
  return j;
}

QueryResponseDoc decode_query_response(const json& j) {
  ObjectReader r(j, "query response");
  QueryResponseDoc d;
  if (r.has("connections")) {
    for (const auto& cj : array_of(r, "connections")) {
      ObjectReader cr(cj, "connection answer");
      ConnectionAnswerDoc c;
      c.name = cr.required<std::string>("name");
      ObjectReader br(cr.raw("bandwidth"), "bandwidth answer");
      c.qos_class = br.required<std::string>("qos_class");
      c.capacity = br.required<int64_t>("capacity");
      c.units = br.required<std::string>("units");
      br.finish();
      cr.finish();
      d.connections.push_back(std::move(c));
    }
  }
  for (const auto& q : array_of(r, "queries")) d.queries.push_back(decode_answer(q));
  r.finish();
  return d;
}

// --- error --------------------------------------------------------------------------

json encode(const ErrorEnvelope& d) {
  return json{{"code", std::string(code_name(d.code))}, {"detail", d.detail}};
}

ErrorEnvelope decode_error(const json& j) {
  ObjectReader r(j, "error");
  ErrorEnvelope e;
  e.code = code_from_name(r.required<std::string>("code"));
  if (!is_wire_code(e.code)) {
    throw Error(ErrorCode::kMalformedDocument, "error code is not a wire code");
  }
  e.detail = r.raw("detail");
  if (!e.detail.is_object()) throw Error(ErrorCode::kMalformedDocument, "error detail must be an object");
  r.finish();
  return e;
}

// --- RM envelopes ---------------------------------------------------------------------

json encode(const PropagateResponse& d) {
  json j{{"status", d.accepted ? "accepted" : "modified"}, {"delta", to_json(d.delta)}};
  put(j, "hold_expires_at", d.hold_expires_at);
  return j;
}

PropagateResponse decode_propagate_response(const json& j) {
  ObjectReader r(j, "propagate response");
  PropagateResponse d;
  std::string status = r.required<std::string>("status");
  if (status != "accepted" && status != "modified") {
    throw Error(ErrorCode::kMalformedDocument, "propagate status must be accepted|modified");
  }
  d.accepted = status == "accepted";
  d.delta = delta_from_json(r.raw("delta"));
  d.hold_expires_at = r.optional<int64_t>("hold_expires_at");
  r.finish();
  return d;
}

json encode(const DeltaStatusDoc& d) {
  json j{{"delta_id", d.delta_id}, {"state", encode_delta_state(d.state)}, {"received_at", d.received_at}};
  put(j, "committed_at", d.committed_at);
  return j;
}

DeltaStatusDoc decode_delta_status(const json& j) {
  ObjectReader r(j, "delta status");
  DeltaStatusDoc d;
  d.delta_id = r.required<std::string>("delta_id");
  d.state = delta_state_from_string(r.required<std::string>("state"));
  d.received_at = r.required<int64_t>("received_at");
  d.committed_at = r.optional<int64_t>("committed_at");
  r.finish();
  return d;
}

json encode(const SubscriptionRequest& d) { return json{{"endpoint", d.endpoint}}; }

SubscriptionRequest decode_subscription_request(const json& j) {
  ObjectReader r(j, "subscription request");
  SubscriptionRequest d{r.required<std::string>("endpoint")};
  r.finish();
  return d;
}

json encode(const SubscriptionResponse& d) { return json{{"subscription_id", d.subscription_id}}; }

SubscriptionResponse decode_subscription_response(const json& j) {
  ObjectReader r(j, "subscription response");
  SubscriptionResponse d{r.required<std::string>("subscription_id")};
  r.finish();
  return d;
}

json encode(const NotificationEvent& d) {
  json j{{"subscription_id", d.subscription_id}, {"domain_id", d.domain_id}, {"event", d.event}};
  put(j, "delta_id", d.delta_id);
  if (d.state) j["state"] = encode_delta_state(*d.state);
  put(j, "version", d.version);
  return j;
}

NotificationEvent decode_notification(const json& j) {
  ObjectReader r(j, "notification");
  NotificationEvent d;
  d.subscription_id = r.required<std::string>("subscription_id");
  d.domain_id = r.required<std::string>("domain_id");
  d.event = r.required<std::string>("event");
  if (d.event != "delta-state" && d.event != "model-version") {
    throw Error(ErrorCode::kMalformedDocument, "unknown notification event '" + d.event + "'");
  }
  d.delta_id = r.optional<std::string>("delta_id");
  if (auto s = r.optional<std::string>("state")) d.state = delta_state_from_string(*s);
  d.version = r.optional<int64_t>("version");
  r.finish();
  return d;
}

// --- NBI envelopes ------------------------------------------------------------------------

json encode(const ServiceResponse& d) {
  json j{{"instance_id", d.instance_id}, {"revision", d.revision}, {"state", d.state}};
  if (d.design) j["design"] = *d.design;
  if (d.answer) j["answer"] = encode(*d.answer);
  if (d.error) j["error"] = encode(*d.error);
  return j;
}

namespace {

ServiceResponse read_service_fields(ObjectReader& r) {
  ServiceResponse d;
  d.instance_id = r.required<std::string>("instance_id");
  d.revision = r.required<int64_t>("revision");
  d.state = r.required<std::string>("state");
  if (const json* design = r.raw_optional("design")) {
    if (!design->is_object()) throw Error(ErrorCode::kMalformedDocument, "design must be an object");
    d.design = *design;
  }
  if (const json* a = r.raw_optional("answer")) d.answer = decode_query_response(*a);
  if (const json* e = r.raw_optional("error")) d.error = decode_error(*e);
  return d;
}

}  // namespace

ServiceResponse decode_service_response(const json& j) {
  ObjectReader r(j, "service response");
  ServiceResponse d = read_service_fields(r);
  r.finish();
  return d;
}

json encode(const ServiceStatus& d) {
  json j = encode(d.service);
  j["rm_states"] = d.rm_states;
  j["rm_delta_ids"] = d.rm_delta_ids;
  j["phase_timings_ms"] = d.phase_timings_ms;
  put(j, "hold_expires_at", d.hold_expires_at);
  return j;
}

ServiceStatus decode_service_status(const json& j) {
  ObjectReader r(j, "service status");
  ServiceStatus d;
  d.service = read_service_fields(r);
  auto read_map = [&](const std::string& key, auto& out) {
    const json& m = r.raw(key);
    if (!m.is_object()) throw Error(ErrorCode::kMalformedDocument, "'" + key + "' must be an object");
    try {
      m.get_to(out);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedDocument, key + ": " + e.what());
    }
  };
  read_map("rm_states", d.rm_states);
  read_map("rm_delta_ids", d.rm_delta_ids);
  read_map("phase_timings_ms", d.phase_timings_ms);
  d.hold_expires_at = r.optional<int64_t>("hold_expires_at");
  r.finish();
  return d;
}

std::string to_pretty(const json& j) { return j.dump(2) + "\n"; }

// --- conformance corpus -----------------------------------------------------------------------

std::map<std::string, std::string> conformance_vectors() {
  const std::string nersc = "urn:ogf:network:nersc.gov:2013:server+dtm11.nersc.gov";
  const std::string caltech = "urn:ogf:network:caltech.edu:2013:server+xfer-2.ultralight.org";

  ConnectionDoc conn;
  conn.name = "connection 1";
  conn.terminals = {{nersc, Label{std::string("any")}}, {caltech, Label{std::string("any")}}};
  conn.bandwidth = BandwidthDoc{"guaranteedCapped", 10, "gbps"};
  IntentDocument intent{"Multi-Path P2P VLAN", "sc18-p2p-b1", {conn}, std::nullopt};

  IntentDocument query = intent;
  query.connections[0].bandwidth = BandwidthDoc{"guaranteedCapped", std::nullopt, std::nullopt};
  QueryDoc max_bw;
  max_bw.ask = "maximum-bandwidth";
  max_bw.options.name = "connection 1";
  query.queries = std::vector<QueryDoc>{max_bw};

  QueryResponseDoc query_resp;
  query_resp.connections = {ConnectionAnswerDoc{"connection 1", "guaranteedCapped", 10000, "mbps"}};
  query_resp.queries = {QueryAnswerDoc{"maximum-bandwidth", "connection 1", 100000, "mbps", {}, {}}};

  IntentDocument tbp = query;
  QueryDoc tbp_q;
  tbp_q.ask = "time-bandwidth-product";
  tbp_q.options.name = "connection 1";
  tbp_q.options.tbp_mbytes = 1000000;
  tbp_q.options.start_after = "now";
  tbp_q.options.end_before = "+2d";
  tbp_q.options.bandwidth_max = 10000;
  tbp_q.options.bandwidth_min = 2000;
  tbp.queries = std::vector<QueryDoc>{tbp_q};

  QueryResponseDoc tbp_resp;
  tbp_resp.queries = {QueryAnswerDoc{"time-bandwidth-product", "connection 1", 5000, "mbps",
                                     "2018-09-01T10:00:00.000-0400",
                                     "2018-09-01T10:26:40.000-0400"}};

  return {
      {"intent/request.json", to_pretty(encode(intent))},
      {"query/request.json", to_pretty(encode(query))},
      {"query/response.json", to_pretty(encode(query_resp))},
      {"tbp/request.json", to_pretty(encode(tbp))},
      {"tbp/response.json", to_pretty(encode(tbp_resp))},
  };
}

}  // namespace sense::protocol
