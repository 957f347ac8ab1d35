#include <doctest.h>

#include "sense/error.hpp"
#include "sense/protocol.hpp"
#include "sense/wire_time.hpp"

using namespace sense;
using namespace sense::protocol;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kMalformedIntent;
}

json sample_intent() {
  return json::parse(conformance_vectors().at("tbp/request.json"));
}

}  // namespace

TEST_CASE("golden vectors decode and re-encode byte for byte") {
  auto vectors = conformance_vectors();
  CHECK(vectors.size() == 5);
  for (const auto& [name, text] : vectors) {
    CAPTURE(name);
    CHECK(text.back() == '\n');
    json j = json::parse(text);
    std::string again;
    if (name.ends_with("request.json")) {
      again = to_pretty(encode(decode_intent(j)));
    } else {
      again = to_pretty(encode(decode_query_response(j)));
    }
    CHECK(again == text);
  }
}

TEST_CASE("reference query answers") {
  auto q = decode_query_response(json::parse(conformance_vectors().at("query/response.json")));
  REQUIRE(q.queries.size() == 1);
  CHECK(q.queries[0].bandwidth == 100000);
  CHECK(q.connections[0].capacity == 10000);
  auto t = decode_query_response(json::parse(conformance_vectors().at("tbp/response.json")));
  REQUIRE(t.queries.size() == 1);
  const auto& a = t.queries[0];
  CHECK(a.bandwidth == 5000);
  // 1,000,000 MB at 5000 Mb/s is 1600 s
  CHECK(parse_iso8601(*a.end).epoch - parse_iso8601(*a.start).epoch == 1600);
}

TEST_CASE("decoders are strict") {
  json j = sample_intent();
  CHECK(decode_intent(j).queries->at(0).options.tbp_mbytes == 1000000);

  json extra = j;
  extra["colour"] = "blue";
  CHECK(code_of([&] { decode_intent(extra); }) == ErrorCode::kMalformedDocument);

  json nested = j;
  nested["connections"][0]["terminals"][0]["vlan"] = 5;
  CHECK(code_of([&] { decode_intent(nested); }) == ErrorCode::kMalformedDocument);

  json missing = j;
  missing.erase("connections");
  CHECK(code_of([&] { decode_intent(missing); }) == ErrorCode::kMalformedDocument);

  json wrong = j;
  wrong["queries"][0]["options"]["tbp-mbytes"] = "lots";
  CHECK(code_of([&] { decode_intent(wrong); }) == ErrorCode::kMalformedDocument);

  CHECK(code_of([&] { decode_error({{"error", "nonsense-code"}, {"detail", json::object()}}); }) ==
        ErrorCode::kMalformedDocument);
  CHECK(code_of([&] { decode_delta_status({{"delta_id", "x"}, {"state", "sleeping"}, {"received_at", 1}}); }) ==
        ErrorCode::kMalformedDocument);
}

TEST_CASE("malformed documents surface as malformed-intent on the wire") {
  CHECK(wire_code(ErrorCode::kMalformedDocument) == ErrorCode::kMalformedIntent);
}

TEST_CASE("integer labels survive a round trip") {
  json j = sample_intent();
  j["connections"][0]["terminals"][0]["label"] = 1785;
  auto d = decode_intent(j);
  CHECK(std::get<int64_t>(*d.connections[0].terminals[0].label) == 1785);
  CHECK(encode(d) == j);
}

TEST_CASE("message round trips") {
  ErrorEnvelope env{ErrorCode::kVlanConflict, {{"port", "urn:x"}, {"vlan", 1780}, {"alternatives", {1781}}}};
  CHECK(decode_error(encode(env)) == env);

  DeltaStatusDoc st{"d1", DeltaStateWire::kCommitted, 100, 105};
  CHECK(decode_delta_status(encode(st)) == st);
  DeltaStatusDoc pending{"d2", DeltaStateWire::kPropagated, 100, std::nullopt};
  CHECK(decode_delta_status(encode(pending)) == pending);

  ModelDelta d;
  d.delta_id = "d1";
  d.target_domain = "a.net";
  d.base_model_version = 3;
  d.addition.push_back({"c1", Urn("urn:ogf:network:a.net:2013:sw+h"), 1780, 10, QosClass::kGuaranteedCapped, {0, 10}});
  PropagateResponse pr{false, d, std::nullopt};
  CHECK(decode_propagate_response(encode(pr)) == pr);
  pr = {true, d, 1234};
  CHECK(decode_propagate_response(encode(pr)) == pr);

  NotificationEvent ev{"sub", "a.net", "delta-state", "d1", DeltaStateWire::kExpired, 7};
  CHECK(decode_notification(encode(ev)) == ev);
  NotificationEvent mv{"sub", "a.net", "model-version", std::nullopt, std::nullopt, 8};
  CHECK(decode_notification(encode(mv)) == mv);

  CHECK(decode_subscription_request(encode(SubscriptionRequest{"http://127.0.0.1:9/cb"})).endpoint ==
        "http://127.0.0.1:9/cb");

  ServiceResponse sr{"id-1", 2, "failed", json{{"domains", {"a.net"}}}, std::nullopt, env};
  CHECK(decode_service_response(encode(sr)) == sr);
  ServiceStatus ss{sr, {{"a.net", "released"}}, {{"a.net", "d1"}}, {{"propagate_ms", 1.5}}, 99};
  CHECK(decode_service_status(encode(ss)) == ss);
}

TEST_CASE("internal errors map to wire codes") {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kInconsistentSchedule); ++i) {
    auto c = static_cast<ErrorCode>(i);
    CAPTURE(code_name(c));
    CHECK(code_from_name(code_name(c)) == c);
    CHECK(is_wire_code(wire_code(c)));
    CHECK(is_wire_code(c) == (i < 12));
    ErrorEnvelope env = envelope_from(Error(c, "x"));
    CHECK(env.code == wire_code(c));
  }
  CHECK(code_name(ErrorCode::kNoFeasibleSchedule) == "no-feasible-schedule");
  CHECK(wire_code(ErrorCode::kUnknownPort) == ErrorCode::kUnknownUrn);
}

TEST_CASE("wire time") {
  WireTime t = parse_iso8601("2018-9-01T10:00:00.000-0400");
  CHECK(t.epoch == 1535810400);
  CHECK(t.offset_minutes == -240);
  CHECK(format_iso8601(t.epoch, t.offset_minutes) == "2018-09-01T10:00:00.000-0400");
  CHECK(parse_iso8601("2018-09-01T14:00:00Z").epoch == 1535810400);
  CHECK(format_iso8601(0, 330) == "1970-01-01T05:30:00.000+0530");

  CHECK(resolve_time("now", 100) == 100);
  CHECK(resolve_time("+2d", 100) == 100 + 172800);
  CHECK(resolve_time("+4h", 0) == 14400);
  CHECK(resolve_time("2018-09-01T14:00:00Z", 0) == 1535810400);
  CHECK(parse_duration("1h") == 3600);
  CHECK(parse_duration("+90m") == 5400);
  CHECK(parse_duration("45s") == 45);
  CHECK(wire_code(code_of([] { parse_iso8601("2018-13-01T00:00:00Z"); })) == ErrorCode::kMalformedIntent);
  CHECK(wire_code(code_of([] { resolve_time("tomorrow", 0); })) == ErrorCode::kMalformedIntent);
  CHECK(wire_code(code_of([] { parse_duration("2 weeks"); })) == ErrorCode::kMalformedIntent);
}
