#include <doctest.h>

#include <random>

#include "sense/error.hpp"
#include "sense/model.hpp"
#include "../support/oracles.hpp"

using namespace sense;

namespace {

DomainModel esnet_fixture() {
  DomainModel m;
  m.domain_id = "es.net";
  m.version = 3;
  m.generated_at = 1535810400;
  m.verbosity = Verbosity::kFull;
  for (std::string sw : {"sw-b", "sw-a"}) {
    NodeDesc n{Urn("urn:ogf:network:es.net:2013:" + sw), NodeKind::kSwitch, {}};
    for (std::string p : {"2", "1"}) {
      n.ports.push_back({Urn(n.urn.str() + "+" + p), 100000, 100000, LabelRange({{1000, 1999}}), true, {}});
    }
    m.nodes.push_back(n);
  }
  m.links.push_back({Urn("urn:ogf:network:es.net:2013:sw-a+2"), Urn("urn:ogf:network:es.net:2013:sw-b+1")});
  m.active_reservations.push_back({"conn-b", Urn("urn:ogf:network:es.net:2013:sw-a+1"), 1001, 5000,
                                   QosClass::kGuaranteedCapped, {100, 200}});
  m.active_reservations.push_back({"conn-a", Urn("urn:ogf:network:es.net:2013:sw-b+2"), 1000, 7000,
                                   QosClass::kSoftCapped, {50, 300}});
  canonicalize(m);
  return m;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kMalformedIntent;
}

}  // namespace

TEST_CASE("urn grammar") {
  CHECK(Urn::valid("urn:ogf:network:nersc.gov:2013:server+dtm11.nersc.gov"));
  CHECK(Urn::valid("urn:ogf:network:es.net:2013:switch+to_tb.es.net"));
  CHECK_FALSE(Urn::valid("urn:ogf:network::2013:x"));
  CHECK_FALSE(Urn::valid("urn:ogf:network:es.net:2013"));
  CHECK_FALSE(Urn::valid("urn:ogf:net:es.net:2013:x"));
  CHECK(Urn("urn:ogf:network:es.net:2013:sw+1").domain() == "es.net");
  CHECK(code_of([] { Urn("bogus"); }) == ErrorCode::kInvariantViolation);
}

TEST_CASE("label ranges coalesce and bound-check") {
  LabelRange r({{20, 30}, {1, 5}, {6, 10}, {25, 40}});
  REQUIRE(r.ranges().size() == 2);
  CHECK(r.ranges()[0] == std::pair{1, 10});
  CHECK(r.ranges()[1] == std::pair{20, 40});
  CHECK(r.contains(10));
  CHECK_FALSE(r.contains(11));
  CHECK(r.to_set().size() == 31);
  CHECK(code_of([] { LabelRange({{0, 5}}); }) == ErrorCode::kInvariantViolation);
  CHECK(code_of([] { LabelRange({{4000, 4095}}); }) == ErrorCode::kInvariantViolation);
  CHECK(code_of([] { LabelRange({{9, 3}}); }) == ErrorCode::kInvariantViolation);
}

TEST_CASE("empty domain serializes with an empty node list") {
  DomainModel m;
  m.domain_id = "empty.net";
  m.version = 7;
  std::string bytes = serialize_model(m);
  auto j = json::parse(bytes);
  CHECK(j.at("nodes").empty());
  CHECK(j.at("version") == 7);
  CHECK(parse_model(bytes) == m);
}

TEST_CASE("fixture round trip is byte identical") {
  DomainModel m = esnet_fixture();
  std::string a = serialize_model(m);
  DomainModel back = parse_model(a);
  CHECK(back == m);
  CHECK(serialize_model(back) == a);
}

TEST_CASE("construction order does not change bytes") {
  DomainModel a = esnet_fixture();
  DomainModel b = a;
  std::reverse(b.nodes.begin(), b.nodes.end());
  for (auto& n : b.nodes) std::reverse(n.ports.begin(), n.ports.end());
  std::reverse(b.active_reservations.begin(), b.active_reservations.end());
  canonicalize(b);
  CHECK(serialize_model(a) == serialize_model(b));
}

TEST_CASE("random models round trip") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 60; ++i) {
    auto inst = oracle::random_instance(rng);
    for (const auto& m : inst.models) {
      DomainModel back = parse_model(serialize_model(m));
      CHECK(back == m);
    }
  }
}

TEST_CASE("parse rejects bad documents") {
  std::string good = serialize_model(esnet_fixture());
  CHECK(code_of([&] { parse_model(good.substr(0, good.size() / 2)); }) == ErrorCode::kMalformedDocument);

  auto j = json::parse(good);
  j["nodes"][0]["ports"][0]["labels"]["ranges"] = json::array({json::array({0, 5})});
  CHECK(code_of([&] { parse_model(j.dump()); }) == ErrorCode::kInvariantViolation);

  auto k = json::parse(good);
  k["nodes"][0]["ports"][0]["reservable"] = 200000;
  try {
    parse_model(k.dump());
    FAIL("reservable > capacity accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvariantViolation);
    CHECK(e.detail().dump().find(k["nodes"][0]["ports"][0]["urn"].get<std::string>()) != std::string::npos);
  }

  auto extra = json::parse(good);
  extra["surprise"] = 1;
  CHECK(code_of([&] { parse_model(extra.dump()); }) == ErrorCode::kMalformedDocument);
}

TEST_CASE("segment invariants") {
  Urn p("urn:ogf:network:es.net:2013:sw-a+1");
  CHECK(code_of([&] { validate(ReservationSegment{"c", p, 1000, 10, QosClass::kGuaranteedCapped, {5, 5}}); }) ==
        ErrorCode::kInvariantViolation);
  CHECK(code_of([&] { validate(ReservationSegment{"c", p, 1000, 0, QosClass::kGuaranteedCapped, {5, 6}}); }) ==
        ErrorCode::kInvariantViolation);
  CHECK(code_of([&] { validate(ReservationSegment{"c", p, 4095, 1, QosClass::kGuaranteedCapped, {5, 6}}); }) ==
        ErrorCode::kInvariantViolation);
}

TEST_CASE("delta invariants") {
  ModelDelta d{"id", "es.net", 1, {{"c1", Urn("urn:ogf:network:tb.es.net:2013:x+1"), 1000, 10,
                                    QosClass::kGuaranteedCapped, {1, 2}}}, {}};
  CHECK(code_of([&] { validate(d); }) == ErrorCode::kInvariantViolation);
  ModelDelta e{"id", "es.net", 1, {{"c1", Urn("urn:ogf:network:es.net:2013:x+1"), 1000, 10,
                                    QosClass::kGuaranteedCapped, {1, 2}}}, {"c1"}};
  CHECK(code_of([&] { validate(e); }) == ErrorCode::kInvariantViolation);
  e.reduction = {"c9"};
  CHECK(parse_delta(serialize_delta(e)) == e);
}

TEST_CASE("apply_delta") {
  DomainModel m = esnet_fixture();

  SUBCASE("empty delta bumps the version only") {
    DomainModel n = apply_delta(m, {"d0", "es.net", m.version, {}, {}});
    CHECK(n.version == m.version + 1);
    DomainModel same = n;
    same.version = m.version;
    CHECK(same == m);
  }
  SUBCASE("add then reduce restores the content") {
    ReservationSegment s{"new", Urn("urn:ogf:network:es.net:2013:sw-b+1"), 1500, 100,
                         QosClass::kGuaranteedCapped, {10, 20}};
    DomainModel a = apply_delta(m, {"d1", "es.net", m.version, {s}, {}});
    CHECK(a.active_reservations.size() == m.active_reservations.size() + 1);
    DomainModel b = apply_delta(a, {"d2", "es.net", a.version, {}, {"new"}});
    CHECK(b.version == m.version + 2);
    CHECK(b.active_reservations == m.active_reservations);
    CHECK(b.nodes == m.nodes);
  }
  SUBCASE("addition naming another domain's port") {
    ReservationSegment s{"x", Urn("urn:ogf:network:tb.es.net:2013:sw+1"), 1500, 100,
                         QosClass::kGuaranteedCapped, {10, 20}};
    CHECK(code_of([&] { apply_delta(m, {"d3", "es.net", 1, {s}, {}}); }) == ErrorCode::kUnknownPort);
  }
  SUBCASE("reduction of an absent connection") {
    CHECK(code_of([&] { apply_delta(m, {"d4", "es.net", 1, {}, {"ghost"}}); }) == ErrorCode::kUnknownConnection);
  }
  SUBCASE("non-full verbosity changes only the version") {
    DomainModel st = m;
    st.verbosity = Verbosity::kStatic;
    st.active_reservations.clear();
    ReservationSegment s{"new", Urn("urn:ogf:network:es.net:2013:sw-b+1"), 1500, 100,
                         QosClass::kGuaranteedCapped, {10, 20}};
    DomainModel n = apply_delta(st, {"d5", "es.net", 1, {s}, {}});
    CHECK(n.active_reservations.empty());
    CHECK(n.version == st.version + 1);
  }
}

TEST_CASE("delta reversibility over random multisets") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 40; ++round) {
    auto inst = oracle::random_instance(rng);
    for (const auto& m : inst.models) {
      if (m.nodes.empty()) continue;
      std::vector<ReservationSegment> add;
      std::vector<std::string> ids;
      int k = 0;
      for (const auto& n : m.nodes) {
        for (const auto& p : n.ports) {
          std::string id = "rev" + std::to_string(k++);
          add.push_back({id, p.urn, 1005, 3, QosClass::kBestEffort, {1, 9}});
          ids.push_back(id);
        }
      }
      DomainModel a = apply_delta(m, {"a", m.domain_id, m.version, add, {}});
      DomainModel b = apply_delta(a, {"b", m.domain_id, a.version, {}, ids});
      CHECK(b.active_reservations == m.active_reservations);
      CHECK(b.version == m.version + 2);
    }
  }
}
