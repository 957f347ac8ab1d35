#include <doctest.h>

#include <algorithm>
#include <random>

#include "sense/error.hpp"
#include "sense/topology.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

using namespace sense;

namespace {

// One switch per domain with the given ports; aliases as (local port, remote urn).
DomainModel domain(const std::string& id, std::vector<std::pair<std::string, std::string>> ports) {
  DomainModel m;
  m.domain_id = id;
  m.version = 1;
  m.verbosity = Verbosity::kStatic;
  NodeDesc n{Urn("urn:ogf:network:" + id + ":2013:sw"), NodeKind::kSwitch, {}};
  for (auto& [local, alias] : ports) {
    Port p{Urn(n.urn.str() + "+" + local), 1000, 1000, LabelRange({{1, 10}}), true, {}};
    if (!alias.empty()) p.alias = Urn(alias);
    n.ports.push_back(p);
  }
  m.nodes.push_back(n);
  canonicalize(m);
  return m;
}

std::string p(const std::string& d, const std::string& local) { return "urn:ogf:network:" + d + ":2013:sw+" + local; }

size_t count(const UnionModel& u, EdgeScope s) {
  return static_cast<size_t>(std::count_if(u.edges().begin(), u.edges().end(), [&](const Edge& e) { return e.scope == s; }));
}

}  // namespace

TEST_CASE("single domain has only intra edges") {
  auto u = integrate_models({domain("a.net", {{"1", ""}, {"2", ""}, {"3", ""}})});
  CHECK(count(*u, EdgeScope::kInter) == 0);
  CHECK(count(*u, EdgeScope::kIntra) == 3);  // switch cross-connects
}

TEST_CASE("line of three domains") {
  auto a = domain("a.net", {{"1", ""}, {"to_b", p("b.net", "to_a")}});
  auto b = domain("b.net", {{"to_a", p("a.net", "to_b")}, {"to_c", p("c.net", "to_b")}});
  auto c = domain("c.net", {{"to_b", p("b.net", "to_c")}, {"1", ""}});
  auto u = integrate_models({a, b, c});
  std::vector<std::pair<std::string, std::string>> inter;
  for (const auto& e : u->edges()) {
    if (e.scope == EdgeScope::kInter) inter.emplace_back(e.a.str(), e.b.str());
  }
  std::sort(inter.begin(), inter.end());
  std::vector<std::pair<std::string, std::string>> expect{{p("a.net", "to_b"), p("b.net", "to_a")},
                                                          {p("b.net", "to_c"), p("c.net", "to_b")}};
  CHECK(inter == expect);
}

TEST_CASE("one-sided and dangling aliases create no edge") {
  auto a = domain("a.net", {{"to_b", p("b.net", "to_a")}, {"dangling", p("z.net", "x")}});
  auto b = domain("b.net", {{"to_a", ""}});
  auto u = integrate_models({a, b});
  CHECK(count(*u, EdgeScope::kInter) == 0);
}

TEST_CASE("duplicate domain") {
  auto a = domain("a.net", {{"1", ""}});
  try {
    integrate_models({a, a});
    FAIL("accepted twice");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDuplicateDomain);
  }
}

TEST_CASE("chain of n single-node domains has n-1 inter edges") {
  for (int n = 1; n <= 8; ++n) {
    std::vector<DomainModel> ms;
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<std::string, std::string>> ports{{"h", ""}};
      std::string me = "d" + std::to_string(i) + ".net";
      if (i > 0) ports.push_back({"prev", p("d" + std::to_string(i - 1) + ".net", "next")});
      if (i + 1 < n) ports.push_back({"next", p("d" + std::to_string(i + 1) + ".net", "prev")});
      ms.push_back(domain(me, ports));
    }
    CHECK(count(*integrate_models(ms), EdgeScope::kInter) == static_cast<size_t>(n - 1));
  }
}

TEST_CASE("integration is order-insensitive and matches the generator's wiring") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 100; ++i) {
    auto inst = oracle::random_instance(rng);
    auto u = integrate_models(inst.models);
    auto shuffled = inst.models;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto v = integrate_models(shuffled);
    CHECK(u->edges() == v->edges());
    CHECK(u->export_graph() == v->export_graph());
    REQUIRE(u->port_count() == inst.ports.size());
    for (size_t k = 0; k < u->port_count(); ++k) {
      CHECK(u->port(k).urn.str() == inst.ports[k].urn);
      CHECK(u->neighbors(k) == inst.adj[k]);
    }
  }
}

TEST_CASE("replacing one domain only touches its subgraph") {
  auto models = fixture::baseline_models();
  auto before = integrate_models(models);
  for (auto& m : models) {
    if (m.domain_id != "umd.edu") continue;
    m.version += 1;
    m.nodes.front().ports.front().reservable = 5;  // DTN port
  }
  auto after = integrate_models(models);
  CHECK(before->edges() == after->edges());
  for (const auto& [id, m] : after->models()) {
    if (id != "umd.edu") CHECK(m == before->models().at(id));
  }
}

TEST_CASE("locate") {
  auto u = fixture::baseline_union();
  auto loc = u->locate(Urn(fixture::kNersc));
  CHECK(loc.domain_id == "nersc.gov");
  CHECK(loc.port == nullptr);
  auto port = u->locate(Urn(fixture::kNersc + "+eth0"));
  CHECK(port.domain_id == "nersc.gov");
  REQUIRE(port.port != nullptr);
  CHECK(port.port->urn.str() == fixture::kNersc + "+eth0");
  try {
    u->locate(Urn("urn:ogf:network:nowhere.org:2013:x"));
    FAIL("unknown urn located");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownUrn);
  }
}

TEST_CASE("domains_on_path") {
  auto u = fixture::baseline_union();
  using fixture::sw;
  auto urns = [](std::vector<std::string> v) {
    std::vector<Urn> out;
    for (auto& s : v) out.emplace_back(s);
    return out;
  };
  CHECK(domains_on_path(*u, urns({fixture::kUmd + "+eth0", sw("umd.edu", "dtn1.umd.edu")})) ==
        std::vector<std::string>{"umd.edu"});

  auto umd_fnal = urns({fixture::kUmd + "+eth0", sw("umd.edu", "dtn1.umd.edu"), sw("umd.edu", "to_es.net"),
                        sw("es.net", "to_umd.edu"), sw("es.net", "to_fnal.gov"), sw("fnal.gov", "to_es.net"),
                        sw("fnal.gov", "dtn1.fnal.gov"), fixture::kFnal + "+eth0"});
  CHECK(domains_on_path(*u, umd_fnal).size() == 3);

  auto nersc_caltech =
      urns({fixture::kNersc + "+eth0", sw("nersc.gov", "dtm11.nersc.gov"), sw("nersc.gov", "to_tb.es.net"),
            sw("tb.es.net", "to_nersc.gov"), sw("tb.es.net", "to_es.net"), sw("es.net", "to_tb.es.net"),
            sw("es.net", "to_cenic.net"), sw("cenic.net", "to_es.net"), sw("cenic.net", "to_caltech.edu"),
            sw("caltech.edu", "to_cenic.net"), sw("caltech.edu", "xfer-2.ultralight.org"), fixture::kCaltech + "+eth0"});
  CHECK(domains_on_path(*u, nersc_caltech) ==
        std::vector<std::string>{"nersc.gov", "tb.es.net", "es.net", "cenic.net", "caltech.edu"});

  try {
    domains_on_path(*u, urns({fixture::kUmd + "+eth0", fixture::kFnal + "+eth0"}));
    FAIL("non-adjacent hop accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidPath);
  }
}

TEST_CASE("graph export") {
  auto u = fixture::baseline_union();
  auto g = u->export_graph();
  size_t nodes = 0;
  for (const auto& [id, m] : u->models()) nodes += m.nodes.size();
  CHECK(g.at("nodes").size() == nodes);
  CHECK(g.at("directed") == false);
}

TEST_CASE("aliased ports that disagree on capacity leave a warning") {
  auto a = domain("a.net", {{"to_b", p("b.net", "to_a")}});
  auto b = domain("b.net", {{"to_a", p("a.net", "to_b")}});
  b.nodes.front().ports.front().capacity = 500;
  b.nodes.front().ports.front().reservable = 500;
  auto u = integrate_models({a, b});
  CHECK(count(*u, EdgeScope::kInter) == 1);
  CHECK(u->warnings().size() == 1);
}
