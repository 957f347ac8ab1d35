#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>

#include "sense/error.hpp"
#include "sense/harness.hpp"
#include "sense/orchestrator.hpp"
#include "../support/fixtures.hpp"

using namespace sense;
using namespace sense::harness;

namespace {

OrchestratorConfig quick_config() {
  OrchestratorConfig c;
  c.pull_loop = false;
  c.poll_interval_s = 0.05;
  c.commit_timeout_s = 10;
  c.rollback = {5, 2, 50, 5};
  c.id_seed = "unit";
  return c;
}

struct Bench {
  std::shared_ptr<ManualClock> clock = std::make_shared<ManualClock>(kReferenceNow);
  std::unique_ptr<Fabric> fabric;

  explicit Bench(OrchestratorConfig c = quick_config()) {
    FabricOptions o;
    o.orchestrator = std::move(c);
    o.clock = clock;
    fabric = std::make_unique<Fabric>(fixture::baseline8(), o);
  }
  Orchestrator& orch() { return *fabric->orchestrator(); }

  size_t allocations(bool held_only = false) {
    size_t n = 0;
    for (const auto& [d, rm] : fabric->rms()) {
      for (const auto& a : rm->allocations()) {
        if (!held_only || a.state == AllocationState::kHeld) ++n;
      }
    }
    return n;
  }
  std::map<std::string, int64_t> versions() {
    std::map<std::string, int64_t> out;
    for (const auto& [d, rm] : fabric->rms()) out[d] = rm->version();
    return out;
  }
};

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

TEST_CASE("create, reserve, commit, cancel") {
  Bench b;
  auto& o = b.orch();
  auto r = o.create(fixture::intent({{fixture::kNersc, fixture::kCaltech}}, 5000));
  CHECK(r.state == "computed");
  CHECK(r.revision == 1);
  REQUIRE(r.design);
  CHECK((*r.design)["domains"].size() == 5);
  CHECK(b.allocations() == 0);

  r = o.reserve(r.instance_id);
  CHECK(r.state == "reserved");
  auto st = o.status(r.instance_id);
  CHECK(st.rm_states.size() == 5);
  for (const auto& [d, s] : st.rm_states) CHECK(s == "propagated");
  CHECK(st.hold_expires_at);
  CHECK(b.allocations(true) > 0);
  CHECK(code_of([&] { o.reserve(r.instance_id); }) == ErrorCode::kBadState);

  r = o.commit(r.instance_id, false);
  CHECK(r.state == "committed");
  st = o.status(r.instance_id);
  for (const auto& [d, s] : st.rm_states) CHECK(s == "committed");
  CHECK(st.phase_timings_ms.count("commit_ms") == 1);
  CHECK(b.allocations(true) == 0);
  size_t committed = b.allocations();
  CHECK(committed > 0);
  CHECK(audit(*b.fabric).ok());

  r = o.cancel(r.instance_id);
  CHECK(r.state == "cancelled");
  CHECK(b.allocations() == 0);
  CHECK(o.cancel(r.instance_id).state == "cancelled");
  CHECK(code_of([&] { o.status("no-such-instance"); }) == ErrorCode::kUnknownInstance);
}

TEST_CASE("asynchronous commit settles") {
  Bench b;
  auto& o = b.orch();
  auto r = o.create(fixture::intent({{fixture::kUmd, fixture::kFnal}}));
  o.reserve(r.instance_id);
  auto c = o.commit(r.instance_id, true);
  CHECK((c.state == "committing" || c.state == "committed"));
  CHECK(o.wait_settled(r.instance_id, 10));
  CHECK(o.status(r.instance_id).service.state == "committed");
  CHECK(o.status(r.instance_id).service.design.value()["domains"].size() == 3);
}

TEST_CASE("queries never touch the network") {
  Bench b;
  auto& o = b.orch();
  auto before = b.versions();
  json doc = fixture::intent({{fixture::kNersc, fixture::kCaltech}}, 5000);
  doc["queries"] = json::array({{{"ask", "maximum-bandwidth"}, {"options", {{"name", "connection 1"}}}},
                                {{"ask", "time-bandwidth-product"},
                                 {"options", {{"name", "connection 1"}, {"tbp-mbytes", 1000000},
                                              {"start-after", "now"}, {"end-before", "+2d"},
                                              {"bandwidth-mbps >=", 1000}, {"bandwidth-mbps <=", 10000}}}}});
  auto r1 = o.create(doc);
  auto r2 = o.create(doc);
  REQUIRE(r1.answer);
  CHECK(r1.answer == r2.answer);
  CHECK(r1.answer->queries.size() == 2);
  CHECK(b.allocations() == 0);
  CHECK(b.versions() == before);
}

TEST_CASE("negotiation revisions are bounded") {
  auto c = quick_config();
  c.max_negotiation_rounds = 3;
  Bench b(c);
  auto& o = b.orch();
  auto r = o.create(fixture::intent({{fixture::kNersc, fixture::kCaltech}}, 1000));
  r = o.negotiate(r.instance_id, fixture::intent({{fixture::kNersc, fixture::kCaltech}}, 2000));
  CHECK(r.revision == 2);
  r = o.negotiate(r.instance_id, fixture::intent({{fixture::kNersc, fixture::kAnl}}, 2000));
  CHECK(r.revision == 3);
  CHECK((*r.design)["domains"].size() == 4);
  CHECK(code_of([&] { o.negotiate(r.instance_id, fixture::intent({{fixture::kNersc, fixture::kUmd}})); }) ==
        ErrorCode::kTooManyRounds);
}

TEST_CASE("infeasible intent is recorded, not thrown") {
  Bench b;
  auto r = b.orch().create(fixture::intent({{fixture::kNersc, fixture::kCaltech}}, 200000));
  CHECK(r.state == "compute_failed");
  REQUIRE(r.error);
  CHECK(r.error->code == ErrorCode::kNoPath);
  CHECK(code_of([&] { b.orch().reserve(r.instance_id); }) == ErrorCode::kBadState);

  auto u = b.orch().create(fixture::intent({{fixture::kNersc, fixture::dtn("nowhere.org", "dtn1")}}));
  CHECK(u.state == "compute_failed");
  CHECK(u.error->code == ErrorCode::kUnknownUrn);
}

TEST_CASE("a rejecting RM rolls back every other hold") {
  Bench b;
  auto& o = b.orch();
  auto r = o.create(fixture::intent({{fixture::kNersc, fixture::kCaltech}}, 50000));
  REQUIRE(r.state == "computed");
  // The orchestrator's view is now stale: es.net can only fit 40000 more.
  b.fabric->rm("es.net")->inject_allocation({"bg", Urn(fixture::sw("es.net", "to_cenic.net")), 1999, 60000,
                                             QosClass::kGuaranteedCapped,
                                             {kReferenceNow - 10, kReferenceNow + 10 * kDefaultDuration}});
  r = o.reserve(r.instance_id);
  CHECK(r.state == "failed");
  REQUIRE(r.error);
  CHECK(r.error->code == ErrorCode::kInsufficientBandwidth);
  CHECK(r.error->detail.at("domain") == "es.net");
  CHECK(b.allocations() == 1);  // only the injected one
  auto st = b.orch().status(r.instance_id);
  for (const auto& [d, s] : st.rm_states) CHECK(s != "propagated");
}

TEST_CASE("commit after the hold lapses expires the service") {
  Bench b;
  auto& o = b.orch();
  auto r = o.create(fixture::intent({{fixture::kUmd, fixture::kAnl}}));
  o.reserve(r.instance_id);
  b.clock->advance(10000);
  r = o.commit(r.instance_id, false);
  CHECK(r.state == "expired");
  REQUIRE(r.error);
  CHECK(r.error->code == ErrorCode::kHoldExpired);
  for (const auto& [d, rm] : b.fabric->rms()) rm->sweep();
  CHECK(b.allocations() == 0);
}

TEST_CASE("journal survives a restart") {
  auto path = std::filesystem::temp_directory_path() / "sense_unit_journal.jsonl";
  std::filesystem::remove(path);
  auto c = quick_config();
  c.journal_path = path.string();
  std::string id;
  ServiceInstance before;
  auto manifest = fixture::baseline8();
  auto clock = std::make_shared<ManualClock>(kReferenceNow);
  std::map<std::string, std::shared_ptr<ResourceManager>> rms;
  for (const auto& rc : manifest.rms) rms[rc.domain_id] = std::make_shared<ResourceManager>(rc, clock);
  auto clients = [&] {
    std::vector<std::shared_ptr<RmClient>> out;
    for (auto& [d, rm] : rms) out.push_back(std::make_shared<LocalRmClient>(rm));
    return out;
  };
  {
    Orchestrator o(c, clients(), clock);
    o.start();
    id = o.create(fixture::intent({{fixture::kNersc, fixture::kFnal}})).instance_id;
    o.reserve(id);
    o.commit(id, false);
    before = *o.snapshot(id);
    o.stop();
  }
  {
    Orchestrator o(c, clients(), clock);
    auto after = o.snapshot(id);
    REQUIRE(after);
    CHECK(to_json(*after) == to_json(before));
    o.start();
    // ids keep counting from where the journal left off
    CHECK(o.create(fixture::intent({{fixture::kUmd, fixture::kFnal}})).instance_id != id);
    CHECK(o.cancel(id).state == "cancelled");
    o.stop();
  }
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"instance_id\": \"truncated\n";
  }
  CHECK(code_of([&] { Orchestrator o(c, clients(), clock); }) == ErrorCode::kCorruptJournal);
  std::filesystem::remove(path);
}

TEST_CASE("concurrent services on one orchestrator") {
  Bench b;
  auto& o = b.orch();
  std::vector<std::vector<std::string>> pairs = {{fixture::kNersc, fixture::kCaltech}, {fixture::kUmd, fixture::kFnal},
                                                 {fixture::kAnl, fixture::kNersc}, {fixture::kCaltech, fixture::kUmd},
                                                 {fixture::kFnal, fixture::kAnl}, {fixture::kNersc, fixture::kUmd}};
  std::vector<std::future<std::string>> runs;
  for (const auto& p : pairs) {
    runs.push_back(std::async(std::launch::async, [&o, p] {
      auto r = o.create(fixture::intent({p}, 5000));
      o.reserve(r.instance_id);
      return o.commit(r.instance_id, false).state;
    }));
  }
  for (auto& f : runs) CHECK(f.get() == "committed");
  auto a = audit(*b.fabric);
  CHECK(a.ok());
  CHECK(a.committed_services == pairs.size());
}
