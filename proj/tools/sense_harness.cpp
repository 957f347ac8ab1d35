// Operator CLI: topology generation, fabric launch, batch runs, reports,
// audits and the conformance corpus.
#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "sense/error.hpp"
#include "sense/harness.hpp"
#include "sense/json_util.hpp"

namespace fs = std::filesystem;
using namespace sense;
using namespace sense::harness;

namespace {

std::atomic<bool> g_stop{false};

struct Common {
  std::string preset = "baseline8";
  uint64_t seed = 1;
  double latency_scale = 0.1;
  std::string out = "out";
  std::string format = "csv";
  std::string manifest;
  std::string log_level = "warn";
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMalformedDocument, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path);
}

void write_text(const fs::path& p, const std::string& body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream(p) << body;
}

Manifest load_manifest(const Common& c) {
  if (!c.manifest.empty()) return manifest_from_json(read_json_file(c.manifest));
  TopologySpec spec = preset_spec(c.preset, c.seed);
  spec.latency_scale = c.latency_scale;
  return gen_topology(spec);
}

BatchSpec make_batch(const std::string& kind, const Manifest& m, size_t count, uint64_t seed, Mbps mbps) {
  if (kind == "table1") return table1_batch(mbps);
  if (kind == "random") return random_batch(m, count, seed, mbps);
  throw Error(ErrorCode::kInvariantViolation, "batch must be table1 or random", {{"batch", kind}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-domain orchestration fabric harness"};
  app.set_config("--config", "", "TOML configuration file");
  app.require_subcommand(1);
  Common c;
  app.add_option("--preset", c.preset, "baseline8 | scaleout67")->check(CLI::IsMember({"baseline8", "scaleout67"}));
  app.add_option("--seed", c.seed, "Topology and batch seed");
  app.add_option("--latency-scale", c.latency_scale, "Multiplier on paper-scale RM latencies");
  app.add_option("--out", c.out, "Output directory");
  app.add_option("--format", c.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--manifest", c.manifest, "Use a manifest written by gen-topology");
  app.add_option("--log-level", c.log_level, "trace | debug | info | warn | error");

  auto* gen = app.add_subcommand("gen-topology", "Write RM configs and the launch manifest")->fallthrough();

  int port = 0;
  std::string domain;
  double duration = 0;
  auto* launch = app.add_subcommand("launch", "Serve the RM fleet and orchestrator over HTTP")->fallthrough();
  launch->add_option("--domain", domain, "Serve only this domain's RM");
  launch->add_option("--port", port, "Port for a single-domain RM");
  launch->add_option("--duration", duration, "Stop after this many seconds (0 = until signalled)");

  int concurrency = 0;
  int repeat = 1;
  size_t count = 20;
  std::string batch_kind;
  Mbps mbps = 1000;
  bool http = false;
  bool graph = false;
  auto* run = app.add_subcommand("run-batch", "Drive a batch of intents and write the report")->fallthrough();
  run->add_option("--batch", batch_kind, "table1 | random (default by preset)");
  run->add_option("--concurrency", concurrency, "Simultaneous requests (default: whole batch)");
  run->add_option("--repeat", repeat, "Batch repetitions");
  run->add_option("--count", count, "Intents in a random batch");
  run->add_option("--mbps", mbps, "Bandwidth per intent");
  run->add_flag("--http", http, "Run the fabric over real sockets");
  run->add_flag("--graph", graph, "Also dump the union graph");

  std::string input;
  auto* report = app.add_subcommand("report", "Rebuild report files from a saved batch.json")->fallthrough();
  report->add_option("--in", input, "batch.json written by run-batch")->required();

  bool seed_defect = false;
  auto* audit_cmd = app.add_subcommand("audit", "Run a batch, then sweep calendars and ledgers")->fallthrough();
  audit_cmd->add_option("--batch", batch_kind, "table1 | random");
  audit_cmd->add_option("--count", count, "Intents in a random batch");
  audit_cmd->add_flag("--seed-defect", seed_defect, "Corrupt one calendar first (self-test)");

  auto* conf = app.add_subcommand("conformance", "Write the golden document corpus")->fallthrough();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(c.log_level));

  try {
    if (*gen) {
      Manifest m = load_manifest(c);
      fs::path out(c.out);
      write_text(out / "manifest.json", to_json(m).dump(2) + "\n");
      for (const auto& rc : m.rms) write_text(out / "rms" / (rc.domain_id + ".json"), to_json(rc).dump(2) + "\n");
      std::cout << json{{"preset", m.preset},         {"seed", m.seed},
                        {"domains", m.rms.size()},    {"nodes", m.node_count},
                        {"links", m.link_count},      {"manifest", (out / "manifest.json").string()}}
                       .dump()
                << "\n";
      return 0;
    }

    if (*launch) {
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      Manifest m = load_manifest(c);
      std::unique_ptr<Fabric> fabric;
      std::unique_ptr<RmServer> single;
      json endpoints;
      if (!domain.empty()) {
        auto rm = std::make_shared<ResourceManager>(m.rm(domain), std::make_shared<SystemClock>());
        single = std::make_unique<RmServer>(rm);
        single->start("127.0.0.1", port);
        endpoints[domain] = single->url();
      } else {
        FabricOptions opt;
        opt.http = true;
        opt.orchestrator = scaled_config(m.latency_scale);
        fabric = std::make_unique<Fabric>(m, std::move(opt));
        endpoints = fabric->endpoints();
      }
      endpoints["seed"] = m.seed;
      std::cout << endpoints.dump() << std::endl;
      auto start = std::chrono::steady_clock::now();
      while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        if (duration > 0 && std::chrono::steady_clock::now() - start > std::chrono::duration<double>(duration)) break;
      }
      return 0;
    }

    if (*run) {
      Manifest m = load_manifest(c);
      if (batch_kind.empty()) batch_kind = m.preset == "baseline8" ? "table1" : "random";
      BatchSpec b = make_batch(batch_kind, m, count, c.seed, mbps);
      if (concurrency > 0) b.concurrency = concurrency;
      b.repeat = repeat;
      FabricOptions opt;
      opt.http = http;
      opt.orchestrator = scaled_config(m.latency_scale);
      Fabric fabric(m, std::move(opt));
      BatchReport r = run_batch(b, fabric);
      fs::path out(c.out);
      write_text(out / "manifest.json", to_json(m).dump(2) + "\n");
      write_text(out / "batch.json", to_json(r).dump(2) + "\n");
      std::optional<json> g;
      if (graph) g = fabric.orchestrator()->union_model()->export_graph();
      auto files = write_report(r, m, c.out, c.format, g ? &*g : nullptr);
      ReportSummary s = summarize(r, m);
      std::cout << json{{"seed", m.seed},
                        {"committed", s.committed},
                        {"failed", s.failed},
                        {"span_mismatches", s.span_mismatches},
                        {"files", files}}
                       .dump()
                << "\n";
      return s.failed == 0 ? 0 : 1;
    }

    if (*report) {
      Manifest m = load_manifest(c);
      json j = read_json_file(input);
      BatchReport r;
      r.preset = j.at("preset");
      r.seed = j.at("seed");
      r.latency_scale = j.at("latency_scale");
      for (const auto& s : j.at("services")) {
        ServiceReport sr;
        sr.name = s.at("name");
        sr.repeat = s.at("repeat");
        sr.instance_id = s.at("instance_id");
        sr.state = s.at("state");
        sr.domains = s.at("domains").get<std::vector<std::string>>();
        if (s.contains("expected_span")) sr.expected_span = s.at("expected_span").get<size_t>();
        sr.compute_ms = s.at("compute_ms");
        sr.propagate_ms = s.at("propagate_ms");
        sr.commit_ms = s.at("commit_ms");
        sr.wall_ms = s.at("wall_ms");
        sr.propagate_ms_by_rm = s.at("propagate_ms_by_rm").get<std::map<std::string, double>>();
        sr.commit_ms_by_rm = s.at("commit_ms_by_rm").get<std::map<std::string, double>>();
        if (s.contains("error")) sr.error = protocol::decode_error(s.at("error"));
        r.services.push_back(std::move(sr));
      }
      for (const auto& p : j.at("pulls")) {
        PullCycle cy;
        cy.integrated = p.at("integrated");
        cy.integrate_ms = p.at("integrate_ms");
        cy.feedback_ms = p.at("feedback_ms");
        for (const auto& rec : p.at("rms")) {
          cy.rms.push_back({rec.at("domain"), rec.at("modified"), rec.at("reachable"), rec.at("pull_ms"),
                            rec.at("version")});
        }
        r.pulls.push_back(std::move(cy));
      }
      for (const auto& f : write_report(r, m, c.out, c.format)) std::cout << f << "\n";
      return 0;
    }

    if (*audit_cmd) {
      Manifest m = load_manifest(c);
      if (batch_kind.empty()) batch_kind = m.preset == "baseline8" ? "table1" : "random";
      FabricOptions opt;
      opt.orchestrator = scaled_config(m.latency_scale);
      Fabric fabric(m, std::move(opt));
      run_batch(make_batch(batch_kind, m, count, c.seed, mbps), fabric);
      if (seed_defect) {
        // Overbook the first port of the first domain behind admission control.
        const RmConfig& rc = m.rms.front();
        const Port& p = rc.nodes.front().ports.front();
        ReservationSegment s{"seeded-defect", p.urn, p.labels.ranges().front().first, p.reservable + 1,
                             QosClass::kGuaranteedCapped, {fabric.clock()->now(), fabric.clock()->now() + 3600}};
        fabric.rm(rc.domain_id)->inject_allocation(s);
      }
      AuditResult a = audit(fabric);
      std::cout << to_json(a).dump(2) << "\n";
      return a.ok() ? 0 : 1;
    }

    if (*conf) {
      for (const auto& f : write_conformance(c.out)) std::cout << f << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << json{{"error", code_name(e.code())}, {"message", e.what()}, {"detail", e.detail()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
