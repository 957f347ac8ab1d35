#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sense/error.hpp"
#include "sense/harness.hpp"

namespace sense::harness {

namespace fs = std::filesystem;

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt_fixed(double v, int precision) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

std::string fmt_ms(double v) { return fmt_fixed(v, 1); }

void write_file(const fs::path& p, const std::string& body, std::vector<std::string>& written) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvariantViolation, "cannot write " + p.string());
  out << body;
  written.push_back(p.string());
}

}  // namespace

// --- summaries -----------------------------------------------------------------------------------

ReportSummary summarize(const BatchReport& r, const Manifest& m, double tolerance_ms, double commit_slack_ms) {
  ReportSummary s;
  for (const auto& svc : r.services) {
    if (svc.state == "committed") ++s.committed;
    else ++s.failed;
    if (svc.expected_span && *svc.expected_span != svc.rm_span()) ++s.span_mismatches;
    if (svc.state != "committed") continue;
    LawCheck law;
    law.service = svc.name + " #" + std::to_string(svc.repeat);
    for (const auto& d : svc.domains) {
      const RmConfig& c = m.rm(d);
      law.propagate_expected_ms += c.propagate_latency_ms;
      law.commit_expected_ms = std::max(law.commit_expected_ms, c.commit_latency_ms);
    }
    law.propagate_measured_ms = svc.propagate_ms;
    law.commit_measured_ms = svc.commit_ms;
    law.propagate_ok = std::abs(law.propagate_measured_ms - law.propagate_expected_ms) <= tolerance_ms;
    law.commit_ok = law.commit_measured_ms >= law.commit_expected_ms - tolerance_ms &&
                    law.commit_measured_ms <= law.commit_expected_ms + commit_slack_ms + tolerance_ms;
    s.laws.push_back(law);
  }
  std::map<std::string, std::pair<size_t, size_t>> counts;  // domain -> (304s, reachable pulls)
  for (const auto& cycle : r.pulls) {
    double gen = 0;
    for (const auto& rec : cycle.rms) {
      if (!rec.reachable) continue;
      auto& [nm, total] = counts[rec.domain_id];
      ++total;
      if (!rec.modified) ++nm;
      if (rec.modified) gen = std::max(gen, m.rm(rec.domain_id).model_gen_latency_ms);
    }
    if (!cycle.integrated) continue;
    FeedbackCheck f;
    f.expected_ms = gen + cycle.integrate_ms;
    f.measured_ms = cycle.feedback_ms;
    f.ok = std::abs(f.measured_ms - f.expected_ms) <= tolerance_ms;
    s.feedback.push_back(f);
  }
  for (const auto& [d, c] : counts) {
    s.not_modified_ratio[d] = c.second ? static_cast<double>(c.first) / static_cast<double>(c.second) : 0.0;
  }
  return s;
}

json to_json(const BatchReport& r) {
  json services = json::array();
  for (const auto& s : r.services) {
    json j{{"name", s.name},
           {"repeat", s.repeat},
           {"instance_id", s.instance_id},
           {"state", s.state},
           {"domains", s.domains},
           {"rm_span", s.rm_span()},
           {"compute_ms", s.compute_ms},
           {"propagate_ms", s.propagate_ms},
           {"commit_ms", s.commit_ms},
           {"wall_ms", s.wall_ms},
           {"propagate_ms_by_rm", s.propagate_ms_by_rm},
           {"commit_ms_by_rm", s.commit_ms_by_rm}};
    if (s.expected_span) j["expected_span"] = *s.expected_span;
    if (s.error) j["error"] = protocol::encode(*s.error);
    services.push_back(std::move(j));
  }
  json pulls = json::array();
  for (const auto& c : r.pulls) {
    json rms = json::array();
    for (const auto& p : c.rms) {
      rms.push_back({{"domain", p.domain_id},
                     {"modified", p.modified},
                     {"reachable", p.reachable},
                     {"pull_ms", p.elapsed_ms},
                     {"version", p.version}});
    }
    pulls.push_back(
        {{"integrated", c.integrated}, {"integrate_ms", c.integrate_ms}, {"feedback_ms", c.feedback_ms}, {"rms", rms}});
  }
  return json{{"preset", r.preset},
              {"seed", r.seed},
              {"latency_scale", r.latency_scale},
              {"services", services},
              {"pulls", pulls}};
}

json to_json(const ReportSummary& s) {
  json laws = json::array();
  for (const auto& l : s.laws) {
    laws.push_back({{"service", l.service},
                    {"propagate_sum_ms", l.propagate_expected_ms},
                    {"propagate_measured_ms", l.propagate_measured_ms},
                    {"propagate_ok", l.propagate_ok},
                    {"commit_max_ms", l.commit_expected_ms},
                    {"commit_measured_ms", l.commit_measured_ms},
                    {"commit_ok", l.commit_ok}});
  }
  json fb = json::array();
  for (const auto& f : s.feedback) {
    fb.push_back({{"expected_ms", f.expected_ms}, {"measured_ms", f.measured_ms}, {"ok", f.ok}});
  }
  return json{{"committed", s.committed},
              {"failed", s.failed},
              {"span_mismatches", s.span_mismatches},
              {"laws", laws},
              {"feedback", fb},
              {"not_modified_ratio", s.not_modified_ratio}};
}

std::string services_csv(const BatchReport& r) {
  std::ostringstream os;
  os << "name,repeat,instance_id,state,rm_span,expected_span,compute_ms,propagate_ms,commit_ms,wall_ms,error\n";
  for (const auto& s : r.services) {
    os << csv_field(s.name) << ',' << s.repeat << ',' << s.instance_id << ',' << s.state << ',' << s.rm_span()
       << ',' << (s.expected_span ? std::to_string(*s.expected_span) : "") << ',' << fmt_ms(s.compute_ms) << ','
       << fmt_ms(s.propagate_ms) << ',' << fmt_ms(s.commit_ms) << ',' << fmt_ms(s.wall_ms) << ','
       << (s.error ? std::string(code_name(s.error->code)) : "") << '\n';
  }
  return os.str();
}

std::string rm_csv(const BatchReport& r, const Manifest& m) {
  struct Acc {
    size_t services = 0;
    double propagate = 0, commit = 0, pull = 0;
    size_t pulls = 0, not_modified = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& c : m.rms) acc[c.domain_id];
  for (const auto& s : r.services) {
    for (const auto& [d, ms] : s.propagate_ms_by_rm) {
      acc[d].services++;
      acc[d].propagate += ms;
    }
    for (const auto& [d, ms] : s.commit_ms_by_rm) acc[d].commit += ms;
  }
  for (const auto& c : r.pulls) {
    for (const auto& p : c.rms) {
      if (!p.reachable) continue;
      auto& a = acc[p.domain_id];
      ++a.pulls;
      a.pull += p.elapsed_ms;
      if (!p.modified) ++a.not_modified;
    }
  }
  std::ostringstream os;
  os << "domain,role,services,mean_propagate_ms,mean_commit_ms,pulls,mean_pull_ms,not_modified_ratio,"
        "injected_gen_ms,injected_propagate_ms,injected_commit_ms\n";
  for (const auto& [d, a] : acc) {
    const RmConfig& c = m.rm(d);
    double n = a.services ? static_cast<double>(a.services) : 1.0;
    double p = a.pulls ? static_cast<double>(a.pulls) : 1.0;
    os << d << ',' << m.roles.at(d) << ',' << a.services << ',' << fmt_ms(a.propagate / n) << ','
       << fmt_ms(a.commit / n) << ',' << a.pulls << ',' << fmt_ms(a.pull / p) << ','
       << fmt_fixed(a.pulls ? static_cast<double>(a.not_modified) / p : 0.0, 3) << ',' << fmt_ms(c.model_gen_latency_ms)
       << ',' << fmt_ms(c.propagate_latency_ms) << ',' << fmt_ms(c.commit_latency_ms) << '\n';
  }
  return os.str();
}

std::vector<std::string> write_report(const BatchReport& r, const Manifest& m, const std::string& dir,
                                      const std::string& format, const json* graph) {
  if (format != "csv" && format != "json") {
    throw Error(ErrorCode::kInvariantViolation, "report format must be csv or json", {{"format", format}});
  }
  std::vector<std::string> written;
  fs::path base(dir);
  if (format == "csv") {
    write_file(base / "services.csv", services_csv(r), written);
    write_file(base / "rms.csv", rm_csv(r, m), written);
  } else {
    write_file(base / "services.json", to_json(r).dump(2) + "\n", written);
  }
  json laws = to_json(summarize(r, m));
  laws["seed"] = r.seed;
  laws["preset"] = r.preset;
  write_file(base / "laws.json", laws.dump(2) + "\n", written);
  if (graph) write_file(base / "graph.json", graph->dump(2) + "\n", written);
  return written;
}

// --- audit ---------------------------------------------------------------------------------------

std::vector<Violation> audit_domain(const DomainModel& model, const std::vector<Allocation>& allocations,
                                    double overbook_factor, int64_t now) {
  std::vector<Violation> out;
  std::map<std::string, std::vector<const Allocation*>> by_port;
  for (const auto& a : allocations) {
    const Port* p = model.find_port(a.segment.port_urn);
    if (!p) {
      out.push_back({"unknown-port", a.segment.port_urn.str(), "allocation " + a.segment.connection_id});
      continue;
    }
    if (!p->labels.contains(a.segment.vlan)) {
      out.push_back({"bad-label", p->urn.str(), "vlan " + std::to_string(a.segment.vlan)});
    }
    if (a.state == AllocationState::kHeld && a.hold_expires_at && *a.hold_expires_at <= now) {
      out.push_back({"residual-hold", p->urn.str(), "expired hold of " + a.segment.connection_id});
    }
    by_port[p->urn.str()].push_back(&a);
  }
  for (const auto& [urn, list] : by_port) {
    const Port* p = model.find_port(Urn(urn));
    std::set<int64_t> points;
    for (const auto* a : list) points.insert(a->segment.interval.start);
    for (int64_t t : points) {
      int64_t g = 0, s = 0;
      for (const auto* a : list) {
        if (a->segment.interval.start > t || a->segment.interval.end <= t) continue;
        if (a->segment.qos_class == QosClass::kGuaranteedCapped) g += a->segment.bandwidth;
        if (a->segment.qos_class == QosClass::kSoftCapped) s += a->segment.bandwidth;
      }
      auto soft_share = static_cast<int64_t>(std::ceil(static_cast<double>(s) / overbook_factor));
      if (g + soft_share > p->reservable) {
        out.push_back({"overbooked", urn,
                       "at " + std::to_string(t) + ": guaranteed " + std::to_string(g) + " soft " + std::to_string(s) +
                           " reservable " + std::to_string(p->reservable)});
      }
    }
    for (size_t i = 0; i < list.size(); ++i) {
      for (size_t j = i + 1; j < list.size(); ++j) {
        const auto& x = list[i]->segment;
        const auto& y = list[j]->segment;
        if (x.connection_id != y.connection_id && x.vlan == y.vlan && x.interval.overlaps(y.interval)) {
          out.push_back({"vlan-conflict", urn,
                         "vlan " + std::to_string(x.vlan) + " shared by " + x.connection_id + " and " + y.connection_id});
        }
      }
    }
  }
  return out;
}

AuditResult audit(const std::vector<std::shared_ptr<ResourceManager>>& rms,
                  const std::vector<std::shared_ptr<Orchestrator>>& orchestrators) {
  AuditResult res;
  // connection -> domains it should be committed in / may be held in
  std::map<std::string, std::set<std::string>> committed, holding;
  for (const auto& o : orchestrators) {
    for (const auto& id : o->instance_ids()) {
      auto s = o->snapshot(id);
      if (!s || !s->design) continue;
      bool is_committed = s->state == ServiceState::kCommitted;
      bool may_hold = s->state == ServiceState::kReserved || s->state == ServiceState::kPropagating ||
                      s->state == ServiceState::kCommitting;
      if (is_committed) ++res.committed_services;
      for (const auto& c : s->design->connections) {
        for (const auto& d : c.domains) {
          if (is_committed) committed[c.connection_id].insert(d);
          if (may_hold) holding[c.connection_id].insert(d);
        }
      }
    }
  }
  std::map<std::string, std::set<std::string>> seen_committed;
  for (const auto& rm : rms) {
    rm->sweep();
    auto reply = rm->get_model(std::nullopt);
    auto allocs = rm->allocations();
    res.allocations += allocs.size();
    auto v = audit_domain(*reply.model, allocs, rm->config().overbook_factor, rm->now());
    for (const auto& a : allocs) {
      if (a.delta_id == "injected") continue;
      const auto& cid = a.segment.connection_id;
      const std::string& dom = rm->domain_id();
      if (a.state == AllocationState::kCommitted) {
        if (!committed.count(cid) || !committed[cid].count(dom)) {
          v.push_back({"orphan", a.segment.port_urn.str(), "committed allocation of " + cid + " has no committed service"});
        } else {
          seen_committed[cid].insert(dom);
        }
      } else if (!holding.count(cid) || !holding[cid].count(dom)) {
        v.push_back({"leak", a.segment.port_urn.str(), "held allocation of " + cid + " has no reserving service"});
      }
    }
    res.violations.insert(res.violations.end(), v.begin(), v.end());
  }
  for (const auto& [cid, doms] : committed) {
    for (const auto& d : doms) {
      if (!seen_committed[cid].count(d)) {
        res.violations.push_back({"missing", d, "committed connection " + cid + " has no allocation in " + d});
      }
    }
  }
  return res;
}

AuditResult audit(const Fabric& fabric) {
  std::vector<std::shared_ptr<ResourceManager>> rms;
  for (const auto& [id, rm] : fabric.rms()) rms.push_back(rm);
  return audit(rms, {fabric.orchestrator()});
}

json to_json(const AuditResult& a) {
  json v = json::array();
  for (const auto& x : a.violations) v.push_back({{"kind", x.kind}, {"urn", x.urn}, {"detail", x.detail}});
  return json{{"ok", a.ok()},
              {"allocations", a.allocations},
              {"committed_services", a.committed_services},
              {"violations", v}};
}

// --- conformance ---------------------------------------------------------------------------------

std::unique_ptr<Fabric> reference_fabric(Mbps committed_mbps) {
  TopologySpec spec = preset_spec("baseline8");
  spec.latency_scale = 0;
  Manifest m = gen_topology(spec);
  FabricOptions opt;
  opt.orchestrator = scaled_config(0.01);
  opt.orchestrator.pull_loop = false;
  opt.orchestrator.id_seed = "reference";
  opt.orchestrator.wire_utc_offset_minutes = kReferenceUtcOffset;
  opt.clock = std::make_shared<ManualClock>(kReferenceNow);
  opt.start = false;
  auto fabric = std::make_unique<Fabric>(m, std::move(opt));
  if (committed_mbps > 0) {
    ReservationSegment s;
    s.connection_id = "background";
    s.port_urn = Urn(m.sites.at("NERSC") + "+eth0");
    s.vlan = m.rm("nersc.gov").nodes.front().ports.front().labels.ranges().front().first;
    s.bandwidth = committed_mbps;
    s.qos_class = QosClass::kGuaranteedCapped;
    s.interval = {kReferenceNow - 3600, kReferenceNow + 30 * 86400};
    fabric->rm("nersc.gov")->inject_allocation(s);
  }
  fabric->orchestrator()->start();
  return fabric;
}

std::map<std::string, std::string> conformance_corpus() {
  auto corpus = protocol::conformance_vectors();
  auto fabric = reference_fabric(0);
  json intent = json::parse(corpus.at("intent/request.json"));
  corpus["intent/response.json"] = protocol::to_pretty(protocol::encode(fabric->api().create(intent)));
  return corpus;
}

std::vector<std::string> write_conformance(const std::string& dir) {
  std::vector<std::string> written;
  for (const auto& [name, body] : conformance_corpus()) write_file(fs::path(dir) / name, body, written);
  return written;
}

}  // namespace sense::harness
