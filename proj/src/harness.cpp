#include "sense/harness.hpp"

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <queue>
#include <random>
#include <set>

#include "sense/error.hpp"
#include "sense/json_util.hpp"

namespace sense::harness {

namespace {

constexpr std::string_view kYear = "2013";

std::string urn(const std::string& domain, const std::string& local) {
  return "urn:ogf:network:" + domain + ":" + std::string(kYear) + ":" + local;
}

struct DomainGraph {
  std::vector<std::string> domains;
  std::map<std::string, std::string> roles;
  std::set<std::pair<std::string, std::string>> links;  // first < second
  std::map<std::string, std::vector<std::string>> dtn_hosts;
  std::map<std::string, std::string> site_of;  // domain -> short site name

  void add_domain(const std::string& d, const std::string& role) {
    domains.push_back(d);
    roles[d] = role;
  }
  bool add_link(const std::string& a, const std::string& b) {
    if (a == b) return false;
    return links.insert(std::minmax(a, b)).second;
  }
  bool connected() const {
    if (domains.empty()) return false;
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [a, b] : links) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::set<std::string> seen{domains.front()};
    std::queue<std::string> q;
    q.push(domains.front());
    while (!q.empty()) {
      auto d = q.front();
      q.pop();
      for (const auto& n : adj[d]) {
        if (seen.insert(n).second) q.push(n);
      }
    }
    return seen.size() == domains.size();
  }
};

void add_port(NodeDesc& node, const std::string& sub, const TopologySpec& spec, bool swap) {
  Port p;
  p.urn = Urn(node.urn.str() + "+" + sub);
  p.capacity = spec.capacity;
  p.reservable = spec.capacity;
  p.labels = spec.labels;
  p.swap_capable = swap;
  node.ports.push_back(std::move(p));
}

Manifest build(const TopologySpec& spec, const DomainGraph& g) {
  if (!g.connected()) {
    throw Error(ErrorCode::kDisconnectedSpec, "generated domain graph is not connected",
                {{"preset", spec.preset}, {"seed", spec.seed}});
  }
  Manifest m;
  m.preset = spec.preset;
  m.seed = spec.seed;
  m.latency_scale = spec.latency_scale;
  m.roles = g.roles;

  std::map<std::string, std::vector<std::string>> neighbours;
  for (const auto& [a, b] : g.links) {
    neighbours[a].push_back(b);
    neighbours[b].push_back(a);
  }
  for (const auto& d : g.domains) {
    RmConfig c;
    c.domain_id = d;
    c.verbosity = spec.verbosity;
    const LatencyProfile& lat = g.roles.at(d) == "network" ? spec.network : spec.dtn;
    c.model_gen_latency_ms = lat.model_gen_s * 1000 * spec.latency_scale;
    c.propagate_latency_ms = lat.propagate_s * 1000 * spec.latency_scale;
    c.commit_latency_ms = lat.commit_s * 1000 * spec.latency_scale;
    c.hold_duration = std::max<int64_t>(10, std::llround(300 * spec.latency_scale));

    NodeDesc sw;
    sw.urn = Urn(urn(d, "switch"));
    sw.kind = NodeKind::kSwitch;
    for (const auto& n : neighbours[d]) add_port(sw, "to_" + n, spec, true);
    if (auto it = g.dtn_hosts.find(d); it != g.dtn_hosts.end()) {
      for (const auto& host : it->second) {
        add_port(sw, host, spec, true);
        NodeDesc dtn;
        dtn.urn = Urn(urn(d, "server+" + host));
        dtn.kind = NodeKind::kDtn;
        add_port(dtn, "eth0", spec, false);
        Link l{sw.ports.back().urn, dtn.ports.back().urn};
        if (l.b < l.a) std::swap(l.a, l.b);
        c.links.push_back(l);
        if (host == it->second.front() && g.site_of.count(d)) m.sites[g.site_of.at(d)] = dtn.urn.str();
        c.nodes.push_back(std::move(dtn));
      }
    }
    for (auto& p : sw.ports) {
      std::string sub = p.urn.str().substr(sw.urn.str().size() + 1);
      if (sub.rfind("to_", 0) == 0) {
        std::string other = sub.substr(3);
        p.alias = Urn(urn(other, "switch+to_" + d));
      }
    }
    c.nodes.insert(c.nodes.begin(), std::move(sw));
    m.node_count += c.nodes.size();
    m.link_count += c.links.size();
    m.rms.push_back(std::move(c));
  }
  m.link_count += g.links.size();
  for (const auto& c : m.rms) validate(c);
  return m;
}

DomainGraph baseline_graph() {
  DomainGraph g;
  for (const char* d : {"es.net", "tb.es.net", "cenic.net"}) g.add_domain(d, "network");
  struct Site {
    const char* name;
    const char* domain;
    const char* host;
    const char* uplink;
  };
  const Site sites[] = {
      {"UMD", "umd.edu", "dtn1.umd.edu", "es.net"},
      {"FNAL", "fnal.gov", "dtn1.fnal.gov", "es.net"},
      {"ANL", "anl.gov", "dtn1.anl.gov", "es.net"},
      {"NERSC", "nersc.gov", "dtm11.nersc.gov", "tb.es.net"},
      {"Caltech", "caltech.edu", "xfer-2.ultralight.org", "cenic.net"},
  };
  for (const auto& s : sites) {
    g.add_domain(s.domain, "endsite");
    g.dtn_hosts[s.domain] = {s.host};
    g.site_of[s.domain] = s.name;
    g.add_link(s.domain, s.uplink);
  }
  g.add_link("tb.es.net", "es.net");
  g.add_link("cenic.net", "es.net");
  return g;
}

std::string two_digits(int i) { return (i < 10 ? "0" : "") + std::to_string(i); }

DomainGraph generated_graph(const TopologySpec& spec) {
  if (spec.transit_domains < 0 || spec.endsite_domains < 0 || spec.transit_domains + spec.endsite_domains < 1 ||
      spec.dtns_per_endsite < 1 || spec.endsite_uplinks < 0 || spec.extra_transit_links < 0 ||
      spec.capacity <= 0 || spec.endsite_uplinks > spec.transit_domains) {
    throw Error(ErrorCode::kInvariantViolation, "topology spec counts are out of range");
  }
  DomainGraph g;
  std::mt19937_64 rng(spec.seed);
  std::vector<std::string> transits;
  for (int i = 1; i <= spec.transit_domains; ++i) {
    transits.push_back("t" + two_digits(i) + ".net");
    g.add_domain(transits.back(), "network");
  }
  for (int i = 0; i + 1 < spec.transit_domains; ++i) g.add_link(transits[i], transits[i + 1]);
  if (spec.transit_domains > 2) g.add_link(transits.back(), transits.front());

  if (spec.transit_domains > 1) {
    std::uniform_int_distribution<int> pick(0, spec.transit_domains - 1);
    int max_chords = spec.transit_domains * (spec.transit_domains - 1) / 2 - static_cast<int>(g.links.size());
    int want = std::min(spec.extra_transit_links, std::max(0, max_chords));
    for (int added = 0; added < want;) {
      int a = pick(rng);
      int b = pick(rng);
      if (g.add_link(transits[a], transits[b])) ++added;
    }
  }
  for (int i = 1; i <= spec.endsite_domains; ++i) {
    std::string site = "site" + two_digits(i);
    std::string d = site + ".edu";
    g.add_domain(d, "endsite");
    g.site_of[d] = site;
    for (int k = 1; k <= spec.dtns_per_endsite; ++k) g.dtn_hosts[d].push_back("dtn" + std::to_string(k) + "." + d);
    std::vector<std::string> ups = transits;
    std::shuffle(ups.begin(), ups.end(), rng);
    for (int k = 0; k < spec.endsite_uplinks; ++k) g.add_link(d, ups[k]);
  }
  return g;
}

int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(ErrorCode::kTransport, "socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  int port = -1;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0 &&
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
    port = ntohs(addr.sin_port);
  }
  ::close(fd);
  if (port <= 0) throw Error(ErrorCode::kTransport, "no free port");
  return port;
}

// Forwards the northbound API to an in-process orchestrator.
class LocalApi final : public OrchestratorApi {
 public:
  explicit LocalApi(std::shared_ptr<Orchestrator> o) : o_(std::move(o)) {}
  protocol::ServiceResponse create(const json& i) override { return o_->create(i); }
  protocol::ServiceResponse negotiate(const std::string& id, const json& i) override {
    return o_->negotiate(id, i);
  }
  protocol::ServiceResponse reserve(const std::string& id) override { return o_->reserve(id); }
  protocol::ServiceResponse commit(const std::string& id, bool async) override { return o_->commit(id, async); }
  protocol::ServiceResponse cancel(const std::string& id) override { return o_->cancel(id); }
  protocol::ServiceStatus status(const std::string& id) override { return o_->status(id); }

 private:
  std::shared_ptr<Orchestrator> o_;
};

}  // namespace

// --- topology -------------------------------------------------------------------------------

TopologySpec preset_spec(const std::string& name, uint64_t seed) {
  TopologySpec s;
  s.preset = name;
  s.seed = seed;
  if (name == "baseline8") return s;
  if (name == "scaleout67") {
    s.transit_domains = 42;
    s.endsite_domains = 25;
    s.endsite_uplinks = 2;
    s.extra_transit_links = 90;
    return s;
  }
  throw Error(ErrorCode::kInvariantViolation, "unknown preset '" + name + "'", {{"preset", name}});
}

const RmConfig& Manifest::rm(const std::string& domain) const {
  for (const auto& c : rms) {
    if (c.domain_id == domain) return c;
  }
  throw Error(ErrorCode::kUnknownUrn, "no RM for domain " + domain, {{"domain", domain}});
}

Manifest gen_topology(const TopologySpec& spec) {
  if (spec.latency_scale < 0) throw Error(ErrorCode::kInvariantViolation, "latency scale must be >= 0");
  if (spec.preset == "baseline8") return build(spec, baseline_graph());
  return build(spec, generated_graph(spec));
}

json to_json(const Manifest& m) {
  json rms = json::array();
  for (const auto& c : m.rms) rms.push_back(to_json(c));
  return json{{"preset", m.preset},         {"seed", m.seed},   {"latency_scale", m.latency_scale},
              {"roles", m.roles},           {"sites", m.sites}, {"node_count", m.node_count},
              {"link_count", m.link_count}, {"rms", rms}};
}

Manifest manifest_from_json(const json& j) {
  ObjectReader r(j, "manifest");
  Manifest m;
  m.preset = r.required<std::string>("preset");
  m.seed = r.required<uint64_t>("seed");
  m.latency_scale = r.required<double>("latency_scale");
  m.roles = r.required<std::map<std::string, std::string>>("roles");
  m.sites = r.required<std::map<std::string, std::string>>("sites");
  m.node_count = r.required<size_t>("node_count");
  m.link_count = r.required<size_t>("link_count");
  for (const auto& c : r.raw("rms")) m.rms.push_back(rm_config_from_json(c));
  r.finish();
  return m;
}

// --- fabric ---------------------------------------------------------------------------------

OrchestratorConfig scaled_config(double latency_scale) {
  OrchestratorConfig c;
  double s = latency_scale > 0 ? latency_scale : 1.0;
  c.pull_period_s = 30 * s;
  c.poll_interval_s = 5 * s;
  c.commit_guard_s = 2 * s;
  c.commit_timeout_s = 600 * s;
  c.rollback.base_ms = 1000 * s;
  c.rollback.cap_ms = 60000 * s;
  return c;
}

Fabric::Fabric(const Manifest& manifest, FabricOptions options)
    : manifest_(manifest), options_(std::move(options)) {
  clock_ = options_.clock ? options_.clock : std::make_shared<SystemClock>();
  for (const auto& c : manifest_.rms) rms_[c.domain_id] = std::make_shared<ResourceManager>(c, clock_);
  std::string nbi_base;
  int nbi_port = 0;
  if (options_.http) {
    for (auto& [id, rm] : rms_) {
      servers_[id] = std::make_unique<RmServer>(rm);
      servers_[id]->start();
    }
    nbi_port = free_port();
    nbi_base = "http://127.0.0.1:" + std::to_string(nbi_port);
  }
  orch_ = std::make_shared<Orchestrator>(options_.orchestrator, clients(nbi_base), clock_);
  if (options_.http) {
    nbi_ = std::make_unique<OrchestratorServer>(orch_);
    nbi_->start("127.0.0.1", nbi_port);
    api_ = std::make_unique<HttpOrchestratorClient>(nbi_->url());
  } else {
    api_ = std::make_unique<LocalApi>(orch_);
  }
  if (options_.start) orch_->start();
}

Fabric::~Fabric() { stop(); }

void Fabric::stop() {
  if (orch_) orch_->stop();
  if (nbi_) nbi_->stop();
  for (auto& [id, s] : servers_) s->stop();
}

std::shared_ptr<ResourceManager> Fabric::rm(const std::string& domain) const {
  auto it = rms_.find(domain);
  if (it == rms_.end()) throw Error(ErrorCode::kUnknownUrn, "no RM for domain " + domain, {{"domain", domain}});
  return it->second;
}

std::vector<std::shared_ptr<RmClient>> Fabric::clients(const std::string& callback_base) const {
  std::vector<std::shared_ptr<RmClient>> out;
  for (const auto& [id, rm] : rms_) {
    if (options_.http) {
      std::string cb = callback_base.empty() ? "" : callback_base + "/sense-o/v1/callbacks/" + id;
      out.push_back(std::make_shared<HttpRmClient>(id, servers_.at(id)->url(), rm->config().token, cb));
    } else {
      out.push_back(std::make_shared<LocalRmClient>(rm));
    }
  }
  return out;
}

std::map<std::string, std::string> Fabric::endpoints() const {
  std::map<std::string, std::string> out;
  for (const auto& [id, s] : servers_) out[id] = s->url();
  if (nbi_) out["orchestrator"] = nbi_->url();
  return out;
}

// --- batches --------------------------------------------------------------------------------

void validate(const BatchSpec& b) {
  if (b.concurrency < 1) throw Error(ErrorCode::kInvariantViolation, "batch concurrency must be >= 1");
  if (b.repeat < 0) throw Error(ErrorCode::kInvariantViolation, "batch repeat must be >= 0");
  for (const auto& t : b.intents) {
    if (t.sites.size() < 2) {
      throw Error(ErrorCode::kInvariantViolation, "intent template '" + t.name + "' needs two sites");
    }
    if (t.mbps <= 0) throw Error(ErrorCode::kInvariantViolation, "intent template bandwidth must be positive");
  }
}

BatchSpec table1_batch(Mbps mbps) {
  BatchSpec b;
  b.concurrency = 6;
  b.intents = {
      {"P2P UMD - FNAL", {"UMD", "FNAL"}, mbps, 3},
      {"P2P NERSC - FNAL", {"NERSC", "FNAL"}, mbps, 4},
      {"P2P NERSC - Caltech", {"NERSC", "Caltech"}, mbps, 5},
      {"MP NERSC + Caltech + ANL", {"NERSC", "Caltech", "ANL"}, mbps, 6},
      {"MP NERSC + Caltech + ANL + FNAL", {"NERSC", "Caltech", "ANL", "FNAL"}, mbps, 7},
      {"MP NERSC + Caltech + ANL + FNAL + UMD", {"NERSC", "Caltech", "ANL", "FNAL", "UMD"}, mbps, 8},
  };
  return b;
}

BatchSpec random_batch(const Manifest& m, size_t count, uint64_t seed, Mbps mbps) {
  std::vector<std::string> sites;
  for (const auto& [name, u] : m.sites) sites.push_back(name);
  if (sites.size() < 2) throw Error(ErrorCode::kInvariantViolation, "manifest has fewer than two sites");
  std::mt19937_64 rng(seed);
  BatchSpec b;
  b.concurrency = static_cast<int>(std::max<size_t>(1, count));
  for (size_t i = 0; i < count; ++i) {
    size_t k = (i % 5 == 4 && sites.size() >= 3) ? 3 : 2;
    std::vector<std::string> pick = sites;
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(k);
    std::string name = (k == 2 ? "P2P " : "MP ") + pick[0];
    for (size_t j = 1; j < k; ++j) name += (k == 2 ? " - " : " + ") + pick[j];
    b.intents.push_back({name, pick, mbps, std::nullopt});
  }
  return b;
}

json intent_for(const IntentTemplate& t, const Manifest& m) {
  protocol::ConnectionDoc c;
  c.name = "connection 1";
  for (const auto& s : t.sites) {
    auto it = m.sites.find(s);
    c.terminals.push_back({it == m.sites.end() ? s : it->second, protocol::Label{std::string("any")}});
  }
  c.bandwidth = protocol::BandwidthDoc{"guaranteedCapped", t.mbps, "mbps"};
  protocol::IntentDocument d;
  d.service_type = t.sites.size() > 2 ? "Multi-Point VLAN Bridge" : "Multi-Path P2P VLAN";
  d.service_alias = t.name;
  d.connections = {c};
  return protocol::encode(d);
}

namespace {

ServiceReport drive(const IntentTemplate& t, int repeat, OrchestratorApi& api, const Manifest& m) {
  ServiceReport rep;
  rep.name = t.name;
  rep.repeat = repeat;
  rep.expected_span = t.expected_span;
  double t0 = steady_ms();
  try {
    auto r = api.create(intent_for(t, m));
    rep.instance_id = r.instance_id;
    if (r.state == "computed") r = api.reserve(r.instance_id);
    if (r.state == "reserved") r = api.commit(r.instance_id, false);
    auto st = api.status(rep.instance_id);
    rep.state = st.service.state;
    rep.error = st.service.error;
    if (st.service.design) rep.domains = design_from_json(*st.service.design).domains;
    for (const auto& [k, v] : st.phase_timings_ms) {
      if (k == "compute_ms") rep.compute_ms = v;
      else if (k == "propagate_ms") rep.propagate_ms = v;
      else if (k == "commit_ms") rep.commit_ms = v;
      else if (k.rfind("propagate_ms:", 0) == 0) rep.propagate_ms_by_rm[k.substr(13)] = v;
      else if (k.rfind("commit_ms:", 0) == 0) rep.commit_ms_by_rm[k.substr(10)] = v;
    }
  } catch (const Error& e) {
    rep.state = rep.state.empty() ? "error" : rep.state;
    rep.error = protocol::envelope_from(e);
  }
  rep.wall_ms = steady_ms() - t0;
  return rep;
}

}  // namespace

BatchReport run_batch(const BatchSpec& batch, OrchestratorApi& api, const Manifest& m) {
  validate(batch);
  BatchReport out;
  out.preset = m.preset;
  out.seed = m.seed;
  out.latency_scale = m.latency_scale;
  for (int rep = 0; rep < batch.repeat; ++rep) {
    std::vector<ServiceReport> results(batch.intents.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t i; (i = next++) < batch.intents.size();) results[i] = drive(batch.intents[i], rep, api, m);
    };
    std::vector<std::thread> threads;
    size_t n = std::min<size_t>(batch.concurrency, batch.intents.size());
    for (size_t i = 0; i < n; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    for (auto& r : results) {
      if (!r.error && r.state != "committed") spdlog::warn("batch: {} ended {}", r.name, r.state);
      out.services.push_back(std::move(r));
    }
  }
  return out;
}

BatchReport run_batch(const BatchSpec& batch, Fabric& fabric) {
  BatchReport r = run_batch(batch, fabric.api(), fabric.manifest());
  r.pulls = fabric.orchestrator()->pull_history();
  return r;
}

}  // namespace sense::harness
