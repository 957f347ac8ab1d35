#include "sense/orchestrator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <filesystem>
#include <future>
#include <limits>
#include <set>
#include <sstream>

#include "sense/error.hpp"
#include "sense/ids.hpp"
#include "sense/json_util.hpp"

namespace sense {

namespace {

constexpr std::array<std::pair<ServiceState, std::string_view>, 10> kStateNames{{
    {ServiceState::kCreated, "created"},
    {ServiceState::kComputed, "computed"},
    {ServiceState::kComputeFailed, "compute_failed"},
    {ServiceState::kPropagating, "propagating"},
    {ServiceState::kReserved, "reserved"},
    {ServiceState::kCommitting, "committing"},
    {ServiceState::kCommitted, "committed"},
    {ServiceState::kFailed, "failed"},
    {ServiceState::kExpired, "expired"},
    {ServiceState::kCancelled, "cancelled"},
}};

int rm_state_rank(const std::string& s) {
  if (s == "propagated") return 0;
  if (s == "committing") return 1;
  if (s == "committed" || s == "failed" || s == "expired" || s == "released") return 2;
  return -1;
}

bool rm_state_terminal(const std::string& s) { return rm_state_rank(s) == 2; }

void sleep_s(double s) {
  if (s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

[[noreturn]] void bad_state(const ServiceInstance& s, const std::string& op) {
  throw Error(ErrorCode::kBadState,
              op + " not allowed in state " + std::string(to_string(s.state)),
              {{"instance_id", s.instance_id}, {"state", std::string(to_string(s.state))}});
}

// A counter-proposal may only change vlans, must keep one vlan per connection
// in the domain, and may only break vlan continuity across swap-capable
// boundaries.
bool accept_counter(ServiceDesign& design, const ModelDelta& ours, const ModelDelta& theirs,
                    const UnionModel& u) {
  if (ours.target_domain != theirs.target_domain || ours.reduction != theirs.reduction ||
      ours.addition.size() != theirs.addition.size()) {
    return false;
  }
  auto key = [](const ReservationSegment& s) {
    return std::tie(s.connection_id, s.port_urn, s.interval, s.bandwidth, s.qos_class);
  };
  auto a = ours.addition;
  auto b = theirs.addition;
  auto less = [&](const ReservationSegment& x, const ReservationSegment& y) { return key(x) < key(y); };
  std::sort(a.begin(), a.end(), less);
  std::sort(b.begin(), b.end(), less);
  std::map<std::string, int> proposed;
  for (size_t i = 0; i < a.size(); ++i) {
    if (key(a[i]) != key(b[i])) return false;
    auto [it, fresh] = proposed.emplace(b[i].connection_id, b[i].vlan);
    if (!fresh && it->second != b[i].vlan) return false;
    auto idx = u.port_index(b[i].port_urn);
    if (!idx || !u.port(*idx).port->labels.contains(b[i].vlan)) return false;
  }
  const std::string& dom = ours.target_domain;
  for (auto& c : design.connections) {
    auto it = proposed.find(c.connection_id);
    if (it == proposed.end()) continue;
    for (const auto& [pa, pb] : c.edges) {
      std::string da(pa.domain()), db(pb.domain());
      if (da == db || (da != dom && db != dom)) continue;
      const Urn& mine = da == dom ? pa : pb;
      const Urn& other = da == dom ? pb : pa;
      int other_vlan = c.vlans.at(da == dom ? db : da);
      if (other_vlan == it->second) continue;
      auto mi = u.port_index(mine);
      auto oi = u.port_index(other);
      if (!mi || !oi || !u.port(*mi).port->swap_capable || !u.port(*oi).port->swap_capable) return false;
    }
  }
  for (auto& c : design.connections) {
    if (auto it = proposed.find(c.connection_id); it != proposed.end()) c.vlans[dom] = it->second;
  }
  return true;
}

// Minimal counting gate bounding in-flight requests per RM.
class Gate {
 public:
  explicit Gate(int n) : free_(n) {}
  void acquire() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lk(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int free_;
};

// Wraps a client so at most N requests are in flight.
class GatedClient final : public RmClient {
 public:
  GatedClient(std::shared_ptr<RmClient> inner, int n) : inner_(std::move(inner)), gate_(n) {}
  template <typename F>
  auto run(F&& f) {
    gate_.acquire();
    struct Release {
      Gate& g;
      ~Release() { g.release(); }
    } r{gate_};
    return f();
  }
  const std::string& domain_id() const override { return inner_->domain_id(); }
  ModelReply get_model(std::optional<int64_t> ims) override {
    return run([&] { return inner_->get_model(ims); });
  }
  protocol::PropagateResponse propagate(const ModelDelta& d) override {
    return run([&] { return inner_->propagate(d); });
  }
  protocol::DeltaStatusDoc commit(const std::string& id) override {
    return run([&] { return inner_->commit(id); });
  }
  protocol::DeltaStatusDoc status(const std::string& id) override {
    return run([&] { return inner_->status(id); });
  }
  std::string subscribe(NotificationSink sink) override { return inner_->subscribe(std::move(sink)); }
  std::vector<Allocation> allocations() override { return inner_->allocations(); }

 private:
  std::shared_ptr<RmClient> inner_;
  Gate gate_;
};

}  // namespace

std::string_view to_string(ServiceState s) {
  for (const auto& [st, name] : kStateNames) {
    if (st == s) return name;
  }
  return "";
}

ServiceState service_state_from_string(std::string_view s) {
  for (const auto& [st, name] : kStateNames) {
    if (name == s) return st;
  }
  throw Error(ErrorCode::kMalformedDocument, "unknown service state '" + std::string(s) + "'");
}

bool is_terminal(ServiceState s) {
  return s == ServiceState::kCommitted || s == ServiceState::kFailed || s == ServiceState::kExpired ||
         s == ServiceState::kCancelled || s == ServiceState::kComputeFailed;
}

// --- instance records ---------------------------------------------------------------

protocol::ServiceResponse ServiceInstance::response() const {
  protocol::ServiceResponse r;
  r.instance_id = instance_id;
  r.revision = revision;
  r.state = std::string(to_string(state));
  if (design) r.design = to_json(*design);
  r.answer = answer;
  r.error = error;
  return r;
}

protocol::ServiceStatus ServiceInstance::status() const {
  return {response(), rm_states, rm_delta_ids, phase_timings_ms, hold_expires_at};
}

json to_json(const ServiceInstance& s) {
  json j{{"instance_id", s.instance_id},
         {"revision", s.revision},
         {"state", to_string(s.state)},
         {"intent", s.intent_doc},
         {"rm_states", s.rm_states},
         {"rm_delta_ids", s.rm_delta_ids},
         {"phase_timings_ms", s.phase_timings_ms},
         {"negotiation_rounds", s.negotiation_rounds},
         {"computed_at", s.computed_at}};
  if (s.design) j["design"] = to_json(*s.design);
  if (s.answer) j["answer"] = protocol::encode(*s.answer);
  if (s.error) j["error"] = protocol::encode(*s.error);
  if (s.hold_expires_at) j["hold_expires_at"] = *s.hold_expires_at;
  return j;
}

ServiceInstance service_from_json(const json& j) {
  ObjectReader r(j, "service record");
  ServiceInstance s;
  s.instance_id = r.required<std::string>("instance_id");
  s.revision = r.required<int64_t>("revision");
  s.state = service_state_from_string(r.required<std::string>("state"));
  s.intent_doc = r.raw("intent");
  s.rm_states = r.required<std::map<std::string, std::string>>("rm_states");
  s.rm_delta_ids = r.required<std::map<std::string, std::string>>("rm_delta_ids");
  s.phase_timings_ms = r.required<std::map<std::string, double>>("phase_timings_ms");
  s.negotiation_rounds = r.required<int>("negotiation_rounds");
  s.computed_at = r.required<int64_t>("computed_at");
  if (const json* d = r.raw_optional("design")) s.design = design_from_json(*d);
  if (const json* a = r.raw_optional("answer")) s.answer = protocol::decode_query_response(*a);
  if (const json* e = r.raw_optional("error")) s.error = protocol::decode_error(*e);
  s.hold_expires_at = r.optional<int64_t>("hold_expires_at");
  r.finish();
  return s;
}

// --- construction / lifecycle --------------------------------------------------------------

Orchestrator::Orchestrator(OrchestratorConfig config, std::vector<std::shared_ptr<RmClient>> rms,
                           std::shared_ptr<const Clock> clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
  if (config_.pull_period_s <= 0 || config_.poll_interval_s <= 0) {
    throw Error(ErrorCode::kInvariantViolation, "pull_period and poll_interval must be positive");
  }
  for (auto& rm : rms) {
    std::string id = rm->domain_id();
    DomainState ds;
    ds.client = std::make_shared<GatedClient>(std::move(rm), std::max(1, config_.max_requests_per_rm));
    if (!domains_.emplace(id, std::move(ds)).second) {
      throw Error(ErrorCode::kDuplicateDomain, "RM for " + id + " registered twice", {{"domain", id}});
    }
  }
  if (!config_.journal_path.empty()) {
    load_journal();
    journal_.open(config_.journal_path, std::ios::app);
    if (!journal_) {
      throw Error(ErrorCode::kCorruptJournal, "cannot open journal " + config_.journal_path,
                  {{"path", config_.journal_path}});
    }
  }
}

Orchestrator::~Orchestrator() { stop(); }

void Orchestrator::start() {
  if (running_.exchange(true)) return;
  pull_once();
  if (config_.use_notify) {
    for (auto& [id, ds] : domains_) {
      try {
        ds.client->subscribe([this](const protocol::NotificationEvent& ev) { handle_notification(ev); });
      } catch (const Error& e) {
        spdlog::warn("orchestrator: subscribe to {} failed: {}", id, e.what());
      }
    }
  }
  if (config_.pull_loop) {
    pull_thread_ = std::thread([this] {
      std::unique_lock lk(loop_mu_);
      while (running_) {
        loop_cv_.wait_for(lk, std::chrono::duration<double>(config_.pull_period_s));
        if (!running_) break;
        lk.unlock();
        try {
          pull_once();
        } catch (const std::exception& e) {
          spdlog::warn("orchestrator: pull cycle failed: {}", e.what());
        }
        lk.lock();
      }
    });
  }

  // Finish whatever the journal left in flight.
  std::vector<std::shared_ptr<Entry>> resume;
  {
    std::lock_guard lk(data_mu_);
    for (auto& [id, e] : instances_) {
      if (e->data.state == ServiceState::kCommitting || e->data.state == ServiceState::kPropagating) {
        resume.push_back(e);
      }
    }
  }
  for (auto& e : resume) {
    std::lock_guard lk(workers_mu_);
    workers_.emplace_back([this, e] {
      std::lock_guard op(e->op);
      ServiceState st;
      {
        std::lock_guard lk(data_mu_);
        st = e->data.state;
      }
      if (st == ServiceState::kCommitting) {
        run_commit(e);
        return;
      }
      ServiceInstance snap;
      {
        std::lock_guard lk(data_mu_);
        snap = e->data;
      }
      release(snap.instance_id + "/" + std::to_string(snap.revision) + "/recover",
              held_connections(snap, false));
      update(*e, [](ServiceInstance& s) {
        s.state = ServiceState::kFailed;
        s.error = protocol::ErrorEnvelope{ErrorCode::kBadState, {{"reason", "interrupted during reserve"}}};
      });
    });
  }
}

void Orchestrator::stop() {
  running_ = false;
  loop_cv_.notify_all();
  if (pull_thread_.joinable()) pull_thread_.join();
  std::vector<std::thread> ws;
  {
    std::lock_guard lk(workers_mu_);
    ws.swap(workers_);
  }
  for (auto& t : ws) {
    if (t.joinable()) t.join();
  }
}

// --- model pull ------------------------------------------------------------------------------

PullCycle Orchestrator::pull_once() {
  std::lock_guard op(pull_op_mu_);
  std::vector<std::pair<std::string, std::shared_ptr<RmClient>>> targets;
  std::map<std::string, std::optional<int64_t>> ims;
  {
    std::lock_guard lk(union_mu_);
    for (auto& [id, ds] : domains_) {
      targets.emplace_back(id, ds.client);
      ims[id] = ds.model ? std::optional<int64_t>(ds.last_modified) : std::nullopt;
    }
  }
  std::vector<std::future<std::pair<PullRecord, std::optional<ModelReply>>>> futs;
  for (auto& [id, client] : targets) {
    futs.push_back(std::async(std::launch::async, [id = id, client = client, since = ims[id]] {
      PullRecord rec;
      rec.domain_id = id;
      double t0 = steady_ms();
      std::optional<ModelReply> reply;
      try {
        reply = client->get_model(since);
        rec.modified = reply->model.has_value();
        rec.version = reply->version;
      } catch (const std::exception& e) {
        rec.reachable = false;
        spdlog::warn("orchestrator: pull from {} failed: {}", id, e.what());
      }
      rec.elapsed_ms = steady_ms() - t0;
      return std::make_pair(rec, reply);
    }));
  }
  PullCycle cycle;
  bool changed = false;
  {
    std::lock_guard lk(union_mu_);
    int64_t now = clock_->now();
    for (auto& f : futs) {
      auto [rec, reply] = f.get();
      auto& ds = domains_.at(rec.domain_id);
      if (!rec.reachable) {
        ds.stale = true;
      } else {
        ds.stale = false;
        ds.refreshed_at = now;
        ds.last_modified = reply->last_modified;
        if (reply->model) {
          ds.model = std::move(reply->model);
          changed = true;
        }
      }
      cycle.rms.push_back(rec);
    }
    if (changed || !union_) {
      double t0 = steady_ms();
      std::vector<DomainModel> models;
      for (const auto& [id, ds] : domains_) {
        if (ds.model) models.push_back(*ds.model);
      }
      union_ = integrate_models(std::move(models), config_.overbook_factor);
      cycle.integrated = true;
      cycle.integrate_ms = steady_ms() - t0;
    }
    double slowest = 0;
    for (const auto& r : cycle.rms) slowest = std::max(slowest, r.elapsed_ms);
    cycle.feedback_ms = slowest + cycle.integrate_ms;
    pulls_.push_back(cycle);
  }
  return cycle;
}

std::vector<PullCycle> Orchestrator::pull_history() const {
  std::lock_guard lk(union_mu_);
  return pulls_;
}

std::shared_ptr<const UnionModel> Orchestrator::union_model() const {
  std::lock_guard lk(union_mu_);
  return union_;
}

std::shared_ptr<const UnionModel> Orchestrator::current_union() {
  if (auto u = union_model()) return u;
  pull_once();
  return union_model();
}

std::map<std::string, int64_t> Orchestrator::staleness() const {
  std::lock_guard lk(union_mu_);
  std::map<std::string, int64_t> out;
  int64_t now = clock_->now();
  for (const auto& [id, ds] : domains_) out[id] = ds.model ? now - ds.refreshed_at : -1;
  return out;
}

RmClient& Orchestrator::client(const std::string& domain) const {
  std::lock_guard lk(union_mu_);
  auto it = domains_.find(domain);
  if (it == domains_.end()) {
    throw Error(ErrorCode::kUnknownUrn, "no RM registered for domain " + domain, {{"domain", domain}});
  }
  return *it->second.client;
}

// --- instances -----------------------------------------------------------------------------------

std::string Orchestrator::next_id() {
  std::lock_guard lk(data_mu_);
  uint64_t n = ++id_counter_;
  if (config_.id_seed) return name_uuid(*config_.id_seed + "/" + std::to_string(n));
  return random_uuid();
}

std::shared_ptr<Orchestrator::Entry> Orchestrator::entry(const std::string& id) const {
  std::lock_guard lk(data_mu_);
  auto it = instances_.find(id);
  if (it == instances_.end()) {
    throw Error(ErrorCode::kUnknownInstance, "unknown service instance " + id, {{"instance_id", id}});
  }
  return it->second;
}

void Orchestrator::update(Entry& e, const std::function<void(ServiceInstance&)>& f) {
  ServiceInstance snap;
  {
    std::lock_guard lk(data_mu_);
    f(e.data);
    snap = e.data;
  }
  data_cv_.notify_all();
  persist(snap);
}

void Orchestrator::persist(const ServiceInstance& s) {
  if (config_.journal_path.empty()) return;
  std::string line = to_json(s).dump();
  std::lock_guard lk(journal_mu_);
  journal_ << line << '\n';
  journal_.flush();
}

void Orchestrator::load_journal() {
  std::ifstream in(config_.journal_path, std::ios::binary);
  if (!in) return;  // fresh start
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  size_t offset = 0;
  while (offset < text.size()) {
    size_t nl = text.find('\n', offset);
    size_t end = nl == std::string::npos ? text.size() : nl;
    std::string_view line(text.data() + offset, end - offset);
    if (!line.empty()) {
      try {
        ServiceInstance s = service_from_json(json::parse(line));
        auto e = std::make_shared<Entry>();
        e->data = std::move(s);
        for (const auto& [dom, delta] : e->data.rm_delta_ids) delta_owner_[delta] = {e->data.instance_id, dom};
        instances_[e->data.instance_id] = e;
      } catch (const std::exception& ex) {
        throw Error(ErrorCode::kCorruptJournal,
                    "journal " + config_.journal_path + " corrupt at byte " + std::to_string(offset),
                    {{"path", config_.journal_path}, {"offset", offset}, {"cause", ex.what()}});
      }
    }
    offset = end + 1;
  }
  id_counter_ = instances_.size();
}

std::vector<std::string> Orchestrator::instance_ids() const {
  std::lock_guard lk(data_mu_);
  std::vector<std::string> out;
  for (const auto& [id, e] : instances_) out.push_back(id);
  return out;
}

std::optional<ServiceInstance> Orchestrator::snapshot(const std::string& id) const {
  std::lock_guard lk(data_mu_);
  auto it = instances_.find(id);
  if (it == instances_.end()) return std::nullopt;
  return it->second->data;
}

bool Orchestrator::wait_settled(const std::string& id, double timeout_s) {
  auto e = entry(id);
  std::unique_lock lk(data_mu_);
  return data_cv_.wait_for(lk, std::chrono::duration<double>(timeout_s), [&] {
    auto st = e->data.state;
    return st != ServiceState::kCommitting && st != ServiceState::kPropagating;
  });
}

void Orchestrator::evaluate(ServiceInstance& s, const json& doc, int64_t now) {
  ServiceIntent intent = normalize_intent(doc, now, config_.default_duration);
  s.intent_doc = doc;
  s.design.reset();
  s.answer.reset();
  s.error.reset();
  auto u = current_union();
  double t0 = steady_ms();
  try {
    if (!intent.queries.empty()) {
      s.answer = answer_queries(intent, *u, now, config_.wire_utc_offset_minutes);
      s.state = ServiceState::kCreated;
    } else {
      ServiceDesign d = compute_design(intent, *u, s.instance_id, in_flight(s.instance_id));
      d.deltas = partition_deltas(d, *u, s.instance_id + "/" + std::to_string(s.revision));
      s.design = std::move(d);
      s.state = ServiceState::kComputed;
    }
  } catch (const Error& e) {
    s.error = protocol::envelope_from(e);
    s.state = intent.queries.empty() ? ServiceState::kComputeFailed : ServiceState::kCreated;
  }
  s.computed_at = now;
  s.phase_timings_ms["compute_ms"] = steady_ms() - t0;
}

std::vector<ReservationSegment> Orchestrator::in_flight(const std::string& except) const {
  std::vector<ReservationSegment> out;
  std::lock_guard lk(data_mu_);
  for (const auto& [id, e] : instances_) {
    const auto& d = e->data;
    if (id == except || !d.design) continue;
    if (d.state != ServiceState::kPropagating && d.state != ServiceState::kReserved &&
        d.state != ServiceState::kCommitting && d.state != ServiceState::kCommitted) {
      continue;
    }
    for (const auto& c : d.design->connections) {
      auto segs = c.segments();
      out.insert(out.end(), segs.begin(), segs.end());
    }
  }
  return out;
}

protocol::ServiceResponse Orchestrator::create(const json& intent) {
  ServiceInstance s;
  s.instance_id = next_id();
  s.revision = 1;
  evaluate(s, intent, clock_->now());
  auto e = std::make_shared<Entry>();
  e->data = s;
  {
    std::lock_guard lk(data_mu_);
    instances_[s.instance_id] = e;
  }
  persist(s);
  return s.response();
}

protocol::ServiceResponse Orchestrator::negotiate(const std::string& id, const json& intent) {
  auto e = entry(id);
  std::lock_guard op(e->op);
  ServiceInstance s = *snapshot(id);
  if (s.state != ServiceState::kCreated && s.state != ServiceState::kComputed &&
      s.state != ServiceState::kComputeFailed) {
    bad_state(s, "negotiate");
  }
  if (s.revision >= config_.max_negotiation_rounds) {
    throw Error(ErrorCode::kTooManyRounds,
                "negotiation limit of " + std::to_string(config_.max_negotiation_rounds) + " reached",
                {{"instance_id", id}, {"revision", s.revision}});
  }
  s.revision += 1;
  s.negotiation_rounds += 1;
  evaluate(s, intent, clock_->now());
  update(*e, [&](ServiceInstance& d) { d = s; });
  return s.response();
}

std::map<std::string, std::vector<std::string>> Orchestrator::held_connections(
    const ServiceInstance& s, bool include_committed) const {
  std::map<std::string, std::vector<std::string>> out;
  if (!s.design) return out;
  for (const auto& [dom, st] : s.rm_states) {
    bool holds = st == "propagated" || st == "committing" || (include_committed && st == "committed");
    if (!holds) continue;
    for (const auto& c : s.design->connections) {
      if (std::find(c.domains.begin(), c.domains.end(), dom) != c.domains.end()) {
        out[dom].push_back(c.connection_id);
      }
    }
  }
  return out;
}

protocol::ServiceResponse Orchestrator::reserve(const std::string& id) {
  auto e = entry(id);
  std::lock_guard op(e->op);
  ServiceInstance s = *snapshot(id);
  if (s.state != ServiceState::kComputed || !s.design) bad_state(s, "reserve");

  auto u = current_union();
  ServiceDesign design = *s.design;
  std::string key = id + "/" + std::to_string(s.revision);
  {
    // Re-plan against this orchestrator's other in-flight services so
    // concurrent reserves do not race each other for the same labels.
    std::lock_guard plan(plan_mu_);
    auto others = in_flight(id);
    if (!design_fits(design, *u, others)) {
      try {
        ServiceIntent intent = normalize_intent(s.intent_doc, s.computed_at, config_.default_duration);
        ServiceDesign fresh = compute_design(intent, *u, id, others);
        fresh.deltas = partition_deltas(fresh, *u, key);
        design = std::move(fresh);
        spdlog::debug("orchestrator: {} re-planned around in-flight services", id);
      } catch (const Error& err) {
        spdlog::debug("orchestrator: {} keeps its design, re-plan failed: {}", id, err.what());
      }
    }
    update(*e, [&](ServiceInstance& d) {
      d.state = ServiceState::kPropagating;
      d.design = design;
    });
  }
  int rounds = 0;
  std::optional<Error> failure;
  std::string failed_domain;
  std::optional<int64_t> earliest;
  std::map<std::string, double> per_rm;
  double t0 = steady_ms();

  for (size_t i = 0; i < design.deltas.size() && !failure; ++i) {
    ModelDelta delta = design.deltas[i];
    const std::string dom = delta.target_domain;
    int delta_rounds = 0;
    for (;;) {
      double t = steady_ms();
      protocol::PropagateResponse resp;
      try {
        resp = client(dom).propagate(delta);
      } catch (const Error& err) {
        per_rm[dom] += steady_ms() - t;
        failure = err;
        failed_domain = dom;
        break;
      }
      per_rm[dom] += steady_ms() - t;
      if (resp.accepted) {
        design.deltas[i] = delta;
        if (resp.hold_expires_at) earliest = std::min(earliest.value_or(*resp.hold_expires_at), *resp.hold_expires_at);
        {
          std::lock_guard lk(data_mu_);
          delta_owner_[delta.delta_id] = {id, dom};
        }
        update(*e, [&](ServiceInstance& d) {
          d.rm_states[dom] = "propagated";
          d.rm_delta_ids[dom] = delta.delta_id;
        });
        break;
      }
      ++rounds;
      if (++delta_rounds > config_.max_negotiation_rounds) {
        failure = Error(ErrorCode::kTooManyRounds, "negotiation with " + dom + " did not converge",
                        {{"domain", dom}});
        failed_domain = dom;
        break;
      }
      if (!accept_counter(design, delta, resp.delta, *u)) {
        failure = Error(ErrorCode::kVlanConflict, dom + " counter-proposed a vlan the design cannot carry",
                        {{"domain", dom}});
        failed_domain = dom;
        break;
      }
      spdlog::debug("orchestrator: {} accepted counter-proposal from {}", id, dom);
      delta = resp.delta;
      delta.delta_id = name_uuid(key + "/" + dom + "/round" + std::to_string(delta_rounds));
    }
  }
  double total = steady_ms() - t0;

  if (failure) {
    ServiceInstance snap = *snapshot(id);
    release(key + "/rollback", held_connections(snap, false));
    json detail = failure->detail().is_object() ? failure->detail() : json::object();
    detail["domain"] = failed_domain;
    detail["cause"] = std::string(code_name(failure->code()));
    update(*e, [&](ServiceInstance& d) {
      d.state = ServiceState::kFailed;
      d.negotiation_rounds += rounds;
      d.error = protocol::envelope_from(Error(failure->code(), failure->what(), detail));
      for (auto& [dom, st] : d.rm_states) {
        if (st == "propagated") st = "released";
      }
      d.phase_timings_ms["propagate_ms"] = total;
      for (const auto& [dom, ms] : per_rm) d.phase_timings_ms["propagate_ms:" + dom] = ms;
    });
    return snapshot(id)->response();
  }
  update(*e, [&](ServiceInstance& d) {
    d.state = ServiceState::kReserved;
    d.design = design;
    d.negotiation_rounds += rounds;
    d.hold_expires_at = earliest;
    d.phase_timings_ms["propagate_ms"] = total;
    for (const auto& [dom, ms] : per_rm) d.phase_timings_ms["propagate_ms:" + dom] = ms;
  });
  return snapshot(id)->response();
}

protocol::ServiceResponse Orchestrator::commit(const std::string& id, bool async) {
  auto e = entry(id);
  std::unique_lock op(e->op);
  ServiceInstance s = *snapshot(id);
  if (s.state != ServiceState::kReserved) bad_state(s, "commit");
  int64_t now = clock_->now();
  if (s.hold_expires_at && static_cast<double>(now) >= *s.hold_expires_at - config_.commit_guard_s) {
    release(id + "/" + std::to_string(s.revision) + "/expired", held_connections(s, false));
    update(*e, [&](ServiceInstance& d) {
      d.state = ServiceState::kExpired;
      d.error = protocol::envelope_from(Error(ErrorCode::kHoldExpired, "holds expire before commit could finish",
                                              {{"hold_expires_at", *s.hold_expires_at}, {"now", now}}));
      for (auto& [dom, st] : d.rm_states) st = "expired";
    });
    return snapshot(id)->response();
  }
  update(*e, [](ServiceInstance& d) { d.state = ServiceState::kCommitting; });
  if (async) {
    op.unlock();
    std::lock_guard lk(workers_mu_);
    workers_.emplace_back([this, e] {
      std::lock_guard op2(e->op);
      run_commit(e);
    });
    return snapshot(id)->response();
  }
  run_commit(e);
  return snapshot(id)->response();
}

void Orchestrator::run_commit(const std::shared_ptr<Entry>& e) {
  ServiceInstance s;
  {
    std::lock_guard lk(data_mu_);
    s = e->data;
  }
  if (s.state != ServiceState::kCommitting) return;
  const std::string id = s.instance_id;
  double t0 = steady_ms();

  std::vector<std::future<void>> acks;
  for (const auto& [dom, delta_id] : s.rm_delta_ids) {
    if (rm_state_terminal(s.rm_states[dom])) continue;
    acks.push_back(std::async(std::launch::async, [this, e, dom = dom, delta_id = delta_id] {
      std::string st;
      try {
        st = std::string(protocol::to_string(client(dom).commit(delta_id).state));
      } catch (const Error& err) {
        st = err.code() == ErrorCode::kHoldExpired ? "expired" : "failed";
        spdlog::warn("orchestrator: commit of {} at {} failed: {}", delta_id, dom, err.what());
      }
      std::lock_guard lk(data_mu_);
      auto& cur = e->data.rm_states[dom];
      if (rm_state_rank(st) > rm_state_rank(cur)) cur = st;
    }));
  }
  for (auto& a : acks) a.get();
  data_cv_.notify_all();

  auto poll = [&] {
    std::map<std::string, std::string> pending;
    {
      std::lock_guard lk(data_mu_);
      for (const auto& [dom, st] : e->data.rm_states) {
        if (!rm_state_terminal(st)) pending[dom] = e->data.rm_delta_ids.at(dom);
      }
    }
    for (const auto& [dom, delta_id] : pending) {
      std::string st;
      try {
        st = std::string(protocol::to_string(client(dom).status(delta_id).state));
      } catch (const Error& err) {
        if (err.code() != ErrorCode::kTransport) st = "failed";
      }
      std::lock_guard lk(data_mu_);
      auto& cur = e->data.rm_states[dom];
      if (rm_state_rank(st) > rm_state_rank(cur)) cur = st;
    }
  };
  auto all_done = [&] {
    return std::all_of(e->data.rm_states.begin(), e->data.rm_states.end(),
                       [](const auto& kv) { return rm_state_terminal(kv.second); });
  };
  std::map<std::string, double> detected;
  auto note_detection = [&] {
    double now = steady_ms() - t0;
    for (const auto& [dom, st] : e->data.rm_states) {
      if (rm_state_terminal(st) && !detected.count(dom)) detected[dom] = now;
    }
  };

  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                         std::chrono::duration<double>(config_.commit_timeout_s));
  auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(config_.poll_interval_s));
  auto next_poll = std::chrono::steady_clock::now() + period;
  bool timed_out = false;
  for (;;) {
    {
      std::unique_lock lk(data_mu_);
      note_detection();
      if (all_done()) break;
      if (config_.use_notify) {
        data_cv_.wait_until(lk, std::min(next_poll, deadline), [&] { return all_done(); });
        note_detection();
        if (all_done()) break;
      }
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      timed_out = true;
      break;
    }
    if (!config_.use_notify) std::this_thread::sleep_until(std::min(next_poll, deadline));
    if (std::chrono::steady_clock::now() >= next_poll) {
      poll();
      next_poll += period;
    }
  }
  double total = steady_ms() - t0;

  ServiceInstance snap;
  {
    std::lock_guard lk(data_mu_);
    snap = e->data;
  }
  bool ok = !timed_out && std::all_of(snap.rm_states.begin(), snap.rm_states.end(),
                                      [](const auto& kv) { return kv.second == "committed"; });
  if (!ok) {
    release(id + "/" + std::to_string(snap.revision) + "/compensate", held_connections(snap, true));
  }
  update(*e, [&](ServiceInstance& d) {
    d.phase_timings_ms["commit_ms"] = total;
    for (const auto& [dom, ms] : detected) d.phase_timings_ms["commit_ms:" + dom] = ms;
    if (ok) {
      d.state = ServiceState::kCommitted;
      d.hold_expires_at.reset();
      return;
    }
    json per_rm = d.rm_states;
    bool expired = std::any_of(d.rm_states.begin(), d.rm_states.end(),
                               [](const auto& kv) { return kv.second == "expired"; });
    d.state = ServiceState::kFailed;
    d.error = protocol::envelope_from(Error(expired ? ErrorCode::kHoldExpired : ErrorCode::kBadState,
                                            timed_out ? "commit timed out" : "commit did not complete everywhere",
                                            {{"rm_states", per_rm}}));
    for (auto& [dom, st] : d.rm_states) {
      if (st == "committed" || st == "committing" || st == "propagated") st = "released";
    }
  });
}

void Orchestrator::handle_notification(const protocol::NotificationEvent& ev) {
  if (ev.event != "delta-state" || !ev.delta_id || !ev.state) return;
  {
    std::lock_guard lk(data_mu_);
    auto it = delta_owner_.find(*ev.delta_id);
    if (it == delta_owner_.end()) return;
    auto inst = instances_.find(it->second.first);
    if (inst == instances_.end()) return;
    auto& cur = inst->second->data.rm_states[it->second.second];
    std::string st(protocol::to_string(*ev.state));
    if (rm_state_rank(st) > rm_state_rank(cur)) cur = st;
  }
  data_cv_.notify_all();
}

protocol::ServiceResponse Orchestrator::cancel(const std::string& id) {
  auto e = entry(id);
  wait_settled(id, config_.commit_timeout_s);
  std::lock_guard op(e->op);
  ServiceInstance s = *snapshot(id);
  switch (s.state) {
    case ServiceState::kCreated:
    case ServiceState::kComputed:
    case ServiceState::kComputeFailed:
      break;
    case ServiceState::kReserved:
    case ServiceState::kCommitted:
      release(id + "/" + std::to_string(s.revision) + "/cancel", held_connections(s, true));
      break;
    case ServiceState::kCancelled:
      return s.response();
    default:
      bad_state(s, "cancel");
  }
  update(*e, [](ServiceInstance& d) {
    d.state = ServiceState::kCancelled;
    d.hold_expires_at.reset();
    for (auto& [dom, st] : d.rm_states) st = "released";
  });
  return snapshot(id)->response();
}

protocol::ServiceStatus Orchestrator::status(const std::string& id) {
  auto e = entry(id);
  std::lock_guard lk(data_mu_);
  return e->data.status();
}

// --- release / rollback -----------------------------------------------------------------------------

std::string Orchestrator::wait_delta(const std::string& domain, const std::string& delta_id,
                                     double timeout_s) {
  double interval = std::min(config_.poll_interval_s, 0.05);
  auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
  for (;;) {
    std::string st(protocol::to_string(client(domain).status(delta_id).state));
    if (rm_state_terminal(st)) return st;
    if (std::chrono::steady_clock::now() >= deadline) return st;
    sleep_s(interval);
  }
}

bool Orchestrator::release_domain(const std::string& key, const std::string& domain,
                                  const std::vector<std::string>& connections) {
  double delay = config_.rollback.base_ms;
  for (int attempt = 0; attempt < config_.rollback.attempts; ++attempt) {
    ModelDelta d;
    d.delta_id = name_uuid(key + "/" + domain + "/" + std::to_string(attempt));
    d.target_domain = domain;
    if (auto u = union_model()) {
      auto it = u->models().find(domain);
      if (it != u->models().end()) d.base_model_version = it->second.version;
    }
    d.reduction = connections;
    canonicalize(d);
    try {
      client(domain).propagate(d);
      client(domain).commit(d.delta_id);
      if (wait_delta(domain, d.delta_id, config_.commit_timeout_s) == "committed") return true;
    } catch (const Error& err) {
      if (err.code() == ErrorCode::kUnknownConnection || err.code() == ErrorCode::kUnknownDelta) {
        return true;  // nothing left to release
      }
      spdlog::warn("orchestrator: release at {} failed (attempt {}): {}", domain, attempt + 1, err.what());
    }
    sleep_s(delay / 1000.0);
    delay = std::min(delay * config_.rollback.factor, config_.rollback.cap_ms);
  }
  spdlog::error("orchestrator: release of {} at {} needs operator attention", key, domain);
  return false;
}

void Orchestrator::release(const std::string& key,
                           const std::map<std::string, std::vector<std::string>>& by_domain) {
  std::vector<std::future<bool>> futs;
  for (const auto& [dom, conns] : by_domain) {
    futs.push_back(std::async(std::launch::async, [this, key, dom = dom, conns = conns] {
      return release_domain(key, dom, conns);
    }));
  }
  for (auto& f : futs) f.get();
}

}  // namespace sense
