#include "sense/rm.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>
#include <thread>

#include "sense/error.hpp"
#include "sense/ids.hpp"
#include "sense/json_util.hpp"

namespace sense {

using protocol::DeltaStateWire;

namespace {

void sleep_ms(double ms) {
  if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

}  // namespace

// --- config -----------------------------------------------------------------------

json to_json(const RmConfig& c) {
  DomainModel m;
  m.domain_id = c.domain_id;
  m.nodes = c.nodes;
  m.links = c.links;
  canonicalize(m);
  json mj = to_json(m);
  return json{{"domain_id", c.domain_id},
              {"nodes", mj["nodes"]},
              {"links", mj["links"]},
              {"verbosity", to_string(c.verbosity)},
              {"model_gen_latency_ms", c.model_gen_latency_ms},
              {"propagate_latency_ms", c.propagate_latency_ms},
              {"commit_latency_ms", c.commit_latency_ms},
              {"hold_duration", c.hold_duration},
              {"notify_enabled", c.notify_enabled},
              {"overbook_factor", c.overbook_factor},
              {"token", c.token}};
}

RmConfig rm_config_from_json(const json& j) {
  ObjectReader r(j, "rm config");
  RmConfig c;
  c.domain_id = r.required<std::string>("domain_id");
  json mj{{"domain_id", c.domain_id},
          {"version", 1},
          {"generated_at", 0},
          {"verbosity", "static"},
          {"nodes", r.raw("nodes")},
          {"links", r.raw("links")}};
  DomainModel m = model_from_json(mj);
  c.nodes = std::move(m.nodes);
  c.links = std::move(m.links);
  c.verbosity = verbosity_from_string(r.required<std::string>("verbosity"));
  c.model_gen_latency_ms = r.optional<double>("model_gen_latency_ms").value_or(0);
  c.propagate_latency_ms = r.optional<double>("propagate_latency_ms").value_or(0);
  c.commit_latency_ms = r.optional<double>("commit_latency_ms").value_or(0);
  c.hold_duration = r.optional<int64_t>("hold_duration").value_or(300);
  c.notify_enabled = r.optional<bool>("notify_enabled").value_or(true);
  c.overbook_factor = r.optional<double>("overbook_factor").value_or(kDefaultOverbookFactor);
  c.token = r.optional<std::string>("token").value_or("");
  r.finish();
  validate(c);
  return c;
}

void validate(const RmConfig& c) {
  auto bad = [&](const std::string& why) {
    throw Error(ErrorCode::kInvariantViolation, "rm config " + c.domain_id + ": " + why,
                {{"domain", c.domain_id}});
  };
  if (c.model_gen_latency_ms < 0 || c.propagate_latency_ms < 0 || c.commit_latency_ms < 0) {
    bad("latencies must be >= 0");
  }
  if (c.hold_duration <= 0) bad("hold_duration must be positive");
  if (c.overbook_factor < 1.0) bad("overbook_factor must be >= 1");
  DomainModel m;
  m.domain_id = c.domain_id;
  m.nodes = c.nodes;
  m.links = c.links;
  validate(m);
}

// --- resource manager ---------------------------------------------------------------

ResourceManager::ResourceManager(RmConfig config, std::shared_ptr<const Clock> clock)
    : config_(std::move(config)), clock_(std::move(clock)) {
  validate(config_);
  for (const auto& n : config_.nodes) {
    for (const auto& p : n.ports) {
      calendars_.emplace(p.urn.str(),
                         ReservationCalendar(p.urn, p.reservable, p.labels, config_.overbook_factor));
    }
  }
  last_modified_ = clock_->now();
  timers_.every(std::chrono::milliseconds(100), [this] { sweep(); });
}

ResourceManager::~ResourceManager() {
  timers_.stop();
  notifier_.stop();
}

ReservationCalendar* ResourceManager::calendar_for(const Urn& port) {
  auto it = calendars_.find(port.str());
  return it == calendars_.end() ? nullptr : &it->second;
}

bool ResourceManager::has_connection_locked(const std::string& connection_id) const {
  for (const auto& [urn, cal] : calendars_) {
    for (const auto& a : cal.allocations()) {
      if (a.segment.connection_id == connection_id) return true;
    }
  }
  return false;
}

void ResourceManager::bump_locked() {
  ++version_;
  last_modified_ = std::max(clock_->now(), last_modified_ + 1);
}

void ResourceManager::sweep() {
  std::lock_guard lk(mu_);
  sweep_locked(clock_->now());
}

void ResourceManager::sweep_locked(int64_t now) {
  for (auto& [id, rec] : records_) {
    if (rec.state != DeltaStateWire::kPropagated || !rec.hold_expires_at || *rec.hold_expires_at > now) {
      continue;
    }
    for (auto& [urn, cal] : calendars_) cal.release_holds(id);
    rec.state = DeltaStateWire::kExpired;
    bump_locked();
    spdlog::debug("rm {}: hold for delta {} expired", domain_id(), id);
    notify({"", domain_id(), "delta-state", id, rec.state, version_});
    notify({"", domain_id(), "model-version", std::nullopt, std::nullopt, version_});
  }
}

DomainModel ResourceManager::build_model_locked() const {
  DomainModel m;
  m.domain_id = config_.domain_id;
  m.version = version_;
  m.generated_at = clock_->now();
  m.verbosity = config_.verbosity;
  m.nodes = config_.nodes;
  m.links = config_.links;
  auto visible = [&](const Allocation& a) {
    if (a.state != AllocationState::kCommitted) return false;
    auto it = records_.find(a.delta_id);
    return it == records_.end() || it->second.state == DeltaStateWire::kCommitted;
  };
  for (const auto& [urn, cal] : calendars_) {
    StepFunction guaranteed;
    for (const auto& a : cal.allocations()) {
      if (!visible(a)) continue;
      if (m.verbosity == Verbosity::kFull) m.active_reservations.push_back(a.segment);
      if (a.segment.qos_class == QosClass::kGuaranteedCapped) {
        guaranteed.add(a.segment.interval.start, a.segment.interval.end, a.segment.bandwidth);
      }
    }
    if (m.verbosity == Verbosity::kSummary && !guaranteed.empty()) {
      auto bps = guaranteed.breakpoints();
      Mbps peak = guaranteed.max_over(bps.front(), bps.back());
      if (peak > 0) m.reserved_by_port[urn] = peak;
    }
  }
  canonicalize(m);
  return m;
}

ModelReply ResourceManager::get_model(std::optional<int64_t> if_modified_since) {
  {
    std::lock_guard lk(mu_);
    sweep_locked(clock_->now());
    if (if_modified_since && last_modified_ <= *if_modified_since) {
      return ModelReply{std::nullopt, last_modified_, version_};
    }
  }
  sleep_ms(config_.model_gen_latency_ms);
  std::lock_guard lk(mu_);
  return ModelReply{build_model_locked(), last_modified_, version_};
}

protocol::PropagateResponse ResourceManager::propagate(const ModelDelta& in) {
  sleep_ms(config_.propagate_latency_ms);
  ModelDelta delta = in;
  canonicalize(delta);
  validate(delta);
  if (delta.target_domain != domain_id()) {
    throw Error(ErrorCode::kMalformedIntent,
                "delta for " + delta.target_domain + " sent to " + domain_id(),
                {{"target_domain", delta.target_domain}, {"domain", domain_id()}});
  }

  std::lock_guard lk(mu_);
  int64_t now = clock_->now();
  sweep_locked(now);

  if (auto it = records_.find(delta.delta_id); it != records_.end()) {
    const DeltaRecord& rec = it->second;
    if (rec.delta != delta || rec.state == DeltaStateWire::kExpired || rec.state == DeltaStateWire::kFailed) {
      throw Error(ErrorCode::kBadState, "delta id " + delta.delta_id + " already used",
                  {{"delta_id", delta.delta_id}, {"state", std::string(to_string(rec.state))}});
    }
    return {true, rec.delta, rec.hold_expires_at};
  }
  if (delta.base_model_version != version_) {
    spdlog::info("rm {}: delta {} built on version {}, current {}", domain_id(), delta.delta_id,
                 delta.base_model_version, version_);
  }
  for (const auto& c : delta.reduction) {
    if (!has_connection_locked(c)) {
      throw Error(ErrorCode::kUnknownConnection, "no allocation for connection " + c + " in " + domain_id(),
                  {{"connection_id", c}, {"domain", domain_id()}});
    }
  }

  // Adjudicate against copies so a rejection leaves live state untouched.
  std::map<std::string, ReservationCalendar> scratch;
  auto cal = [&](const Urn& port) -> ReservationCalendar& {
    auto it = scratch.find(port.str());
    if (it != scratch.end()) return it->second;
    ReservationCalendar* live = calendar_for(port);
    if (!live) {
      throw Error(ErrorCode::kUnknownPort, "port " + port.str() + " is not in " + domain_id(),
                  {{"urn", port.str()}});
    }
    return scratch.emplace(port.str(), *live).first->second;
  };

  // Counter-propose the lowest vlan that is free on every port of a
  // connection whose requested vlan is taken.
  bool modified = false;
  std::map<std::string, std::vector<size_t>> by_connection;
  for (size_t i = 0; i < delta.addition.size(); ++i) {
    by_connection[delta.addition[i].connection_id].push_back(i);
  }
  for (const auto& [conn, idx] : by_connection) {
    VlanSet common = VlanSet::all();
    bool clash = false;
    for (size_t i : idx) {
      const auto& s = delta.addition[i];
      VlanSet free = cal(s.port_urn).available_labels(s.interval);
      if (!free.contains(s.vlan)) clash = true;
      common &= free;
    }
    if (!clash) continue;
    auto alt = common.min();
    const auto& first = delta.addition[idx.front()];
    if (!alt) {
      throw Error(ErrorCode::kVlanConflict,
                  "no vlan free on every port of connection " + conn + " in " + domain_id(),
                  {{"port", first.port_urn.str()}, {"vlan", first.vlan}, {"alternatives", json::array()}});
    }
    for (size_t i : idx) delta.addition[i].vlan = *alt;
    modified = true;
  }

  for (const auto& s : delta.addition) cal(s.port_urn).try_hold(s, now, config_.hold_duration, delta.delta_id);

  if (modified) {
    canonicalize(delta);
    spdlog::debug("rm {}: counter-proposing delta {}", domain_id(), delta.delta_id);
    return {false, delta, std::nullopt};
  }
  for (auto& [urn, c] : scratch) calendars_[urn] = std::move(c);
  DeltaRecord rec;
  rec.delta = delta;
  rec.state = DeltaStateWire::kPropagated;
  rec.received_at = now;
  rec.hold_expires_at = now + config_.hold_duration;
  records_.emplace(delta.delta_id, rec);
  return {true, delta, rec.hold_expires_at};
}

protocol::DeltaStatusDoc ResourceManager::commit(const std::string& delta_id) {
  std::lock_guard lk(mu_);
  int64_t now = clock_->now();
  sweep_locked(now);
  auto it = records_.find(delta_id);
  if (it == records_.end()) {
    throw Error(ErrorCode::kUnknownDelta, "unknown delta " + delta_id, {{"delta_id", delta_id}});
  }
  DeltaRecord& rec = it->second;
  switch (rec.state) {
    case DeltaStateWire::kCommitting:
    case DeltaStateWire::kCommitted:
      return rec.status();
    case DeltaStateWire::kExpired:
      throw Error(ErrorCode::kHoldExpired, "hold for delta " + delta_id + " expired",
                  {{"delta_id", delta_id}, {"domain", domain_id()}});
    case DeltaStateWire::kFailed:
      throw Error(ErrorCode::kBadState, "delta " + delta_id + " failed",
                  {{"delta_id", delta_id}, {"state", "failed"}});
    case DeltaStateWire::kPropagated:
      break;
  }
  std::set<std::string> ports;
  for (const auto& s : rec.delta.addition) ports.insert(s.port_urn.str());
  for (const auto& p : ports) calendars_.at(p).commit_hold(delta_id, now);
  rec.state = DeltaStateWire::kCommitting;
  rec.hold_expires_at.reset();
  notify({"", domain_id(), "delta-state", delta_id, rec.state, std::nullopt});

  timers_.after(std::chrono::duration<double, std::milli>(config_.commit_latency_ms), [this, delta_id] {
    std::lock_guard lk(mu_);
    auto it = records_.find(delta_id);
    if (it == records_.end() || it->second.state != DeltaStateWire::kCommitting) return;
    DeltaRecord& r = it->second;
    for (const auto& c : r.delta.reduction) {
      for (auto& [urn, cal] : calendars_) cal.release(c);
    }
    r.state = DeltaStateWire::kCommitted;
    r.committed_at = clock_->now();
    bump_locked();
    notify({"", domain_id(), "delta-state", delta_id, r.state, version_});
    notify({"", domain_id(), "model-version", std::nullopt, std::nullopt, version_});
  });
  return rec.status();
}

protocol::DeltaStatusDoc ResourceManager::status(const std::string& delta_id) const {
  std::lock_guard lk(mu_);
  auto it = records_.find(delta_id);
  if (it == records_.end()) {
    throw Error(ErrorCode::kUnknownDelta, "unknown delta " + delta_id, {{"delta_id", delta_id}});
  }
  return it->second.status();
}

std::string ResourceManager::subscribe(NotificationSink sink) {
  std::string id = random_uuid();
  std::lock_guard lk(sub_mu_);
  subscribers_.emplace(id, std::move(sink));
  return id;
}

void ResourceManager::unsubscribe(const std::string& subscription_id) {
  std::lock_guard lk(sub_mu_);
  subscribers_.erase(subscription_id);
}

void ResourceManager::notify(protocol::NotificationEvent event) {
  if (!config_.notify_enabled) return;
  std::lock_guard lk(sub_mu_);
  for (const auto& [id, sink] : subscribers_) {
    auto ev = event;
    ev.subscription_id = id;
    notifier_.after(std::chrono::milliseconds(0), [sink, ev, domain = domain_id()] {
      try {
        sink(ev);
      } catch (const std::exception& e) {
        spdlog::warn("rm {}: notification delivery failed: {}", domain, e.what());
      }
    });
  }
}

std::vector<Allocation> ResourceManager::allocations() const {
  std::lock_guard lk(mu_);
  std::vector<Allocation> out;
  for (const auto& [urn, cal] : calendars_) {
    out.insert(out.end(), cal.allocations().begin(), cal.allocations().end());
  }
  return out;
}

std::map<std::string, DeltaStateWire> ResourceManager::delta_states() const {
  std::lock_guard lk(mu_);
  std::map<std::string, DeltaStateWire> out;
  for (const auto& [id, rec] : records_) out.emplace(id, rec.state);
  return out;
}

int64_t ResourceManager::version() const {
  std::lock_guard lk(mu_);
  return version_;
}

void ResourceManager::inject_allocation(const ReservationSegment& segment) {
  std::lock_guard lk(mu_);
  ReservationCalendar* cal = calendar_for(segment.port_urn);
  if (!cal) throw Error(ErrorCode::kUnknownPort, "unknown port " + segment.port_urn.str());
  cal->insert_committed(segment, "injected");
  bump_locked();
}

}  // namespace sense
