#include "sense/compute.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <queue>
#include <set>

#include "sense/error.hpp"
#include "sense/ids.hpp"
#include "sense/json_util.hpp"
#include "sense/wire_time.hpp"

namespace sense {

namespace {

constexpr size_t kUnreached = std::numeric_limits<size_t>::max();

[[noreturn]] void bad_intent(const std::string& msg, json detail = json::object()) {
  throw Error(ErrorCode::kMalformedIntent, msg, std::move(detail));
}

// Re-raise with the connection name attached.
template <typename F>
auto for_connection(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    json detail = e.detail().is_object() ? e.detail() : json::object();
    if (!detail.contains("connection")) detail["connection"] = name;
    std::string msg = e.what();
    auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    throw Error(e.code(), "connection '" + name + "': " + msg, detail);
  }
}

// BFS distances from `sources` over ports with avail >= mbps.
std::vector<size_t> bfs(const UnionModel& u, const std::vector<Mbps>& avail,
                        const std::vector<size_t>& sources, Mbps mbps) {
  std::vector<size_t> dist(u.port_count(), kUnreached);
  std::deque<size_t> q;
  for (size_t s : sources) {
    if (avail[s] < mbps || dist[s] == 0) continue;
    dist[s] = 0;
    q.push_back(s);
  }
  while (!q.empty()) {
    size_t v = q.front();
    q.pop_front();
    for (size_t w : u.neighbors(v)) {
      if (dist[w] != kUnreached || avail[w] < mbps) continue;
      dist[w] = dist[v] + 1;
      q.push_back(w);
    }
  }
  return dist;
}

// From `start`, step to the smallest-index neighbour one hop closer until
// distance zero.
std::vector<size_t> descend(const UnionModel& u, const std::vector<size_t>& dist, size_t start) {
  std::vector<size_t> walk{start};
  size_t v = start;
  while (dist[v] != 0) {
    for (size_t w : u.neighbors(v)) {
      if (dist[w] != kUnreached && dist[w] + 1 == dist[v]) {
        v = w;
        break;
      }
    }
    walk.push_back(v);
  }
  return walk;
}

std::vector<size_t> terminal_ports(const ConnectionReq& c, const UnionModel& u) {
  std::vector<size_t> out;
  for (const auto& t : c.terminals) out.push_back(u.terminal_port(t.uri));
  return out;
}

// True when every terminal sits in one component of ports with avail >= mbps.
bool terminals_connected(const UnionModel& u, const std::vector<Mbps>& avail,
                         const std::vector<size_t>& terms, Mbps mbps) {
  auto dist = bfs(u, avail, {terms.front()}, mbps);
  return std::all_of(terms.begin(), terms.end(), [&](size_t t) { return dist[t] != kUnreached; });
}

// Width of the best tree joining all terminals.
std::optional<Mbps> terminals_width(const UnionModel& u, const std::vector<Mbps>& avail,
                                    const std::vector<size_t>& terms) {
  Mbps width = std::numeric_limits<Mbps>::max();
  for (size_t i = 1; i < terms.size(); ++i) {
    auto w = widest_bottleneck(u, avail, terms.front(), terms[i]);
    if (!w) return std::nullopt;
    width = std::min(width, *w);
  }
  if (terms.size() == 1) width = avail[terms.front()];
  return width;
}

json bottleneck_detail(const UnionModel& u, const std::vector<Mbps>& avail, size_t src, size_t dst) {
  auto width = widest_bottleneck(u, avail, src, dst);
  if (!width) return nullptr;
  auto path = find_path_by_availability(u, avail, src, dst, *width);
  if (!path || path->size() < 2) return json{{"available", *width}};
  size_t best = 0;
  Mbps best_w = std::numeric_limits<Mbps>::max();
  for (size_t i = 0; i + 1 < path->size(); ++i) {
    Mbps w = std::min(avail[(*path)[i]], avail[(*path)[i + 1]]);
    if (w < best_w) {
      best_w = w;
      best = i;
    }
  }
  return json{{"a", u.port((*path)[best]).urn.str()},
              {"b", u.port((*path)[best + 1]).urn.str()},
              {"available", best_w}};
}

Mbps require_mbps(const ConnectionReq& c) {
  if (!c.mbps) bad_intent("connection '" + c.name + "' has no bandwidth capacity", {{"connection", c.name}});
  return *c.mbps;
}

std::vector<LabelPin> pins_for(const ConnectionReq& c, const std::vector<size_t>& terms) {
  std::vector<LabelPin> pins;
  for (size_t i = 0; i < c.terminals.size(); ++i) {
    if (c.terminals[i].vlan) pins.push_back({terms[i], *c.terminals[i].vlan});
  }
  return pins;
}

void append_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

ConnectionDesign finish_connection(CalendarView& view, const ConnectionReq& c,
                                   const std::string& connection_id,
                                   const std::vector<size_t>& ports,
                                   const std::vector<std::pair<size_t, size_t>>& edges,
                                   const std::vector<LabelPin>& pins) {
  const UnionModel& u = view.model();
  std::vector<std::pair<size_t, size_t>> boundaries;
  for (const auto& [a, b] : edges) {
    if (u.is_inter(a, b)) boundaries.emplace_back(a, b);
  }
  ConnectionDesign d;
  d.vlans = select_vlans(view, ports, boundaries, c.interval, pins);
  d.name = c.name;
  d.connection_id = connection_id;
  d.bandwidth = require_mbps(c);
  d.qos = c.qos;
  d.interval = c.interval;
  for (size_t p : ports) {
    d.ports.push_back(u.port(p).urn);
    append_unique(d.domains, u.port(p).domain_id);
  }
  for (const auto& [a, b] : edges) d.edges.emplace_back(u.port(a).urn, u.port(b).urn);
  // Later connections in the same intent see this one's usage.
  for (const auto& s : d.segments()) {
    view.mutable_calendar(*u.port_index(s.port_urn)).insert_committed(s);
  }
  return d;
}

ServiceDesign assemble(ServiceType type, std::vector<ConnectionDesign> conns, const UnionModel& u,
                       const std::string& id_prefix) {
  ServiceDesign design;
  design.type = type;
  design.connections = std::move(conns);
  for (const auto& c : design.connections) {
    for (const auto& d : c.domains) append_unique(design.domains, d);
  }
  design.deltas = partition_deltas(design, u, id_prefix);
  return design;
}

}  // namespace

std::string_view to_string(ServiceType t) {
  return t == ServiceType::kP2P ? "Multi-Path P2P VLAN" : "Multi-Point VLAN Bridge";
}

std::string_view to_string(QueryAsk a) {
  switch (a) {
    case QueryAsk::kMaximumBandwidth: return "maximum-bandwidth";
    case QueryAsk::kTimeBlockMaxBandwidth: return "total-block-maximum-bandwidth";
    case QueryAsk::kSlidingWindow: return "bandwidth-sliding-window";
    case QueryAsk::kTimeBandwidthProduct: return "time-bandwidth-product";
  }
  return "";
}

// --- normalization ---------------------------------------------------------------

namespace {

QueryAsk ask_from_string(const std::string& s) {
  for (auto a : {QueryAsk::kMaximumBandwidth, QueryAsk::kTimeBlockMaxBandwidth,
                 QueryAsk::kSlidingWindow, QueryAsk::kTimeBandwidthProduct}) {
    if (to_string(a) == s) return a;
  }
  // The block query is also spelled with "time-block".
  if (s == "time-block-maximum-bandwidth") return QueryAsk::kTimeBlockMaxBandwidth;
  bad_intent("unknown ask '" + s + "'", {{"ask", s}});
}

std::optional<int> parse_label(const std::optional<protocol::Label>& label) {
  if (!label) return std::nullopt;
  int64_t v = 0;
  if (const auto* s = std::get_if<std::string>(&*label)) {
    if (*s == "any") return std::nullopt;
    try {
      size_t used = 0;
      v = std::stoll(*s, &used);
      if (used != s->size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      bad_intent("label must be 'any' or a vlan id", {{"label", *s}});
    }
  } else {
    v = std::get<int64_t>(*label);
  }
  if (v < kMinVlan || v > kMaxVlan) bad_intent("vlan label outside 1..4094", {{"label", v}});
  return static_cast<int>(v);
}

Mbps to_mbps(int64_t capacity, const std::optional<std::string>& unit) {
  std::string u = unit.value_or("mbps");
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (capacity <= 0) bad_intent("capacity must be positive", {{"capacity", capacity}});
  if (u == "mbps") return capacity;
  if (u == "gbps") return capacity * 1000;
  bad_intent("unknown unit '" + u + "'", {{"unit", u}});
}

void check_order(int64_t a, int64_t b, const char* what) {
  if (a >= b) {
    throw Error(ErrorCode::kInconsistentSchedule, std::string(what) + " must precede its end",
                {{"start", a}, {"end", b}});
  }
}

TimeInterval resolve_schedule(const std::optional<protocol::ScheduleDoc>& s, int64_t now,
                              int64_t default_duration) {
  if (!s) return {now, now + default_duration};
  std::optional<int64_t> start, end, after, before;
  if (s->start) start = resolve_time(*s->start, now);
  if (s->end) end = resolve_time(*s->end, now);
  if (s->start_after) after = resolve_time(*s->start_after, now);
  if (s->end_before) before = resolve_time(*s->end_before, now);
  if (after && before) check_order(*after, *before, "start-after");
  if (start && after && *start < *after) {
    throw Error(ErrorCode::kInconsistentSchedule, "start precedes start-after");
  }
  if (end && before && *end > *before) {
    throw Error(ErrorCode::kInconsistentSchedule, "end follows end-before");
  }
  int64_t b = start.value_or(after.value_or(now));
  int64_t e = end.value_or(before.value_or(b + default_duration));
  check_order(b, e, "schedule start");
  return {b, e};
}

}  // namespace

ServiceIntent normalize_intent(const protocol::IntentDocument& doc, int64_t now,
                               int64_t default_duration) {
  ServiceIntent out;
  if (doc.service_type == to_string(ServiceType::kP2P)) {
    out.type = ServiceType::kP2P;
  } else if (doc.service_type == to_string(ServiceType::kMultipoint)) {
    out.type = ServiceType::kMultipoint;
  } else {
    bad_intent("unknown service_type '" + doc.service_type + "'");
  }
  out.alias = doc.service_alias;
  if (doc.connections.empty()) bad_intent("intent has no connections");

  std::set<std::string> names;
  for (const auto& cd : doc.connections) {
    ConnectionReq c;
    c.name = cd.name;
    if (!names.insert(c.name).second) bad_intent("duplicate connection name '" + c.name + "'");
    size_t n = cd.terminals.size();
    if (out.type == ServiceType::kP2P && n != 2) {
      bad_intent("P2P connection '" + c.name + "' needs exactly 2 terminals", {{"terminals", n}});
    }
    if (out.type == ServiceType::kMultipoint && n < 3) {
      bad_intent("multipoint connection '" + c.name + "' needs at least 3 terminals", {{"terminals", n}});
    }
    for (const auto& t : cd.terminals) {
      if (!Urn::valid(t.uri)) bad_intent("terminal uri is not a URN", {{"uri", t.uri}});
      c.terminals.push_back({Urn(t.uri), parse_label(t.label)});
    }
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) {
        if (c.terminals[i].uri == c.terminals[j].uri) {
          bad_intent("connection '" + c.name + "' repeats terminal", {{"uri", c.terminals[i].uri.str()}});
        }
      }
    }
    if (cd.bandwidth) {
      try {
        c.qos = qos_from_string(cd.bandwidth->qos_class);
      } catch (const Error& e) {
        bad_intent(e.what(), {{"qos_class", cd.bandwidth->qos_class}});
      }
      if (cd.bandwidth->capacity) {
        c.mbps = to_mbps(*cd.bandwidth->capacity, cd.bandwidth->unit);
      }
    }
    c.interval = resolve_schedule(cd.schedule, now, default_duration);
    out.connections.push_back(std::move(c));
  }

  if (doc.queries) {
    for (const auto& qd : *doc.queries) {
      QueryReq q;
      q.ask = ask_from_string(qd.ask);
      const auto& o = qd.options;
      q.name = o.name;
      auto it = std::find_if(out.connections.begin(), out.connections.end(),
                             [&](const ConnectionReq& c) { return c.name == o.name; });
      if (it == out.connections.end()) {
        bad_intent("query names unknown connection '" + o.name + "'", {{"name", o.name}});
      }
      q.connection = static_cast<size_t>(it - out.connections.begin());
      if (o.start || o.end) {
        if (!o.start || !o.end) bad_intent("query block needs both start and end");
        q.block = TimeInterval{resolve_time(*o.start, now), resolve_time(*o.end, now)};
        check_order(q.block->start, q.block->end, "query start");
      }
      if (o.start_after || o.end_before) {
        int64_t a = o.start_after ? resolve_time(*o.start_after, now) : now;
        int64_t b = o.end_before ? resolve_time(*o.end_before, now) : a + default_duration;
        check_order(a, b, "start-after");
        q.window = TimeInterval{a, b};
      }
      if (o.duration) {
        if (const auto* secs = std::get_if<int64_t>(&*o.duration)) {
          q.duration = *secs;
        } else {
          q.duration = parse_duration(std::get<std::string>(*o.duration));
        }
        if (*q.duration <= 0) bad_intent("duration must be positive");
      }
      if (o.tbp_mbytes) {
        if (*o.tbp_mbytes <= 0) bad_intent("tbp-mbytes must be positive", {{"tbp-mbytes", *o.tbp_mbytes}});
        q.tbp_mbytes = *o.tbp_mbytes;
      }
      q.bandwidth_min = o.bandwidth_min;
      q.bandwidth_max = o.bandwidth_max;
      if ((q.bandwidth_min && *q.bandwidth_min <= 0) || (q.bandwidth_max && *q.bandwidth_max <= 0)) {
        bad_intent("bandwidth bounds must be positive");
      }
      if (q.bandwidth_min && q.bandwidth_max && *q.bandwidth_min > *q.bandwidth_max) {
        bad_intent("bandwidth-mbps >= exceeds bandwidth-mbps <=");
      }
      bool hi = o.use_highest_bandwidth.value_or(false);
      bool lo = o.use_lowest_bandwidth.value_or(false);
      if (hi && lo) bad_intent("use-highest-bandwidth and use-lowest-bandwidth are exclusive");
      q.mode = hi ? TbpMode::kHighest : lo ? TbpMode::kLowest : TbpMode::kDefault;

      switch (q.ask) {
        case QueryAsk::kTimeBlockMaxBandwidth:
          if (!q.block) bad_intent("total-block-maximum-bandwidth needs start and end");
          break;
        case QueryAsk::kSlidingWindow:
          if (!q.duration) bad_intent("bandwidth-sliding-window needs a duration");
          break;
        case QueryAsk::kTimeBandwidthProduct:
          if (!q.tbp_mbytes) bad_intent("time-bandwidth-product needs tbp-mbytes");
          break;
        case QueryAsk::kMaximumBandwidth:
          break;
      }
      out.queries.push_back(std::move(q));
    }
  }
  return out;
}

ServiceIntent normalize_intent(const json& doc, int64_t now, int64_t default_duration) {
  protocol::IntentDocument d;
  try {
    d = protocol::decode_intent(doc);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMalformedIntent, e.what(), e.detail());
  }
  return normalize_intent(d, now, default_duration);
}

// --- calendar view ---------------------------------------------------------------

CalendarView::CalendarView(const UnionModel& u, Base base) : u_(&u), base_(base) {
  if (base_ == Base::kEmpty) {
    for (size_t i = 0; i < u.port_count(); ++i) {
      const Port* p = u.port(i).port;
      owned_.emplace(i, ReservationCalendar(p->urn, p->reservable, p->labels,
                                            u.calendar(i).overbook_factor()));
    }
  }
}

const ReservationCalendar& CalendarView::calendar(size_t port) const {
  auto it = owned_.find(port);
  return it != owned_.end() ? it->second : u_->calendar(port);
}

ReservationCalendar& CalendarView::mutable_calendar(size_t port) {
  auto it = owned_.find(port);
  if (it == owned_.end()) it = owned_.emplace(port, u_->calendar(port)).first;
  return it->second;
}

std::vector<Mbps> CalendarView::availability(const TimeInterval& interval, QosClass qos) const {
  std::vector<Mbps> out(u_->port_count());
  for (size_t i = 0; i < out.size(); ++i) out[i] = calendar(i).available_bandwidth(interval, qos);
  return out;
}

void CalendarView::overlay(const std::vector<ReservationSegment>& segments) {
  for (const auto& seg : segments) {
    auto idx = u_->port_index(seg.port_urn);
    if (!idx) continue;
    const auto& allocs = calendar(*idx).allocations();
    bool known = std::any_of(allocs.begin(), allocs.end(), [&](const Allocation& a) {
      return a.segment.connection_id == seg.connection_id;
    });
    if (!known) mutable_calendar(*idx).insert_committed(seg, "in-flight");
  }
}

std::vector<int64_t> CalendarView::breakpoints() const {
  std::vector<int64_t> out;
  for (size_t i = 0; i < u_->port_count(); ++i) {
    auto b = calendar(i).breakpoints();
    out.insert(out.end(), b.begin(), b.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// --- paths ---------------------------------------------------------------------------

std::optional<std::vector<size_t>> find_path_by_availability(const UnionModel& u,
                                                            const std::vector<Mbps>& avail,
                                                            size_t src, size_t dst, Mbps mbps) {
  auto dist = bfs(u, avail, {dst}, mbps);
  if (dist[src] == kUnreached) return std::nullopt;
  return descend(u, dist, src);
}

std::optional<Mbps> widest_bottleneck(const UnionModel& u, const std::vector<Mbps>& avail,
                                      size_t src, size_t dst) {
  std::vector<Mbps> width(u.port_count(), -1);
  std::priority_queue<std::pair<Mbps, size_t>> pq;
  width[src] = avail[src];
  pq.emplace(width[src], src);
  while (!pq.empty()) {
    auto [w, v] = pq.top();
    pq.pop();
    if (w < width[v]) continue;
    if (v == dst) return w;
    for (size_t n : u.neighbors(v)) {
      Mbps nw = std::min(w, avail[n]);
      if (nw > width[n]) {
        width[n] = nw;
        pq.emplace(nw, n);
      }
    }
  }
  return std::nullopt;
}

std::vector<size_t> find_path(const CalendarView& view, size_t src, size_t dst,
                              const TimeInterval& interval, Mbps mbps, QosClass qos) {
  const UnionModel& u = view.model();
  auto avail = view.availability(interval, qos);
  if (auto path = find_path_by_availability(u, avail, src, dst, mbps)) return *path;
  throw Error(ErrorCode::kNoPath,
              "no path with " + std::to_string(mbps) + " mbps between " + u.port(src).urn.str() +
                  " and " + u.port(dst).urn.str(),
              {{"src", u.port(src).urn.str()},
               {"dst", u.port(dst).urn.str()},
               {"requested", mbps},
               {"bottleneck", bottleneck_detail(u, avail, src, dst)}});
}

PathResult widest_path(const CalendarView& view, size_t src, size_t dst,
                       const TimeInterval& interval, QosClass qos) {
  const UnionModel& u = view.model();
  auto avail = view.availability(interval, qos);
  auto width = widest_bottleneck(u, avail, src, dst);
  if (!width) {
    throw Error(ErrorCode::kNoPath,
                u.port(src).urn.str() + " and " + u.port(dst).urn.str() + " are not connected",
                {{"src", u.port(src).urn.str()}, {"dst", u.port(dst).urn.str()}, {"bottleneck", nullptr}});
  }
  return PathResult{*find_path_by_availability(u, avail, src, dst, *width), *width};
}

// --- labels -----------------------------------------------------------------------------

std::map<std::string, int> select_vlans(const CalendarView& view, const std::vector<size_t>& ports,
                                        const std::vector<std::pair<size_t, size_t>>& boundaries,
                                        const TimeInterval& interval,
                                        const std::vector<LabelPin>& pins) {
  const UnionModel& u = view.model();
  VlanSet global = VlanSet::all();
  std::map<std::string, VlanSet> per_domain;
  for (size_t p : ports) {
    VlanSet s = view.calendar(p).available_labels(interval);
    for (const auto& pin : pins) {
      if (pin.port != p) continue;
      VlanSet only;
      if (s.contains(pin.vlan)) only.insert(pin.vlan);
      s = only;
    }
    global &= s;
    auto [it, fresh] = per_domain.try_emplace(u.port(p).domain_id, VlanSet::all());
    it->second &= s;
  }
  std::map<std::string, int> out;
  if (auto v = global.min()) {
    for (const auto& [d, set] : per_domain) out[d] = *v;
    return out;
  }
  for (const auto& [a, b] : boundaries) {
    if (!u.port(a).port->swap_capable || !u.port(b).port->swap_capable) {
      throw Error(ErrorCode::kNoLabel,
                  "no common vlan and boundary " + u.port(a).urn.str() + " - " + u.port(b).urn.str() +
                      " cannot swap",
                  {{"a", u.port(a).urn.str()}, {"b", u.port(b).urn.str()}});
    }
  }
  for (const auto& [d, set] : per_domain) {
    auto v = set.min();
    if (!v) throw Error(ErrorCode::kNoLabel, "no vlan free across domain " + d, {{"domain", d}});
    out[d] = *v;
  }
  return out;
}

// --- design ---------------------------------------------------------------------------------

std::vector<ReservationSegment> ConnectionDesign::segments() const {
  std::vector<ReservationSegment> out;
  out.reserve(ports.size());
  for (const auto& p : ports) {
    out.push_back(ReservationSegment{connection_id, p, vlans.at(std::string(p.domain())), bandwidth,
                                     qos, interval});
  }
  return out;
}

json to_json(const ServiceDesign& d) {
  json conns = json::array();
  for (const auto& c : d.connections) {
    json ports = json::array();
    for (const auto& p : c.ports) ports.push_back(p.str());
    json edges = json::array();
    for (const auto& [a, b] : c.edges) edges.push_back(json::array({a.str(), b.str()}));
    conns.push_back({{"name", c.name},
                     {"connection_id", c.connection_id},
                     {"ports", ports},
                     {"edges", edges},
                     {"domains", c.domains},
                     {"vlans", c.vlans},
                     {"bandwidth", c.bandwidth},
                     {"qos_class", to_string(c.qos)},
                     {"interval", json::array({c.interval.start, c.interval.end})}});
  }
  json deltas = json::array();
  for (const auto& delta : d.deltas) deltas.push_back(to_json(delta));
  return json{{"service_type", to_string(d.type)},
              {"domains", d.domains},
              {"connections", conns},
              {"deltas", deltas}};
}

ServiceDesign design_from_json(const json& j) {
  ObjectReader r(j, "design");
  ServiceDesign d;
  std::string type = r.required<std::string>("service_type");
  d.type = type == to_string(ServiceType::kP2P) ? ServiceType::kP2P : ServiceType::kMultipoint;
  d.domains = r.required<std::vector<std::string>>("domains");
  for (const auto& cj : r.raw("connections")) {
    ObjectReader cr(cj, "design connection");
    ConnectionDesign c;
    c.name = cr.required<std::string>("name");
    c.connection_id = cr.required<std::string>("connection_id");
    for (const auto& p : cr.required<std::vector<std::string>>("ports")) c.ports.emplace_back(p);
    for (const auto& e : cr.required<std::vector<std::vector<std::string>>>("edges")) {
      if (e.size() != 2) throw Error(ErrorCode::kMalformedDocument, "design edge must be a pair");
      c.edges.emplace_back(Urn(e[0]), Urn(e[1]));
    }
    c.domains = cr.required<std::vector<std::string>>("domains");
    c.vlans = cr.required<std::map<std::string, int>>("vlans");
    c.bandwidth = cr.required<Mbps>("bandwidth");
    c.qos = qos_from_string(cr.required<std::string>("qos_class"));
    auto iv = cr.required<std::vector<int64_t>>("interval");
    if (iv.size() != 2) throw Error(ErrorCode::kMalformedDocument, "design interval must be a pair");
    c.interval = {iv[0], iv[1]};
    cr.finish();
    d.connections.push_back(std::move(c));
  }
  for (const auto& dj : r.raw("deltas")) d.deltas.push_back(delta_from_json(dj));
  r.finish();
  return d;
}

ServiceDesign compute_p2p(const ServiceIntent& intent, const UnionModel& u,
                          const std::string& id_prefix,
                          const std::vector<ReservationSegment>& in_flight) {
  CalendarView view(u);
  view.overlay(in_flight);
  std::vector<ConnectionDesign> out;
  for (size_t i = 0; i < intent.connections.size(); ++i) {
    const auto& c = intent.connections[i];
    out.push_back(for_connection(c.name, [&] {
      if (c.terminals.size() != 2) bad_intent("P2P connection needs exactly 2 terminals");
      Mbps mbps = require_mbps(c);
      auto terms = terminal_ports(c, u);
      if (terms[0] == terms[1]) {
        bad_intent("both terminals resolve to the same port", {{"port", u.port(terms[0]).urn.str()}});
      }
      auto path = find_path(view, terms[0], terms[1], c.interval, mbps, c.qos);
      std::vector<std::pair<size_t, size_t>> edges;
      for (size_t k = 0; k + 1 < path.size(); ++k) edges.emplace_back(path[k], path[k + 1]);
      return finish_connection(view, c, id_prefix + "/" + std::to_string(i), path, edges,
                               pins_for(c, terms));
    }));
  }
  return assemble(ServiceType::kP2P, std::move(out), u, id_prefix);
}

ServiceDesign compute_multipoint(const ServiceIntent& intent, const UnionModel& u,
                                 const std::string& id_prefix,
                                 const std::vector<ReservationSegment>& in_flight) {
  CalendarView view(u);
  view.overlay(in_flight);
  std::vector<ConnectionDesign> out;
  for (size_t i = 0; i < intent.connections.size(); ++i) {
    const auto& c = intent.connections[i];
    out.push_back(for_connection(c.name, [&] {
      if (c.terminals.size() < 3) bad_intent("multipoint connection needs at least 3 terminals");
      Mbps mbps = require_mbps(c);
      auto terms = terminal_ports(c, u);
      auto avail = view.availability(c.interval, c.qos);

      std::vector<size_t> tree{terms[0]};
      std::vector<bool> in_tree(u.port_count(), false);
      in_tree[terms[0]] = true;
      std::vector<std::pair<size_t, size_t>> edges;
      std::vector<size_t> pending(terms.begin() + 1, terms.end());
      if (avail[terms[0]] < mbps) {
        throw Error(ErrorCode::kNoPath, "terminal lacks " + std::to_string(mbps) + " mbps",
                    {{"terminal", c.terminals[0].uri.str()}, {"available", avail[terms[0]]}});
      }
      while (!pending.empty()) {
        auto dist = bfs(u, avail, tree, mbps);
        size_t pick = pending.size();
        for (size_t k = 0; k < pending.size(); ++k) {
          size_t d = dist[pending[k]];
          if (d == kUnreached) continue;
          if (pick == pending.size() || d < dist[pending[pick]]) pick = k;
        }
        if (pick == pending.size()) {
          size_t t = pending.front();
          throw Error(ErrorCode::kNoPath, "terminal " + u.port(t).urn.str() + " cannot be attached",
                      {{"terminal", u.port(t).urn.str()},
                       {"requested", mbps},
                       {"bottleneck", bottleneck_detail(u, avail, terms[0], t)}});
        }
        auto walk = descend(u, dist, pending[pick]);
        for (size_t k = walk.size() - 1; k > 0; --k) {
          edges.emplace_back(walk[k], walk[k - 1]);
          if (!in_tree[walk[k - 1]]) {
            in_tree[walk[k - 1]] = true;
            tree.push_back(walk[k - 1]);
          }
        }
        pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      return finish_connection(view, c, id_prefix + "/" + std::to_string(i), tree, edges,
                               pins_for(c, terms));
    }));
  }
  return assemble(ServiceType::kMultipoint, std::move(out), u, id_prefix);
}

ServiceDesign compute_design(const ServiceIntent& intent, const UnionModel& u,
                             const std::string& id_prefix,
                             const std::vector<ReservationSegment>& in_flight) {
  return intent.type == ServiceType::kP2P ? compute_p2p(intent, u, id_prefix, in_flight)
                                          : compute_multipoint(intent, u, id_prefix, in_flight);
}

bool design_fits(const ServiceDesign& design, const UnionModel& u,
                 const std::vector<ReservationSegment>& in_flight) {
  CalendarView view(u);
  view.overlay(in_flight);
  for (const auto& c : design.connections) {
    for (const auto& seg : c.segments()) {
      auto idx = u.port_index(seg.port_urn);
      if (!idx) return false;
      const auto& cal = view.calendar(*idx);
      if (!cal.available_labels(seg.interval).contains(seg.vlan)) return false;
      if (cal.available_bandwidth(seg.interval, seg.qos_class) < seg.bandwidth) return false;
    }
  }
  return true;
}

std::vector<ModelDelta> partition_deltas(const ServiceDesign& design, const UnionModel& u,
                                         const std::string& delta_key) {
  std::vector<ModelDelta> out;
  for (const auto& domain : design.domains) {
    ModelDelta d;
    d.delta_id = name_uuid(delta_key + "/" + domain);
    d.target_domain = domain;
    auto it = u.models().find(domain);
    d.base_model_version = it == u.models().end() ? 0 : it->second.version;
    for (const auto& c : design.connections) {
      for (auto& s : c.segments()) {
        if (s.port_urn.domain() == domain) d.addition.push_back(std::move(s));
      }
    }
    canonicalize(d);
    out.push_back(std::move(d));
  }
  return out;
}

// --- queries ------------------------------------------------------------------------------------

int64_t tbp_duration(int64_t tbp_mbytes, Mbps mbps) {
  int64_t bits = tbp_mbytes * 8;
  return (bits + mbps - 1) / mbps;
}

namespace {

Mbps width_or_throw(const UnionModel& u, const std::vector<Mbps>& avail,
                    const std::vector<size_t>& terms) {
  auto w = terminals_width(u, avail, terms);
  if (!w) {
    throw Error(ErrorCode::kNoPath, "terminals are not connected",
                {{"src", u.port(terms.front()).urn.str()}});
  }
  return *w;
}

// Earliest start in the window with a feasible [t, t+duration); nullopt if none.
std::optional<int64_t> earliest_start(const CalendarView& view, const std::vector<size_t>& terms,
                                      QosClass qos, Mbps mbps, int64_t duration,
                                      const TimeInterval& window,
                                      const std::vector<int64_t>& breakpoints) {
  if (duration > window.length()) return std::nullopt;
  std::vector<int64_t> starts{window.start};
  for (int64_t t : breakpoints) {
    if (t > window.start && t <= window.end - duration) starts.push_back(t);
  }
  for (int64_t t : starts) {
    auto avail = view.availability({t, t + duration}, qos);
    if (terminals_connected(view.model(), avail, terms, mbps)) return t;
  }
  return std::nullopt;
}

}  // namespace

MaxBandwidth query_max_bandwidth(const ConnectionReq& c, const UnionModel& u, int64_t now) {
  auto terms = terminal_ports(c, u);
  TimeInterval instant{now, now + 1};
  CalendarView live(u);
  CalendarView empty(u, CalendarView::Base::kEmpty);
  return MaxBandwidth{width_or_throw(u, live.availability(instant, c.qos), terms),
                      width_or_throw(u, empty.availability(instant, c.qos), terms)};
}

Mbps query_tbmb(const ConnectionReq& c, const TimeInterval& block, const UnionModel& u) {
  auto terms = terminal_ports(c, u);
  CalendarView view(u);
  return width_or_throw(u, view.availability(block, c.qos), terms);
}

TimeInterval query_bsw(const ConnectionReq& c, int64_t duration, const TimeInterval& window,
                       Mbps mbps, const UnionModel& u) {
  auto terms = terminal_ports(c, u);
  CalendarView view(u);
  auto start = earliest_start(view, terms, c.qos, mbps, duration, window, view.breakpoints());
  if (!start) {
    throw Error(ErrorCode::kNoFeasibleWindow,
                "no " + std::to_string(duration) + " s window with " + std::to_string(mbps) + " mbps",
                {{"duration", duration}, {"mbps", mbps}, {"window", {window.start, window.end}}});
  }
  return {*start, *start + duration};
}

Schedule query_tbp(const ConnectionReq& c, int64_t tbp_mbytes, const TimeInterval& window,
                   Mbps bmin, Mbps bmax, TbpMode mode, const UnionModel& u) {
  if (tbp_mbytes <= 0) bad_intent("tbp-mbytes must be positive", {{"tbp-mbytes", tbp_mbytes}});
  if (bmin <= 0 || bmin > bmax) bad_intent("bad bandwidth bounds", {{"min", bmin}, {"max", bmax}});
  auto terms = terminal_ports(c, u);
  CalendarView view(u);
  auto bps = view.breakpoints();
  int64_t bits = tbp_mbytes * 8;

  // Feasible optima sit at a bound, at an availability level (or one above
  // it), or at the rate that exactly fills a stretch between breakpoints.
  std::vector<int64_t> times{window.start};
  for (int64_t t : bps) {
    if (t > window.start && t < window.end) times.push_back(t);
  }
  std::set<Mbps> cand{bmin, bmax};
  auto consider = [&](Mbps b) {
    if (b >= bmin && b <= bmax) cand.insert(b);
  };
  for (size_t p = 0; p < u.port_count(); ++p) {
    const auto& cal = view.calendar(p);
    for (int64_t t : times) {
      Mbps level = cal.available_at(t, c.qos);
      consider(level);
      consider(level + 1);
    }
  }
  std::vector<int64_t> ends(times.begin() + 1, times.end());
  ends.push_back(window.end);
  for (int64_t t : times) {
    for (int64_t e : ends) {
      if (e > t) consider((bits + (e - t) - 1) / (e - t));
    }
  }

  std::optional<Schedule> best;
  auto try_b = [&](Mbps b) -> std::optional<Schedule> {
    int64_t d = tbp_duration(tbp_mbytes, b);
    auto t = earliest_start(view, terms, c.qos, b, d, window, bps);
    if (!t) return std::nullopt;
    return Schedule{b, {*t, *t + d}};
  };
  switch (mode) {
    case TbpMode::kHighest:
      for (auto it = cand.rbegin(); it != cand.rend() && !best; ++it) best = try_b(*it);
      break;
    case TbpMode::kLowest:
      for (auto it = cand.begin(); it != cand.end() && !best; ++it) best = try_b(*it);
      break;
    case TbpMode::kDefault:
      for (auto it = cand.rbegin(); it != cand.rend(); ++it) {
        auto s = try_b(*it);
        if (s && (!best || s->interval.end < best->interval.end)) best = s;
      }
      break;
  }
  if (!best) {
    throw Error(ErrorCode::kNoFeasibleSchedule,
                "no rate in [" + std::to_string(bmin) + ", " + std::to_string(bmax) +
                    "] moves " + std::to_string(tbp_mbytes) + " MB inside the window",
                {{"tbp-mbytes", tbp_mbytes}, {"min", bmin}, {"max", bmax},
                 {"window", {window.start, window.end}}});
  }
  return *best;
}

protocol::QueryResponseDoc answer_queries(const ServiceIntent& intent, const UnionModel& u,
                                          int64_t now, int utc_offset_minutes) {
  protocol::QueryResponseDoc out;
  auto fmt = [&](int64_t t) { return format_iso8601(t, utc_offset_minutes); };
  for (const auto& q : intent.queries) {
    const auto& c = intent.connections[q.connection];
    protocol::QueryAnswerDoc a;
    a.ask = std::string(to_string(q.ask));
    a.name = c.name;
    for_connection(c.name, [&] {
      switch (q.ask) {
        case QueryAsk::kMaximumBandwidth: {
          auto mb = query_max_bandwidth(c, u, now);
          a.bandwidth = mb.capability;
          out.connections.push_back({c.name, std::string(to_string(c.qos)), mb.capacity_now, "mbps"});
          break;
        }
        case QueryAsk::kTimeBlockMaxBandwidth:
          a.bandwidth = query_tbmb(c, *q.block, u);
          a.start = fmt(q.block->start);
          a.end = fmt(q.block->end);
          break;
        case QueryAsk::kSlidingWindow: {
          TimeInterval window = q.window.value_or(c.interval);
          Mbps mbps = require_mbps(c);
          auto iv = query_bsw(c, *q.duration, window, mbps, u);
          a.bandwidth = mbps;
          a.start = fmt(iv.start);
          a.end = fmt(iv.end);
          break;
        }
        case QueryAsk::kTimeBandwidthProduct: {
          TimeInterval window = q.window.value_or(c.interval);
          Mbps bmax = q.bandwidth_max.value_or(0);
          if (!q.bandwidth_max) {
            for (size_t p : terminal_ports(c, u)) bmax = std::max(bmax, u.port(p).port->reservable);
          }
          auto s = query_tbp(c, *q.tbp_mbytes, window, q.bandwidth_min.value_or(1), bmax, q.mode, u);
          a.bandwidth = s.bandwidth;
          a.start = fmt(s.interval.start);
          a.end = fmt(s.interval.end);
          break;
        }
      }
    });
    out.queries.push_back(std::move(a));
  }
  return out;
}

}  // namespace sense
