#include "sense/model.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include "sense/error.hpp"
#include "sense/json_util.hpp"

namespace sense {

namespace {

constexpr std::string_view kUrnPrefix = "urn:ogf:network:";

[[noreturn]] void violation(const std::string& message, const std::string& urn) {
  throw Error(ErrorCode::kInvariantViolation, message + " (" + urn + ")", {{"urn", urn}});
}

}  // namespace

// --- Urn -------------------------------------------------------------------

bool Urn::valid(std::string_view v) {
  if (v.substr(0, kUrnPrefix.size()) != kUrnPrefix) return false;
  std::string_view rest = v.substr(kUrnPrefix.size());
  size_t c1 = rest.find(':');
  if (c1 == std::string_view::npos || c1 == 0) return false;
  std::string_view domain = rest.substr(0, c1);
  if (domain.find('+') != std::string_view::npos) return false;
  rest = rest.substr(c1 + 1);
  size_t c2 = rest.find(':');
  if (c2 != 4) return false;
  for (size_t i = 0; i < 4; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(rest[i]))) return false;
  }
  std::string_view local = rest.substr(5);
  if (local.empty() || local.find(':') != std::string_view::npos) return false;
  // local-id followed by zero or more non-empty +sub-id parts
  size_t start = 0;
  while (true) {
    size_t plus = local.find('+', start);
    size_t len = (plus == std::string_view::npos ? local.size() : plus) - start;
    if (len == 0) return false;
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return true;
}

Urn::Urn(std::string value) : value_(std::move(value)) {
  if (!valid(value_)) violation("malformed URN", value_);
}

std::string_view Urn::domain() const {
  if (value_.empty()) return {};
  std::string_view rest = std::string_view(value_).substr(kUrnPrefix.size());
  return rest.substr(0, rest.find(':'));
}

// --- VlanSet / LabelRange ----------------------------------------------------

std::optional<int> VlanSet::min() const {
  for (int v = kMinVlan; v <= kMaxVlan; ++v) {
    if (bits_.test(static_cast<size_t>(v))) return v;
  }
  return std::nullopt;
}

std::vector<int> VlanSet::values() const {
  std::vector<int> out;
  for (int v = kMinVlan; v <= kMaxVlan; ++v) {
    if (bits_.test(static_cast<size_t>(v))) out.push_back(v);
  }
  return out;
}

VlanSet VlanSet::all() {
  VlanSet s;
  for (int v = kMinVlan; v <= kMaxVlan; ++v) s.insert(v);
  return s;
}

LabelRange::LabelRange(std::vector<std::pair<int, int>> ranges) {
  for (const auto& [lo, hi] : ranges) {
    if (lo < kMinVlan || hi > kMaxVlan || lo > hi) {
      throw Error(ErrorCode::kInvariantViolation,
                  "vlan range [" + std::to_string(lo) + "," + std::to_string(hi) +
                      "] outside 1..4094",
                  {{"lo", lo}, {"hi", hi}});
    }
  }
  std::sort(ranges.begin(), ranges.end());
  for (const auto& r : ranges) {
    if (!ranges_.empty() && r.first <= ranges_.back().second + 1) {
      ranges_.back().second = std::max(ranges_.back().second, r.second);
    } else {
      ranges_.push_back(r);
    }
  }
}

bool LabelRange::contains(int vlan) const {
  auto it = std::upper_bound(ranges_.begin(), ranges_.end(), std::pair{vlan, kMaxVlan + 1});
  if (it == ranges_.begin()) return false;
  --it;
  return it->first <= vlan && vlan <= it->second;
}

VlanSet LabelRange::to_set() const {
  VlanSet s;
  for (const auto& [lo, hi] : ranges_) {
    for (int v = lo; v <= hi; ++v) s.insert(v);
  }
  return s;
}

// --- enums -------------------------------------------------------------------

std::string_view to_string(QosClass q) {
  switch (q) {
    case QosClass::kGuaranteedCapped: return "guaranteedCapped";
    case QosClass::kSoftCapped: return "softCapped";
    case QosClass::kBestEffort: return "bestEffort";
  }
  return "";
}

std::string_view to_string(NodeKind k) { return k == NodeKind::kSwitch ? "switch" : "dtn"; }

std::string_view to_string(Verbosity v) {
  switch (v) {
    case Verbosity::kStatic: return "static";
    case Verbosity::kSummary: return "summary";
    case Verbosity::kFull: return "full";
  }
  return "";
}

QosClass qos_from_string(std::string_view s) {
  if (s == "guaranteedCapped") return QosClass::kGuaranteedCapped;
  if (s == "softCapped") return QosClass::kSoftCapped;
  if (s == "bestEffort") return QosClass::kBestEffort;
  throw Error(ErrorCode::kMalformedDocument, "unknown qos_class '" + std::string(s) + "'");
}

NodeKind node_kind_from_string(std::string_view s) {
  if (s == "switch") return NodeKind::kSwitch;
  if (s == "dtn") return NodeKind::kDtn;
  throw Error(ErrorCode::kMalformedDocument, "unknown node kind '" + std::string(s) + "'");
}

Verbosity verbosity_from_string(std::string_view s) {
  if (s == "static") return Verbosity::kStatic;
  if (s == "summary") return Verbosity::kSummary;
  if (s == "full") return Verbosity::kFull;
  throw Error(ErrorCode::kMalformedDocument, "unknown verbosity '" + std::string(s) + "'");
}

// --- canonical order + validation ---------------------------------------------

bool segment_less(const ReservationSegment& a, const ReservationSegment& b) {
  return std::tie(a.connection_id, a.port_urn, a.interval, a.vlan, a.bandwidth) <
         std::tie(b.connection_id, b.port_urn, b.interval, b.vlan, b.bandwidth);
}

const Port* DomainModel::find_port(const Urn& urn) const {
  for (const auto& n : nodes) {
    for (const auto& p : n.ports) {
      if (p.urn == urn) return &p;
    }
  }
  return nullptr;
}

void canonicalize(DomainModel& m) {
  for (auto& n : m.nodes) {
    std::sort(n.ports.begin(), n.ports.end(),
              [](const Port& a, const Port& b) { return a.urn < b.urn; });
  }
  std::sort(m.nodes.begin(), m.nodes.end(),
            [](const NodeDesc& a, const NodeDesc& b) { return a.urn < b.urn; });
  for (auto& l : m.links) {
    if (l.b < l.a) std::swap(l.a, l.b);
  }
  std::sort(m.links.begin(), m.links.end());
  std::sort(m.active_reservations.begin(), m.active_reservations.end(), segment_less);
}

void validate(const ReservationSegment& s) {
  if (s.interval.start >= s.interval.end) violation("segment interval start >= end", s.port_urn.str());
  if (s.bandwidth <= 0) violation("segment bandwidth must be positive", s.port_urn.str());
  if (s.vlan < kMinVlan || s.vlan > kMaxVlan) violation("segment vlan outside 1..4094", s.port_urn.str());
  if (s.connection_id.empty()) violation("segment without connection_id", s.port_urn.str());
}

void validate(const DomainModel& m) {
  if (m.domain_id.empty()) violation("empty domain_id", "");
  std::set<Urn> seen;
  for (const auto& n : m.nodes) {
    if (n.urn.domain() != m.domain_id) violation("node outside its domain", n.urn.str());
    if (!seen.insert(n.urn).second) violation("duplicate URN", n.urn.str());
    for (const auto& p : n.ports) {
      if (p.urn.domain() != n.urn.domain()) violation("port outside its node's domain", p.urn.str());
      if (!seen.insert(p.urn).second) violation("duplicate URN", p.urn.str());
      if (p.reservable < 0 || p.reservable > p.capacity) {
        violation("reservable outside 0..capacity", p.urn.str());
      }
      if (p.alias && p.alias->domain() == p.urn.domain()) {
        violation("alias must name a port in another domain", p.urn.str());
      }
    }
  }
  for (const auto& l : m.links) {
    if (l.a == l.b) violation("self link", l.a.str());
    if (!m.find_port(l.a)) violation("link endpoint is not a port of this domain", l.a.str());
    if (!m.find_port(l.b)) violation("link endpoint is not a port of this domain", l.b.str());
  }
  if (m.verbosity != Verbosity::kFull && !m.active_reservations.empty()) {
    violation("active_reservations present below full verbosity", m.domain_id);
  }
  if (m.verbosity != Verbosity::kSummary && !m.reserved_by_port.empty()) {
    violation("reserved_by_port present outside summary verbosity", m.domain_id);
  }
  for (const auto& s : m.active_reservations) {
    validate(s);
    if (!m.find_port(s.port_urn)) violation("reservation on unknown port", s.port_urn.str());
  }
  for (const auto& [urn, mbps] : m.reserved_by_port) {
    if (mbps < 0) violation("negative reserved bandwidth", urn);
  }
}

void canonicalize(ModelDelta& d) {
  std::sort(d.addition.begin(), d.addition.end(), segment_less);
  std::sort(d.reduction.begin(), d.reduction.end());
  d.reduction.erase(std::unique(d.reduction.begin(), d.reduction.end()), d.reduction.end());
}

void validate(const ModelDelta& d) {
  if (d.delta_id.empty()) violation("delta without id", d.target_domain);
  std::set<std::string> added;
  for (const auto& s : d.addition) {
    validate(s);
    if (s.port_urn.domain() != d.target_domain) {
      violation("addition references a port outside target_domain", s.port_urn.str());
    }
    added.insert(s.connection_id);
  }
  for (const auto& c : d.reduction) {
    if (added.count(c)) violation("connection both added and reduced", c);
  }
}

// --- JSON ------------------------------------------------------------------------

namespace {

json labels_to_json(const LabelRange& r) {
  json arr = json::array();
  for (const auto& [lo, hi] : r.ranges()) arr.push_back(json::array({lo, hi}));
  return json{{"kind", "vlan"}, {"ranges", arr}};
}

LabelRange labels_from_json(const json& j) {
  ObjectReader r(j, "labels");
  if (r.required<std::string>("kind") != "vlan") {
    throw Error(ErrorCode::kMalformedDocument, "labels.kind must be 'vlan'");
  }
  const json& arr = r.raw("ranges");
  r.finish();
  if (!arr.is_array()) throw Error(ErrorCode::kMalformedDocument, "labels.ranges must be an array");
  std::vector<std::pair<int, int>> ranges;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
        !pair[1].is_number_integer()) {
      throw Error(ErrorCode::kMalformedDocument, "labels.ranges entries must be [lo, hi]");
    }
    ranges.emplace_back(pair[0].get<int>(), pair[1].get<int>());
  }
  return LabelRange(std::move(ranges));
}

Urn urn_field(ObjectReader& r, const std::string& key) {
  return Urn(r.required<std::string>(key));
}

const json& array_field(ObjectReader& r, const std::string& key) {
  const json& v = r.raw(key);
  if (!v.is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "field '" + key + "' must be an array");
  }
  return v;
}

}  // namespace

json to_json(const ReservationSegment& s) {
  return json{{"connection_id", s.connection_id},
              {"port_urn", s.port_urn.str()},
              {"vlan", s.vlan},
              {"bandwidth", s.bandwidth},
              {"qos_class", to_string(s.qos_class)},
              {"interval", json::array({s.interval.start, s.interval.end})}};
}

ReservationSegment segment_from_json(const json& j) {
  ObjectReader r(j, "segment");
  ReservationSegment s;
  s.connection_id = r.required<std::string>("connection_id");
  s.port_urn = urn_field(r, "port_urn");
  s.vlan = r.required<int>("vlan");
  s.bandwidth = r.required<Mbps>("bandwidth");
  s.qos_class = qos_from_string(r.required<std::string>("qos_class"));
  const json& iv = r.raw("interval");
  if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number_integer() ||
      !iv[1].is_number_integer()) {
    throw Error(ErrorCode::kMalformedDocument, "segment.interval must be [start, end]");
  }
  s.interval = {iv[0].get<int64_t>(), iv[1].get<int64_t>()};
  r.finish();
  return s;
}

json to_json(const DomainModel& m) {
  json nodes = json::array();
  for (const auto& n : m.nodes) {
    json ports = json::array();
    for (const auto& p : n.ports) {
      json pj{{"urn", p.urn.str()},
              {"capacity", p.capacity},
              {"reservable", p.reservable},
              {"labels", labels_to_json(p.labels)},
              {"swap_capable", p.swap_capable}};
      if (p.alias) pj["alias"] = p.alias->str();
      ports.push_back(std::move(pj));
    }
    nodes.push_back({{"urn", n.urn.str()}, {"kind", to_string(n.kind)}, {"ports", ports}});
  }
  json links = json::array();
  for (const auto& l : m.links) links.push_back(json::array({l.a.str(), l.b.str()}));
  json out{{"domain_id", m.domain_id},
           {"version", m.version},
           {"generated_at", m.generated_at},
           {"verbosity", to_string(m.verbosity)},
           {"nodes", nodes},
           {"links", links}};
  if (m.verbosity == Verbosity::kFull) {
    json res = json::array();
    for (const auto& s : m.active_reservations) res.push_back(to_json(s));
    out["active_reservations"] = res;
  }
  if (m.verbosity == Verbosity::kSummary) out["reserved_by_port"] = m.reserved_by_port;
  return out;
}

DomainModel model_from_json(const json& j) {
  ObjectReader r(j, "model");
  DomainModel m;
  m.domain_id = r.required<std::string>("domain_id");
  m.version = r.required<int64_t>("version");
  m.generated_at = r.required<int64_t>("generated_at");
  m.verbosity = verbosity_from_string(r.required<std::string>("verbosity"));
  for (const auto& nj : array_field(r, "nodes")) {
    ObjectReader nr(nj, "node");
    NodeDesc n;
    n.urn = urn_field(nr, "urn");
    n.kind = node_kind_from_string(nr.required<std::string>("kind"));
    for (const auto& pj : array_field(nr, "ports")) {
      ObjectReader pr(pj, "port");
      Port p;
      p.urn = urn_field(pr, "urn");
      p.capacity = pr.required<Mbps>("capacity");
      p.reservable = pr.required<Mbps>("reservable");
      p.labels = labels_from_json(pr.raw("labels"));
      p.swap_capable = pr.required<bool>("swap_capable");
      if (auto alias = pr.optional<std::string>("alias")) p.alias = Urn(*alias);
      pr.finish();
      n.ports.push_back(std::move(p));
    }
    nr.finish();
    m.nodes.push_back(std::move(n));
  }
  for (const auto& lj : array_field(r, "links")) {
    if (!lj.is_array() || lj.size() != 2 || !lj[0].is_string() || !lj[1].is_string()) {
      throw Error(ErrorCode::kMalformedDocument, "links entries must be [port, port]");
    }
    m.links.push_back({Urn(lj[0].get<std::string>()), Urn(lj[1].get<std::string>())});
  }
  if (const json* res = r.raw_optional("active_reservations")) {
    if (!res->is_array()) throw Error(ErrorCode::kMalformedDocument, "active_reservations must be an array");
    if (m.verbosity != Verbosity::kFull) {
      violation("active_reservations present below full verbosity", m.domain_id);
    }
    for (const auto& sj : *res) m.active_reservations.push_back(segment_from_json(sj));
  } else if (m.verbosity == Verbosity::kFull) {
    throw Error(ErrorCode::kMalformedDocument, "full model without active_reservations");
  }
  if (const json* sum = r.raw_optional("reserved_by_port")) {
    if (!sum->is_object()) throw Error(ErrorCode::kMalformedDocument, "reserved_by_port must be an object");
    for (auto it = sum->begin(); it != sum->end(); ++it) {
      if (!it.value().is_number_integer()) {
        throw Error(ErrorCode::kMalformedDocument, "reserved_by_port values must be integers");
      }
      m.reserved_by_port[it.key()] = it.value().get<Mbps>();
    }
  }
  r.finish();
  canonicalize(m);
  validate(m);
  return m;
}

json to_json(const ModelDelta& d) {
  json add = json::array();
  for (const auto& s : d.addition) add.push_back(to_json(s));
  return json{{"delta_id", d.delta_id},
              {"target_domain", d.target_domain},
              {"base_model_version", d.base_model_version},
              {"addition", add},
              {"reduction", d.reduction}};
}

ModelDelta delta_from_json(const json& j) {
  ObjectReader r(j, "delta");
  ModelDelta d;
  d.delta_id = r.required<std::string>("delta_id");
  d.target_domain = r.required<std::string>("target_domain");
  d.base_model_version = r.required<int64_t>("base_model_version");
  for (const auto& sj : array_field(r, "addition")) d.addition.push_back(segment_from_json(sj));
  for (const auto& c : array_field(r, "reduction")) {
    if (!c.is_string()) throw Error(ErrorCode::kMalformedDocument, "reduction entries must be strings");
    d.reduction.push_back(c.get<std::string>());
  }
  r.finish();
  canonicalize(d);
  validate(d);
  return d;
}

std::string serialize_model(const DomainModel& model) {
  DomainModel m = model;
  canonicalize(m);
  return to_json(m).dump();
}

DomainModel parse_model(std::string_view bytes) {
  return model_from_json(parse_json(bytes, "model document"));
}

std::string serialize_delta(const ModelDelta& delta) {
  ModelDelta d = delta;
  canonicalize(d);
  return to_json(d).dump();
}

ModelDelta parse_delta(std::string_view bytes) {
  return delta_from_json(parse_json(bytes, "delta document"));
}

// --- apply_delta -------------------------------------------------------------

DomainModel apply_delta(const DomainModel& model, const ModelDelta& delta) {
  if (delta.target_domain != model.domain_id) {
    throw Error(ErrorCode::kInvariantViolation,
                "delta for '" + delta.target_domain + "' applied to '" + model.domain_id + "'",
                {{"target_domain", delta.target_domain}});
  }
  for (const auto& s : delta.addition) {
    if (!model.find_port(s.port_urn)) {
      throw Error(ErrorCode::kUnknownPort, "addition references absent port " + s.port_urn.str(),
                  {{"urn", s.port_urn.str()}});
    }
  }
  DomainModel out = model;
  out.version = model.version + 1;
  if (model.verbosity != Verbosity::kFull) return out;

  for (const auto& c : delta.reduction) {
    auto& res = out.active_reservations;
    auto it = std::remove_if(res.begin(), res.end(),
                             [&](const ReservationSegment& s) { return s.connection_id == c; });
    if (it == res.end()) {
      throw Error(ErrorCode::kUnknownConnection, "reduction of absent connection " + c,
                  {{"connection_id", c}});
    }
    res.erase(it, res.end());
  }
  for (const auto& s : delta.addition) out.active_reservations.push_back(s);
  std::sort(out.active_reservations.begin(), out.active_reservations.end(), segment_less);
  return out;
}

}  // namespace sense
