#include "sense/topology.hpp"

#include <algorithm>
#include <set>

#include "sense/error.hpp"

namespace sense {

std::optional<size_t> UnionModel::port_index(const Urn& urn) const {
  auto it = port_by_urn_.find(urn.str());
  if (it == port_by_urn_.end()) return std::nullopt;
  return it->second;
}

bool UnionModel::adjacent(size_t a, size_t b) const {
  const auto& n = adjacency_[a];
  return std::binary_search(n.begin(), n.end(), b);
}

Location UnionModel::locate(const Urn& urn) const {
  if (auto idx = port_index(urn)) {
    const auto& p = ports_[*idx];
    return Location{p.domain_id, p.node, p.port};
  }
  auto it = node_by_urn_.find(urn.str());
  if (it != node_by_urn_.end()) {
    return Location{std::string(urn.domain()), it->second, nullptr};
  }
  throw Error(ErrorCode::kUnknownUrn, "unknown URN " + urn.str(), {{"urn", urn.str()}});
}

size_t UnionModel::terminal_port(const Urn& urn) const {
  Location loc = locate(urn);
  if (loc.port) return *port_index(loc.port->urn);
  if (loc.node->ports.empty()) {
    throw Error(ErrorCode::kUnknownUrn, "node " + urn.str() + " has no ports", {{"urn", urn.str()}});
  }
  // Node ports are kept sorted, so the first is the lowest URN.
  return *port_index(loc.node->ports.front().urn);
}

json UnionModel::export_graph() const {
  json nodes = json::array();
  for (const auto& [domain, model] : models_) {
    for (const auto& n : model.nodes) {
      nodes.push_back({{"id", n.urn.str()}, {"domain", domain}, {"kind", to_string(n.kind)}});
    }
  }
  json edges = json::array();
  for (const auto& e : edges_) {
    const auto& pa = ports_[*port_index(e.a)];
    const auto& pb = ports_[*port_index(e.b)];
    if (pa.node == pb.node) continue;  // switch cross-connects are not graph edges
    edges.push_back({{"source", pa.node->urn.str()},
                     {"target", pb.node->urn.str()},
                     {"a", e.a.str()},
                     {"b", e.b.str()},
                     {"scope", e.scope == EdgeScope::kInter ? "inter" : "intra"}});
  }
  return json{{"directed", false}, {"nodes", nodes}, {"edges", edges}};
}

std::shared_ptr<const UnionModel> integrate_models(std::vector<DomainModel> models,
                                                   double overbook_factor) {
  auto u = std::shared_ptr<UnionModel>(new UnionModel());
  for (auto& m : models) {
    std::string id = m.domain_id;
    if (!u->models_.emplace(id, std::move(m)).second) {
      throw Error(ErrorCode::kDuplicateDomain, "domain " + id + " supplied twice", {{"domain", id}});
    }
  }

  for (const auto& [domain, model] : u->models_) {
    for (const auto& node : model.nodes) {
      u->node_by_urn_[node.urn.str()] = &node;
      for (const auto& port : node.ports) {
        u->ports_.push_back({port.urn, domain, &node, &port});
      }
    }
  }
  std::sort(u->ports_.begin(), u->ports_.end(),
            [](const auto& a, const auto& b) { return a.urn < b.urn; });
  for (size_t i = 0; i < u->ports_.size(); ++i) u->port_by_urn_[u->ports_[i].urn.str()] = i;

  std::set<std::pair<size_t, size_t>> pairs;
  auto connect = [&](size_t a, size_t b) {
    if (a == b) return;
    pairs.emplace(std::min(a, b), std::max(a, b));
  };
  for (const auto& [domain, model] : u->models_) {
    for (const auto& node : model.nodes) {
      if (node.kind != NodeKind::kSwitch) continue;
      for (size_t i = 0; i < node.ports.size(); ++i) {
        for (size_t j = i + 1; j < node.ports.size(); ++j) {
          connect(*u->port_index(node.ports[i].urn), *u->port_index(node.ports[j].urn));
        }
      }
    }
    for (const auto& link : model.links) {
      connect(*u->port_index(link.a), *u->port_index(link.b));
    }
  }
  // Inter-domain edges need both sides to name each other.
  for (size_t i = 0; i < u->ports_.size(); ++i) {
    const Port* p = u->ports_[i].port;
    if (!p->alias) continue;
    auto j = u->port_index(*p->alias);
    if (!j) continue;  // dangling alias
    const Port* q = u->ports_[*j].port;
    if (!q->alias || *q->alias != p->urn) continue;
    if (i < *j) {
      connect(i, *j);
      if (p->capacity != q->capacity || p->reservable != q->reservable) {
        u->warnings_.push_back("aliased ports " + p->urn.str() + " and " + q->urn.str() +
                               " disagree on capacity; the smaller value bounds the edge");
      }
    }
  }

  u->adjacency_.assign(u->ports_.size(), {});
  for (const auto& [a, b] : pairs) {
    u->adjacency_[a].push_back(b);
    u->adjacency_[b].push_back(a);
    EdgeScope scope = u->ports_[a].domain_id == u->ports_[b].domain_id ? EdgeScope::kIntra
                                                                        : EdgeScope::kInter;
    u->edges_.push_back({u->ports_[a].urn, u->ports_[b].urn, scope});
  }
  for (auto& n : u->adjacency_) std::sort(n.begin(), n.end());

  u->calendars_.reserve(u->ports_.size());
  for (const auto& info : u->ports_) {
    const DomainModel& m = u->models_.at(info.domain_id);
    Mbps reservable = info.port->reservable;
    if (m.verbosity == Verbosity::kSummary) {
      auto it = m.reserved_by_port.find(info.urn.str());
      if (it != m.reserved_by_port.end()) reservable = std::max<Mbps>(0, reservable - it->second);
    }
    u->calendars_.emplace_back(info.urn, reservable, info.port->labels, overbook_factor);
  }
  for (const auto& [domain, model] : u->models_) {
    for (const auto& s : model.active_reservations) {
      if (auto idx = u->port_index(s.port_urn)) u->calendars_[*idx].insert_committed(s);
    }
  }
  return u;
}

std::vector<std::string> domains_on_path(const UnionModel& u, const std::vector<Urn>& path) {
  if (path.empty()) throw Error(ErrorCode::kInvalidPath, "empty path");
  std::vector<std::string> out;
  std::optional<size_t> prev;
  for (const auto& urn : path) {
    auto idx = u.port_index(urn);
    if (!idx) throw Error(ErrorCode::kInvalidPath, "path names unknown port " + urn.str(), {{"urn", urn.str()}});
    if (prev && !u.adjacent(*prev, *idx)) {
      throw Error(ErrorCode::kInvalidPath, "ports " + u.port(*prev).urn.str() + " and " + urn.str() + " are not adjacent",
                  {{"a", u.port(*prev).urn.str()}, {"b", urn.str()}});
    }
    const std::string& d = u.port(*idx).domain_id;
    if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
    prev = idx;
  }
  return out;
}

}  // namespace sense
