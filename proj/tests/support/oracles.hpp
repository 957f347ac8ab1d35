#pragma once
// Test-side reference implementations. Nothing here calls into the
// algorithms under test: availability is swept second by second, paths are
// enumerated exhaustively, schedules are scanned over every integer rate and
// start time.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sense/calendar.hpp"
#include "sense/model.hpp"

namespace oracle {

using sense::Allocation;
using sense::Mbps;
using sense::QosClass;
using sense::ReservationSegment;
using sense::TimeInterval;

inline int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Availability at one second from raw guaranteed / soft sums, overbook factor 2.
inline Mbps avail_from_sums(Mbps reservable, Mbps g, Mbps s, QosClass q) {
  switch (q) {
    case QosClass::kBestEffort:
      return reservable;
    case QosClass::kGuaranteedCapped:
      return std::max<Mbps>(0, reservable - g - ceil_div(s, 2));
    case QosClass::kSoftCapped:
      return std::max<Mbps>(0, 2 * std::max<Mbps>(0, reservable - g) - s);
  }
  return 0;
}

struct Sums {
  Mbps g = 0;
  Mbps s = 0;
};

inline Sums sums_at(const std::vector<ReservationSegment>& segs, int64_t t) {
  Sums out;
  for (const auto& x : segs) {
    if (x.interval.start <= t && t < x.interval.end) {
      if (x.qos_class == QosClass::kGuaranteedCapped) out.g += x.bandwidth;
      if (x.qos_class == QosClass::kSoftCapped) out.s += x.bandwidth;
    }
  }
  return out;
}

inline Mbps sweep_available(const std::vector<ReservationSegment>& segs, Mbps reservable,
                            const TimeInterval& iv, QosClass q) {
  Mbps best = std::numeric_limits<Mbps>::max();
  for (int64_t t = iv.start; t < iv.end; ++t) {
    auto s = sums_at(segs, t);
    best = std::min(best, avail_from_sums(reservable, s.g, s.s, q));
  }
  return best;
}

inline std::vector<ReservationSegment> segments_of(const std::vector<Allocation>& allocs) {
  std::vector<ReservationSegment> out;
  for (const auto& a : allocs) out.push_back(a.segment);
  return out;
}

// Every calendar invariant checked at every second of [lo, hi). Returns a
// description of the first violation, or empty.
inline std::string sweep_invariants(const sense::ReservationCalendar& cal, int64_t lo, int64_t hi) {
  auto segs = segments_of(cal.allocations());
  for (const auto& s : segs) {
    if (!cal.labels().contains(s.vlan)) return "vlan " + std::to_string(s.vlan) + " outside labels";
  }
  for (int64_t t = lo; t < hi; ++t) {
    auto x = sums_at(segs, t);
    if (x.g > cal.reservable()) return "guaranteed overbooked at " + std::to_string(t);
    if (x.s > 2 * std::max<Mbps>(0, cal.reservable() - x.g)) return "soft overbooked at " + std::to_string(t);
    std::set<int> seen;
    for (const auto& s : segs) {
      if (s.interval.start <= t && t < s.interval.end) {
        if (!seen.insert(s.vlan).second) return "vlan " + std::to_string(s.vlan) + " doubled at " + std::to_string(t);
      }
    }
  }
  return {};
}

// --- small random multi-domain instances ---------------------------------------------

struct PortSpec {
  std::string urn;
  std::string domain;
  Mbps reservable = 0;
  std::vector<ReservationSegment> segs;
};

struct Instance {
  std::vector<sense::DomainModel> models;
  std::vector<PortSpec> ports;                   // indexed like the union: ascending URN
  std::vector<std::vector<size_t>> adj;          // port graph, built from the generator's own wiring
  std::vector<std::string> dtn_nodes;            // terminal candidates (node URNs)
  std::map<std::string, size_t> node_first_port; // node URN -> lowest port index
  int64_t t0 = 0;
};

struct InstanceShape {
  int max_domains = 8;
  int max_nodes = 16;
  int max_allocs = 10;
  int64_t t0 = 1'000'000;
  int64_t horizon = 240;
};

inline std::string urn(const std::string& dom, const std::string& local) {
  return "urn:ogf:network:" + dom + ":2013:" + local;
}

// Random connected instance: each domain has one or two switches; DTNs hang
// off switches; domains are joined by mutually aliased port pairs (plus a few
// dangling or one-sided aliases that must not create edges).
inline Instance random_instance(std::mt19937_64& rng, const InstanceShape& shape = {}) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  Instance inst;
  inst.t0 = shape.t0;
  int domains = pick(1, shape.max_domains);
  int node_budget = shape.max_nodes - 2;  // two DTNs always fit

  struct NodeBuild {
    std::string urn;
    sense::NodeKind kind;
    std::vector<sense::Port> ports;
  };
  std::vector<std::vector<NodeBuild>> nodes(domains);
  std::vector<std::vector<sense::Link>> links(domains);
  std::vector<std::pair<std::string, std::string>> undirected;  // port urn pairs

  auto dom_name = [](int d) { return "d" + std::to_string(d) + ".net"; };
  auto add_port = [&](int d, size_t n, bool swap) {
    auto& node = nodes[d][n];
    std::string p = node.urn + "+p" + std::to_string(node.ports.size());
    sense::Port port;
    port.urn = sense::Urn(p);
    port.capacity = 100;
    port.reservable = pick(30, 100);
    port.labels = sense::LabelRange({{1000, 1009}});
    port.swap_capable = swap;
    node.ports.push_back(port);
    return p;
  };

  std::vector<int> switches_in(domains, 0);
  for (int d = 0; d < domains; ++d) {
    int sw = std::min(pick(1, 2), std::max(1, node_budget - (domains - d - 1)));
    for (int i = 0; i < sw && node_budget > 0; ++i, --node_budget) {
      nodes[d].push_back({urn(dom_name(d), "sw" + std::to_string(i)), sense::NodeKind::kSwitch, {}});
    }
    switches_in[d] = static_cast<int>(nodes[d].size());
    if (switches_in[d] == 2) {
      auto a = add_port(d, 0, false);
      auto b = add_port(d, 1, false);
      links[d].push_back({sense::Urn(std::min(a, b)), sense::Urn(std::max(a, b))});
      undirected.emplace_back(a, b);
    }
  }
  // Spanning tree over domains, then a few extra inter-domain links.
  std::vector<std::pair<int, int>> dlinks;
  for (int d = 1; d < domains; ++d) dlinks.emplace_back(pick(0, d - 1), d);
  int extra = domains > 2 ? pick(0, 2) : 0;
  for (int i = 0; i < extra; ++i) {
    int a = pick(0, domains - 1), b = pick(0, domains - 1);
    if (a != b) dlinks.emplace_back(a, b);
  }
  for (auto [a, b] : dlinks) {
    size_t na = static_cast<size_t>(pick(0, switches_in[a] - 1));
    size_t nb = static_cast<size_t>(pick(0, switches_in[b] - 1));
    auto pa = add_port(a, na, true);
    auto pb = add_port(b, nb, true);
    nodes[a][na].ports.back().alias = sense::Urn(pb);
    nodes[b][nb].ports.back().alias = sense::Urn(pa);
    undirected.emplace_back(pa, pb);
  }
  // One-sided and dangling aliases: no edge.
  if (domains > 1 && pick(0, 1)) {
    auto pa = add_port(0, 0, true);
    auto pb = add_port(1, 0, true);
    nodes[0][0].ports.back().alias = sense::Urn(pb);
    (void)pa;
  }
  if (pick(0, 1)) {
    add_port(domains - 1, 0, true);
    nodes[domains - 1][0].ports.back().alias = sense::Urn(urn("nowhere.net", "x+y"));
  }
  // DTNs with the remaining node budget.
  int dtns = std::min(node_budget + 2, pick(2, 5));
  for (int i = 0; i < dtns; ++i) {
    int d = pick(0, domains - 1);
    size_t sw = static_cast<size_t>(pick(0, switches_in[d] - 1));
    std::string host = "dtn" + std::to_string(i);
    nodes[d].push_back({urn(dom_name(d), "server+" + host), sense::NodeKind::kDtn, {}});
    size_t self = nodes[d].size() - 1;
    auto dp = add_port(d, self, false);
    auto sp = add_port(d, sw, false);
    links[d].push_back({sense::Urn(std::min(dp, sp)), sense::Urn(std::max(dp, sp))});
    undirected.emplace_back(dp, sp);
    inst.dtn_nodes.push_back(nodes[d][self].urn);
  }

  // Allocations per port, admitted by the generator's own per-second check.
  std::map<std::string, std::vector<ReservationSegment>> segs_by_port;
  std::map<std::string, Mbps> reservable_by_port;
  int conn = 0;
  for (int d = 0; d < domains; ++d) {
    for (auto& n : nodes[d]) {
      for (auto& p : n.ports) {
        reservable_by_port[p.urn.str()] = p.reservable;
        int count = pick(0, shape.max_allocs);
        auto& segs = segs_by_port[p.urn.str()];
        for (int k = 0; k < count; ++k) {
          int64_t s = shape.t0 - 20 + pick(0, static_cast<int>(shape.horizon));
          int64_t e = s + pick(1, 80);
          ReservationSegment seg{"c" + std::to_string(conn++), p.urn, 1000 + k, pick(5, 60),
                                 pick(0, 3) == 0 ? QosClass::kSoftCapped : QosClass::kGuaranteedCapped,
                                 {s, e}};
          auto trial = segs;
          trial.push_back(seg);
          bool ok = true;
          for (int64_t t = s; t < e && ok; ++t) {
            auto x = sums_at(trial, t);
            ok = x.g + ceil_div(x.s, 2) <= p.reservable;
          }
          if (ok) segs.push_back(seg);
        }
      }
    }
  }

  for (int d = 0; d < domains; ++d) {
    sense::DomainModel m;
    m.domain_id = dom_name(d);
    m.version = 1;
    m.verbosity = sense::Verbosity::kFull;
    for (auto& n : nodes[d]) {
      sense::NodeDesc nd{sense::Urn(n.urn), n.kind, n.ports};
      m.nodes.push_back(nd);
      for (const auto& p : n.ports) {
        for (const auto& s : segs_by_port[p.urn.str()]) m.active_reservations.push_back(s);
      }
    }
    m.links = links[d];
    sense::canonicalize(m);
    inst.models.push_back(m);
  }

  // Port index = rank in URN order, the same convention the union documents.
  std::vector<std::string> all;
  std::map<std::string, std::string> dom_of;
  for (int d = 0; d < domains; ++d) {
    for (auto& n : nodes[d]) {
      for (auto& p : n.ports) {
        all.push_back(p.urn.str());
        dom_of[p.urn.str()] = dom_name(d);
      }
    }
  }
  std::sort(all.begin(), all.end());
  std::map<std::string, size_t> idx;
  for (size_t i = 0; i < all.size(); ++i) {
    idx[all[i]] = i;
    inst.ports.push_back({all[i], dom_of[all[i]], reservable_by_port[all[i]], segs_by_port[all[i]]});
  }
  inst.adj.assign(all.size(), {});
  auto join = [&](const std::string& a, const std::string& b) {
    size_t x = idx[a], y = idx[b];
    if (std::find(inst.adj[x].begin(), inst.adj[x].end(), y) == inst.adj[x].end()) {
      inst.adj[x].push_back(y);
      inst.adj[y].push_back(x);
    }
  };
  for (int d = 0; d < domains; ++d) {
    for (auto& n : nodes[d]) {
      std::vector<std::string> ps;
      for (auto& p : n.ports) ps.push_back(p.urn.str());
      std::sort(ps.begin(), ps.end());
      if (!ps.empty()) inst.node_first_port[n.urn] = idx[ps.front()];
      if (n.kind != sense::NodeKind::kSwitch) continue;
      for (size_t i = 0; i < ps.size(); ++i) {
        for (size_t j = i + 1; j < ps.size(); ++j) join(ps[i], ps[j]);
      }
    }
  }
  for (auto& [a, b] : undirected) join(a, b);
  for (auto& v : inst.adj) std::sort(v.begin(), v.end());
  return inst;
}

// Per-port, per-second availability table over [lo, hi).
struct AvailTable {
  int64_t lo = 0;
  int64_t hi = 0;
  std::vector<std::vector<Mbps>> at;  // [port][t - lo]

  Mbps min_over(size_t port, int64_t s, int64_t e) const {
    Mbps m = std::numeric_limits<Mbps>::max();
    for (int64_t t = s; t < e; ++t) m = std::min(m, at[port][static_cast<size_t>(t - lo)]);
    return m;
  }
};

inline AvailTable avail_table(const Instance& inst, int64_t lo, int64_t hi, QosClass q, bool empty = false) {
  AvailTable tab{lo, hi, {}};
  for (const auto& p : inst.ports) {
    std::vector<Mbps> row;
    for (int64_t t = lo; t < hi; ++t) {
      Sums x = empty ? Sums{} : sums_at(p.segs, t);
      row.push_back(avail_from_sums(p.reservable, x.g, x.s, q));
    }
    tab.at.push_back(std::move(row));
  }
  return tab;
}

// Best simple path by (width desc, hops asc, index sequence asc).
struct BestPath {
  Mbps width = -1;
  std::vector<size_t> path;
};

inline BestPath brute_widest(const Instance& inst, const std::vector<Mbps>& w, size_t src, size_t dst) {
  BestPath best;
  std::vector<size_t> path{src};
  std::vector<bool> on(inst.ports.size(), false);
  on[src] = true;
  // Branch and bound: width never grows along a path, so a partial path that
  // is already narrower, or as wide but no shorter, cannot win.
  std::function<void(size_t, Mbps)> dfs = [&](size_t v, Mbps width) {
    if (width < best.width || (width == best.width && path.size() > best.path.size())) return;
    if (v == dst) {
      bool better = width > best.width ||
                    (width == best.width && (path.size() < best.path.size() ||
                                             (path.size() == best.path.size() && path < best.path)));
      if (better) best = {width, path};
      return;
    }
    for (size_t n : inst.adj[v]) {
      if (on[n]) continue;
      on[n] = true;
      path.push_back(n);
      dfs(n, std::min(width, w[n]));
      path.pop_back();
      on[n] = false;
    }
  };
  dfs(src, w[src]);
  return best;
}

inline bool brute_connected(const Instance& inst, const std::vector<Mbps>& w, size_t src, size_t dst, Mbps need) {
  if (w[src] < need || w[dst] < need) return false;
  std::vector<bool> seen(inst.ports.size(), false);
  std::vector<size_t> stack{src};
  seen[src] = true;
  while (!stack.empty()) {
    size_t v = stack.back();
    stack.pop_back();
    if (v == dst) return true;
    for (size_t n : inst.adj[v]) {
      if (!seen[n] && w[n] >= need) {
        seen[n] = true;
        stack.push_back(n);
      }
    }
  }
  return false;
}

// min over [t, t + d) for every port, from a cumulative table indexed [t][d].
struct WindowMins {
  int64_t lo = 0;
  int64_t span = 0;
  std::vector<std::vector<std::vector<Mbps>>> m;  // [port][t - lo][d]

  explicit WindowMins(const AvailTable& tab) : lo(tab.lo), span(tab.hi - tab.lo) {
    for (const auto& row : tab.at) {
      std::vector<std::vector<Mbps>> per_t(static_cast<size_t>(span));
      for (int64_t t = 0; t < span; ++t) {
        auto& v = per_t[static_cast<size_t>(t)];
        v.push_back(std::numeric_limits<Mbps>::max());
        for (int64_t d = 1; t + d <= span; ++d) v.push_back(std::min(v.back(), row[static_cast<size_t>(t + d - 1)]));
      }
      m.push_back(std::move(per_t));
    }
  }
  std::vector<Mbps> at(int64_t t, int64_t d) const {
    std::vector<Mbps> out;
    for (const auto& p : m) out.push_back(p[static_cast<size_t>(t - lo)][static_cast<size_t>(d)]);
    return out;
  }
};

inline std::optional<int64_t> brute_bsw(const Instance& inst, const WindowMins& wm, size_t src, size_t dst,
                                        int64_t duration, const TimeInterval& window, Mbps mbps) {
  for (int64_t t = window.start; t + duration <= window.end; ++t) {
    if (brute_connected(inst, wm.at(t, duration), src, dst, mbps)) return t;
  }
  return std::nullopt;
}

struct TbpAnswer {
  Mbps b = 0;
  int64_t start = 0;
  int64_t end = 0;
};

// mode: 0 default (earliest end, ties to larger b), 1 highest, 2 lowest.
inline std::optional<TbpAnswer> brute_tbp(const Instance& inst, const WindowMins& wm, size_t src, size_t dst,
                                          int64_t mbytes, const TimeInterval& window, Mbps bmin, Mbps bmax,
                                          int mode) {
  std::optional<TbpAnswer> best;
  for (Mbps b = bmax; b >= bmin; --b) {
    int64_t d = ceil_div(mbytes * 8, b);
    auto t = brute_bsw(inst, wm, src, dst, d, window, b);
    if (!t) continue;
    TbpAnswer a{b, *t, *t + d};
    if (mode == 1) return a;
    if (mode == 2) {
      best = a;
      continue;
    }
    if (!best || a.end < best->end) best = a;
  }
  return best;
}

}  // namespace oracle
