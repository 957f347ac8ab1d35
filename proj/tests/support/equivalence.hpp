#pragma once
// One randomized instance checked against the exhaustive oracles: widest
// path, max bandwidth, time-block max bandwidth, sliding window and
// time-bandwidth product.

#include <random>
#include <sstream>
#include <string>

#include "sense/compute.hpp"
#include "sense/error.hpp"
#include "sense/topology.hpp"
#include "oracles.hpp"

namespace oracle {

inline std::string check_equivalence(uint64_t seed) {
  using namespace sense;
  std::mt19937_64 rng(seed);
  auto pick = [&](int64_t lo, int64_t hi) { return std::uniform_int_distribution<int64_t>(lo, hi)(rng); };
  Instance inst = random_instance(rng);
  auto u = integrate_models(inst.models);
  std::ostringstream fail;
  auto tag = [&]() -> std::ostringstream& {
    fail << "seed " << seed << ": ";
    return fail;
  };

  size_t a = static_cast<size_t>(pick(0, static_cast<int64_t>(inst.dtn_nodes.size()) - 1));
  size_t b = static_cast<size_t>(pick(0, static_cast<int64_t>(inst.dtn_nodes.size()) - 2));
  if (b >= a) ++b;
  const std::string& na = inst.dtn_nodes[a];
  const std::string& nb = inst.dtn_nodes[b];
  size_t src = inst.node_first_port.at(na), dst = inst.node_first_port.at(nb);
  QosClass qos = pick(0, 3) == 0 ? QosClass::kSoftCapped : QosClass::kGuaranteedCapped;

  const int64_t lo = inst.t0, hi = inst.t0 + 220;
  AvailTable tab = avail_table(inst, lo, hi, qos);
  WindowMins wm(tab);
  ConnectionReq c{"conn", {{Urn(na), std::nullopt}, {Urn(nb), std::nullopt}}, qos, std::nullopt, {lo, hi}};

  // widest path over a random block
  int64_t s0 = pick(lo, hi - 2);
  TimeInterval block{s0, pick(s0 + 1, hi)};
  {
    auto w = wm.at(block.start, block.length());
    BestPath want = brute_widest(inst, w, src, dst);
    PathResult got = widest_path(CalendarView(*u), src, dst, block, qos);
    if (got.bandwidth != want.width || got.ports != want.path) {
      tag() << "widest_path " << got.bandwidth << " vs " << want.width << "\n";
    }
    Mbps tbmb = query_tbmb(c, block, *u);
    if (tbmb != want.width) tag() << "query_tbmb " << tbmb << " vs " << want.width << "\n";
  }

  // maximum bandwidth now, and on empty calendars
  {
    int64_t now = pick(lo, hi - 1);
    MaxBandwidth got = query_max_bandwidth(c, *u, now);
    BestPath live = brute_widest(inst, wm.at(now, 1), src, dst);
    AvailTable empty = avail_table(inst, now, now + 1, qos, true);
    std::vector<Mbps> cap;
    for (const auto& row : empty.at) cap.push_back(row[0]);
    BestPath capability = brute_widest(inst, cap, src, dst);
    if (got.capacity_now != live.width || got.capability != capability.width) {
      tag() << "max_bandwidth {" << got.capacity_now << "," << got.capability << "} vs {" << live.width << ","
            << capability.width << "}\n";
    }
  }

  // sliding window
  {
    int64_t ws = pick(lo, hi - 20);
    TimeInterval window{ws, pick(ws + 10, hi)};
    int64_t duration = pick(1, window.length() + 5);
    Mbps mbps = pick(1, 100);
    auto want = duration <= window.length() ? brute_bsw(inst, wm, src, dst, duration, window, mbps) : std::nullopt;
    try {
      TimeInterval got = query_bsw(c, duration, window, mbps, *u);
      if (!want || got.start != *want || got.end != *want + duration) {
        tag() << "query_bsw start " << got.start << " vs " << (want ? std::to_string(*want) : "none") << "\n";
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoFeasibleWindow || want) {
        tag() << "query_bsw threw " << e.what() << " oracle " << (want ? std::to_string(*want) : "none") << "\n";
      }
    }
  }

  // time-bandwidth product
  {
    int64_t ws = pick(lo, hi - 40);
    TimeInterval window{ws, pick(ws + 20, hi)};
    int64_t mbytes = pick(5, 600);
    Mbps bmin = pick(1, 60);
    Mbps bmax = pick(bmin, 100);
    int mode = static_cast<int>(pick(0, 2));
    TbpMode m = mode == 1 ? TbpMode::kHighest : mode == 2 ? TbpMode::kLowest : TbpMode::kDefault;
    auto want = brute_tbp(inst, wm, src, dst, mbytes, window, bmin, bmax, mode);
    try {
      Schedule got = query_tbp(c, mbytes, window, bmin, bmax, m, *u);
      if (!want || got.bandwidth != want->b || got.interval.start != want->start || got.interval.end != want->end) {
        tag() << "query_tbp mode " << mode << " got b=" << got.bandwidth << " [" << got.interval.start << ","
              << got.interval.end << ") oracle "
              << (want ? "b=" + std::to_string(want->b) + " [" + std::to_string(want->start) + "," +
                             std::to_string(want->end) + ")"
                       : std::string("none"))
              << "\n";
      }
      if (got.bandwidth * got.interval.length() < mbytes * 8) tag() << "tbp product short\n";
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoFeasibleSchedule || want) {
        tag() << "query_tbp threw " << e.what() << "\n";
      }
    }
  }
  return fail.str();
}

}  // namespace oracle
