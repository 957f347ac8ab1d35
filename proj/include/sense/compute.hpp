#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sense/calendar.hpp"
#include "sense/model.hpp"
#include "sense/protocol.hpp"
#include "sense/topology.hpp"

namespace sense {

enum class ServiceType { kP2P, kMultipoint };
std::string_view to_string(ServiceType t);

enum class QueryAsk { kMaximumBandwidth, kTimeBlockMaxBandwidth, kSlidingWindow, kTimeBandwidthProduct };
std::string_view to_string(QueryAsk a);

enum class TbpMode { kDefault, kHighest, kLowest };

struct TerminalReq {
  Urn uri;
  std::optional<int> vlan;  // empty means "any"

  bool operator==(const TerminalReq&) const = default;
};

struct ConnectionReq {
  std::string name;
  std::vector<TerminalReq> terminals;
  QosClass qos = QosClass::kGuaranteedCapped;
  std::optional<Mbps> mbps;
  TimeInterval interval;

  bool operator==(const ConnectionReq&) const = default;
};

struct QueryReq {
  QueryAsk ask = QueryAsk::kMaximumBandwidth;
  std::string name;
  size_t connection = 0;  // index into ServiceIntent::connections
  std::optional<TimeInterval> block;   // start/end
  std::optional<TimeInterval> window;  // start-after/end-before
  std::optional<int64_t> duration;     // seconds
  std::optional<int64_t> tbp_mbytes;
  std::optional<Mbps> bandwidth_min;
  std::optional<Mbps> bandwidth_max;
  TbpMode mode = TbpMode::kDefault;

  bool operator==(const QueryReq&) const = default;
};

struct ServiceIntent {
  ServiceType type = ServiceType::kP2P;
  std::string alias;
  std::vector<ConnectionReq> connections;
  std::vector<QueryReq> queries;

  bool operator==(const ServiceIntent&) const = default;
};

inline constexpr int64_t kDefaultDuration = 24 * 3600;

// Throws malformed-intent or inconsistent-schedule.
ServiceIntent normalize_intent(const protocol::IntentDocument& doc, int64_t now,
                               int64_t default_duration = kDefaultDuration);
ServiceIntent normalize_intent(const json& doc, int64_t now,
                               int64_t default_duration = kDefaultDuration);

// Per-port availability as seen by one computation. Starts from the union's
// calendars (or empty ones) and keeps private copies of any port it debits.
class CalendarView {
 public:
  enum class Base { kAllocated, kEmpty };
  explicit CalendarView(const UnionModel& u, Base base = Base::kAllocated);

  const UnionModel& model() const { return *u_; }
  const ReservationCalendar& calendar(size_t port) const;
  ReservationCalendar& mutable_calendar(size_t port);

  // Availability of every port over the interval.
  std::vector<Mbps> availability(const TimeInterval& interval, QosClass qos) const;
  // Sorted union of all allocation boundaries.
  std::vector<int64_t> breakpoints() const;
  // Debits segments the union does not know about yet (the caller's own
  // in-flight reservations). Segments already present by connection id, or
  // on unknown ports, are skipped.
  void overlay(const std::vector<ReservationSegment>& segments);

 private:
  const UnionModel* u_;
  Base base_;
  std::map<size_t, ReservationCalendar> owned_;
};

struct PathResult {
  std::vector<size_t> ports;
  Mbps bandwidth = 0;
};

// Hop-count shortest path over ports with at least `mbps` available, ties to
// the lexicographically smallest URN sequence. Throws no-path with the
// bottleneck of the widest candidate in the detail.
std::vector<size_t> find_path(const CalendarView& view, size_t src, size_t dst,
                              const TimeInterval& interval, Mbps mbps, QosClass qos);
std::optional<std::vector<size_t>> find_path_by_availability(const UnionModel& u,
                                                            const std::vector<Mbps>& avail,
                                                            size_t src, size_t dst, Mbps mbps);
PathResult widest_path(const CalendarView& view, size_t src, size_t dst,
                       const TimeInterval& interval, QosClass qos);
// Widest bottleneck between src and dst; nullopt when disconnected.
std::optional<Mbps> widest_bottleneck(const UnionModel& u, const std::vector<Mbps>& avail,
                                      size_t src, size_t dst);

struct LabelPin {
  size_t port = 0;
  int vlan = 0;
};

// Domain -> vlan. `ports` are all ports of the path or tree, `boundaries` the
// inter-domain port pairs it crosses. Throws no-label.
std::map<std::string, int> select_vlans(const CalendarView& view, const std::vector<size_t>& ports,
                                        const std::vector<std::pair<size_t, size_t>>& boundaries,
                                        const TimeInterval& interval,
                                        const std::vector<LabelPin>& pins);

struct ConnectionDesign {
  std::string name;
  std::string connection_id;
  std::vector<Urn> ports;                       // path order, or tree attach order
  std::vector<std::pair<Urn, Urn>> edges;       // consecutive hops / tree edges
  std::vector<std::string> domains;             // first-appearance order
  std::map<std::string, int> vlans;
  Mbps bandwidth = 0;
  QosClass qos = QosClass::kGuaranteedCapped;
  TimeInterval interval;

  std::vector<ReservationSegment> segments() const;
  bool operator==(const ConnectionDesign&) const = default;
};

struct ServiceDesign {
  ServiceType type = ServiceType::kP2P;
  std::vector<ConnectionDesign> connections;
  std::vector<std::string> domains;  // first-appearance order across connections
  std::vector<ModelDelta> deltas;

  bool operator==(const ServiceDesign&) const = default;
};

json to_json(const ServiceDesign& d);
ServiceDesign design_from_json(const json& j);

// Connection ids are "<id_prefix>/<index>". `in_flight` is overlaid on the
// union before computing.
ServiceDesign compute_p2p(const ServiceIntent& intent, const UnionModel& u,
                          const std::string& id_prefix,
                          const std::vector<ReservationSegment>& in_flight = {});
ServiceDesign compute_multipoint(const ServiceIntent& intent, const UnionModel& u,
                                 const std::string& id_prefix,
                                 const std::vector<ReservationSegment>& in_flight = {});
ServiceDesign compute_design(const ServiceIntent& intent, const UnionModel& u,
                             const std::string& id_prefix,
                             const std::vector<ReservationSegment>& in_flight = {});

// True when every segment of the design still fits the union plus `in_flight`.
bool design_fits(const ServiceDesign& design, const UnionModel& u,
                 const std::vector<ReservationSegment>& in_flight);

// One delta per touched domain in first-appearance order. `delta_key` seeds
// the deterministic delta ids.
std::vector<ModelDelta> partition_deltas(const ServiceDesign& design, const UnionModel& u,
                                         const std::string& delta_key);

struct MaxBandwidth {
  Mbps capacity_now = 0;
  Mbps capability = 0;
};

struct Schedule {
  Mbps bandwidth = 0;
  TimeInterval interval;

  bool operator==(const Schedule&) const = default;
};

MaxBandwidth query_max_bandwidth(const ConnectionReq& c, const UnionModel& u, int64_t now);
Mbps query_tbmb(const ConnectionReq& c, const TimeInterval& block, const UnionModel& u);
TimeInterval query_bsw(const ConnectionReq& c, int64_t duration, const TimeInterval& window,
                       Mbps mbps, const UnionModel& u);
Schedule query_tbp(const ConnectionReq& c, int64_t tbp_mbytes, const TimeInterval& window,
                   Mbps bmin, Mbps bmax, TbpMode mode, const UnionModel& u);

// ceil(tbp_mbytes * 8 / mbps)
int64_t tbp_duration(int64_t tbp_mbytes, Mbps mbps);

// Answers every query in the intent. `utc_offset_minutes` controls how
// schedule instants are rendered.
protocol::QueryResponseDoc answer_queries(const ServiceIntent& intent, const UnionModel& u,
                                          int64_t now, int utc_offset_minutes);

}  // namespace sense
