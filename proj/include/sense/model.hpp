#pragma once

#include <bitset>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace sense {

using nlohmann::json;
using Mbps = int64_t;

// urn:ogf:network:<domain>:<year>:<local-id>[+<sub-id>...]
class Urn {
 public:
  Urn() = default;
  // Throws invariant-violation on grammar mismatch.
  explicit Urn(std::string value);

  static bool valid(std::string_view value);

  const std::string& str() const { return value_; }
  std::string_view domain() const;
  bool empty() const { return value_.empty(); }

  auto operator<=>(const Urn&) const = default;
  bool operator==(const Urn&) const = default;

 private:
  std::string value_;
};

inline constexpr int kMinVlan = 1;
inline constexpr int kMaxVlan = 4094;

// Dense set over the VLAN id space.
class VlanSet {
 public:
  void insert(int vlan) { bits_.set(static_cast<size_t>(vlan)); }
  void erase(int vlan) { bits_.reset(static_cast<size_t>(vlan)); }
  bool contains(int vlan) const {
    return vlan >= kMinVlan && vlan <= kMaxVlan && bits_.test(static_cast<size_t>(vlan));
  }
  bool empty() const { return bits_.none(); }
  size_t size() const { return bits_.count(); }
  std::optional<int> min() const;
  std::vector<int> values() const;

  VlanSet& operator&=(const VlanSet& o) {
    bits_ &= o.bits_;
    return *this;
  }
  VlanSet& operator|=(const VlanSet& o) {
    bits_ |= o.bits_;
    return *this;
  }
  bool operator==(const VlanSet&) const = default;

  static VlanSet all();

 private:
  std::bitset<kMaxVlan + 1> bits_;
};

// Sorted, coalesced inclusive VLAN intervals.
class LabelRange {
 public:
  LabelRange() = default;
  // Normalizes (sorts and coalesces); throws invariant-violation when any
  // bound falls outside 1..4094 or lo > hi.
  explicit LabelRange(std::vector<std::pair<int, int>> ranges);

  const std::vector<std::pair<int, int>>& ranges() const { return ranges_; }
  bool contains(int vlan) const;
  VlanSet to_set() const;
  bool empty() const { return ranges_.empty(); }

  bool operator==(const LabelRange&) const = default;

 private:
  std::vector<std::pair<int, int>> ranges_;
};

enum class QosClass { kGuaranteedCapped, kSoftCapped, kBestEffort };
enum class NodeKind { kSwitch, kDtn };
enum class Verbosity { kStatic, kSummary, kFull };

std::string_view to_string(QosClass q);
std::string_view to_string(NodeKind k);
std::string_view to_string(Verbosity v);
QosClass qos_from_string(std::string_view s);
NodeKind node_kind_from_string(std::string_view s);
Verbosity verbosity_from_string(std::string_view s);

struct Port {
  Urn urn;
  Mbps capacity = 0;
  Mbps reservable = 0;
  LabelRange labels;
  bool swap_capable = false;
  std::optional<Urn> alias;

  bool operator==(const Port&) const = default;
};

struct NodeDesc {
  Urn urn;
  NodeKind kind = NodeKind::kSwitch;
  std::vector<Port> ports;

  bool operator==(const NodeDesc&) const = default;
};

// Intra-domain adjacency between two ports; stored with a < b.
struct Link {
  Urn a;
  Urn b;

  auto operator<=>(const Link&) const = default;
  bool operator==(const Link&) const = default;
};

// Half-open [start, end) in epoch seconds.
struct TimeInterval {
  int64_t start = 0;
  int64_t end = 0;

  int64_t length() const { return end - start; }
  bool overlaps(const TimeInterval& o) const { return start < o.end && o.start < end; }
  bool contains(const TimeInterval& o) const { return start <= o.start && o.end <= end; }

  auto operator<=>(const TimeInterval&) const = default;
  bool operator==(const TimeInterval&) const = default;
};

struct ReservationSegment {
  std::string connection_id;
  Urn port_urn;
  int vlan = 0;
  Mbps bandwidth = 0;
  QosClass qos_class = QosClass::kGuaranteedCapped;
  TimeInterval interval;

  bool operator==(const ReservationSegment&) const = default;
};

// Canonical segment order: connection id, port, interval, vlan.
bool segment_less(const ReservationSegment& a, const ReservationSegment& b);

struct DomainModel {
  std::string domain_id;
  int64_t version = 0;
  int64_t generated_at = 0;
  Verbosity verbosity = Verbosity::kStatic;
  std::vector<NodeDesc> nodes;
  std::vector<Link> links;
  // Present iff verbosity == full.
  std::vector<ReservationSegment> active_reservations;
  // Present iff verbosity == summary: peak guaranteed bandwidth per port.
  std::map<std::string, Mbps> reserved_by_port;

  const Port* find_port(const Urn& urn) const;
  bool operator==(const DomainModel&) const = default;
};

struct ModelDelta {
  std::string delta_id;
  std::string target_domain;
  int64_t base_model_version = 0;
  std::vector<ReservationSegment> addition;
  std::vector<std::string> reduction;

  bool operator==(const ModelDelta&) const = default;
};

// Throws invariant-violation (detail names the offending URN) on any type
// invariant failure. Sorts into canonical order first.
void canonicalize(DomainModel& model);
void validate(const DomainModel& model);
void validate(const ReservationSegment& segment);
void canonicalize(ModelDelta& delta);
void validate(const ModelDelta& delta);

json to_json(const ReservationSegment& s);
json to_json(const DomainModel& m);
json to_json(const ModelDelta& d);
ReservationSegment segment_from_json(const json& j);
DomainModel model_from_json(const json& j);
ModelDelta delta_from_json(const json& j);

std::string serialize_model(const DomainModel& model);
DomainModel parse_model(std::string_view bytes);
std::string serialize_delta(const ModelDelta& delta);
ModelDelta parse_delta(std::string_view bytes);

// New model with version + 1. At full verbosity, reduction segments are
// removed and additions appended; other verbosities change only the version.
DomainModel apply_delta(const DomainModel& model, const ModelDelta& delta);

}  // namespace sense
