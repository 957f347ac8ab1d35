#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sense/model.hpp"

namespace sense {

inline constexpr double kDefaultOverbookFactor = 2.0;

// Piecewise-constant function of time, stored as breakpoint -> level from that
// breakpoint on. Zero before the first breakpoint.
class StepFunction {
 public:
  void add(int64_t start, int64_t end, int64_t amount);
  int64_t at(int64_t t) const;
  int64_t max_over(int64_t start, int64_t end) const;
  // Breakpoints strictly inside (start, end).
  std::vector<int64_t> breakpoints_within(int64_t start, int64_t end) const;
  std::vector<int64_t> breakpoints() const;
  bool empty() const { return levels_.empty(); }

 private:
  void ensure_key(int64_t t);
  std::map<int64_t, int64_t> levels_;
};

enum class AllocationState { kHeld, kCommitted };

struct Allocation {
  ReservationSegment segment;
  AllocationState state = AllocationState::kHeld;
  std::optional<int64_t> hold_expires_at;
  std::string delta_id;

  bool operator==(const Allocation&) const = default;
};

// Time-interval ledger of bandwidth and VLAN allocations for one port.
// Single-writer: the owning RM serializes mutation.
class ReservationCalendar {
 public:
  ReservationCalendar() = default;
  ReservationCalendar(Urn port_urn, Mbps reservable, LabelRange labels,
                      double overbook_factor = kDefaultOverbookFactor);

  const Urn& port_urn() const { return port_urn_; }
  Mbps reservable() const { return reservable_; }
  const LabelRange& labels() const { return labels_; }
  double overbook_factor() const { return overbook_factor_; }
  const std::vector<Allocation>& allocations() const { return allocations_; }

  Mbps available_bandwidth(const TimeInterval& interval, QosClass qos) const;
  // Largest bandwidth continuously available over the block; same function
  // as available_bandwidth, kept separate for the time-block queries.
  Mbps max_constant_bandwidth(const TimeInterval& interval, QosClass qos) const {
    return available_bandwidth(interval, qos);
  }
  // Availability over [t, t+1) for the given class.
  Mbps available_at(int64_t t, QosClass qos) const;
  VlanSet available_labels(const TimeInterval& interval) const;

  // Throws insufficient-bandwidth {max} or vlan-conflict {alternatives}.
  const Allocation& try_hold(const ReservationSegment& segment, int64_t now,
                             int64_t hold_duration, std::string delta_id = {});
  // Commits every allocation tagged with delta_id. Idempotent once committed.
  // Throws unknown-allocation or hold-expired (expiry is inclusive).
  void commit_hold(std::string_view delta_id, int64_t now);
  void release(std::string_view connection_id);
  // Removes only held allocations tagged with delta_id.
  void release_holds(std::string_view delta_id);
  std::vector<std::string> expire_holds(int64_t now);

  // Inserts a committed allocation without admission control (used to
  // rebuild an orchestrator-side view from a pulled model).
  void insert_committed(const ReservationSegment& segment, std::string delta_id = {});

  // All allocation start/end times, sorted and unique.
  std::vector<int64_t> breakpoints() const;

  const StepFunction& guaranteed_usage() const { return guaranteed_; }
  const StepFunction& soft_usage() const { return soft_; }

 private:
  void debit(const ReservationSegment& s, int64_t sign);
  Mbps availability_from_levels(int64_t guaranteed, int64_t soft, QosClass qos) const;

  Urn port_urn_;
  Mbps reservable_ = 0;
  LabelRange labels_;
  double overbook_factor_ = kDefaultOverbookFactor;
  std::vector<Allocation> allocations_;
  StepFunction guaranteed_;
  StepFunction soft_;
};

}  // namespace sense
