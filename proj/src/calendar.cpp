#include "sense/calendar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sense/error.hpp"

namespace sense {

// --- StepFunction ------------------------------------------------------------

void StepFunction::ensure_key(int64_t t) {
  auto it = levels_.lower_bound(t);
  if (it != levels_.end() && it->first == t) return;
  int64_t level = it == levels_.begin() ? 0 : std::prev(it)->second;
  levels_.emplace_hint(it, t, level);
}

void StepFunction::add(int64_t start, int64_t end, int64_t amount) {
  if (start >= end || amount == 0) return;
  ensure_key(start);
  ensure_key(end);
  for (auto it = levels_.find(start); it->first < end; ++it) it->second += amount;
  // Drop breakpoints that no longer change the level.
  for (int64_t t : {start, end}) {
    auto it = levels_.find(t);
    int64_t prev = it == levels_.begin() ? 0 : std::prev(it)->second;
    if (it->second == prev) levels_.erase(it);
  }
}

int64_t StepFunction::at(int64_t t) const {
  auto it = levels_.upper_bound(t);
  return it == levels_.begin() ? 0 : std::prev(it)->second;
}

int64_t StepFunction::max_over(int64_t start, int64_t end) const {
  int64_t best = at(start);
  for (auto it = levels_.upper_bound(start); it != levels_.end() && it->first < end; ++it) {
    best = std::max(best, it->second);
  }
  return best;
}

std::vector<int64_t> StepFunction::breakpoints_within(int64_t start, int64_t end) const {
  std::vector<int64_t> out;
  for (auto it = levels_.upper_bound(start); it != levels_.end() && it->first < end; ++it) {
    out.push_back(it->first);
  }
  return out;
}

std::vector<int64_t> StepFunction::breakpoints() const {
  std::vector<int64_t> out;
  out.reserve(levels_.size());
  for (const auto& [t, level] : levels_) out.push_back(t);
  return out;
}

// --- ReservationCalendar ----------------------------------------------------------

ReservationCalendar::ReservationCalendar(Urn port_urn, Mbps reservable, LabelRange labels,
                                         double overbook_factor)
    : port_urn_(std::move(port_urn)),
      reservable_(reservable),
      labels_(std::move(labels)),
      overbook_factor_(overbook_factor) {}

Mbps ReservationCalendar::availability_from_levels(int64_t guaranteed, int64_t soft,
                                                   QosClass qos) const {
  Mbps avail = 0;
  switch (qos) {
    case QosClass::kBestEffort:
      return reservable_;
    case QosClass::kGuaranteedCapped: {
      // Admitting more guaranteed bandwidth shrinks the soft headroom, so the
      // existing soft load must still fit under the overbooked remainder.
      int64_t soft_floor =
          soft == 0 ? 0 : static_cast<int64_t>(std::ceil(static_cast<double>(soft) / overbook_factor_ - 1e-9));
      avail = reservable_ - guaranteed - soft_floor;
      break;
    }
    case QosClass::kSoftCapped: {
      int64_t headroom = std::max<int64_t>(0, reservable_ - guaranteed);
      avail = static_cast<int64_t>(std::floor(overbook_factor_ * static_cast<double>(headroom) + 1e-9)) - soft;
      break;
    }
  }
  return std::max<Mbps>(0, avail);
}

Mbps ReservationCalendar::available_at(int64_t t, QosClass qos) const {
  return availability_from_levels(guaranteed_.at(t), soft_.at(t), qos);
}

Mbps ReservationCalendar::available_bandwidth(const TimeInterval& interval, QosClass qos) const {
  if (qos == QosClass::kBestEffort) return reservable_;
  Mbps best = available_at(interval.start, qos);
  auto g = guaranteed_.breakpoints_within(interval.start, interval.end);
  auto s = soft_.breakpoints_within(interval.start, interval.end);
  for (int64_t t : g) best = std::min(best, available_at(t, qos));
  for (int64_t t : s) best = std::min(best, available_at(t, qos));
  return best;
}

VlanSet ReservationCalendar::available_labels(const TimeInterval& interval) const {
  VlanSet out = labels_.to_set();
  for (const auto& a : allocations_) {
    if (a.segment.interval.overlaps(interval)) out.erase(a.segment.vlan);
  }
  return out;
}

void ReservationCalendar::debit(const ReservationSegment& s, int64_t sign) {
  switch (s.qos_class) {
    case QosClass::kGuaranteedCapped:
      guaranteed_.add(s.interval.start, s.interval.end, sign * s.bandwidth);
      break;
    case QosClass::kSoftCapped:
      soft_.add(s.interval.start, s.interval.end, sign * s.bandwidth);
      break;
    case QosClass::kBestEffort:
      break;
  }
}

const Allocation& ReservationCalendar::try_hold(const ReservationSegment& segment, int64_t now,
                                                int64_t hold_duration, std::string delta_id) {
  validate(segment);
  if (segment.port_urn != port_urn_) {
    throw Error(ErrorCode::kUnknownPort,
                "segment for " + segment.port_urn.str() + " offered to " + port_urn_.str(),
                {{"urn", segment.port_urn.str()}});
  }
  if (hold_duration <= 0) {
    throw Error(ErrorCode::kInvariantViolation, "hold_duration must be positive");
  }
  if (segment.qos_class != QosClass::kBestEffort) {
    Mbps avail = available_bandwidth(segment.interval, segment.qos_class);
    if (segment.bandwidth > avail) {
      throw Error(ErrorCode::kInsufficientBandwidth,
                  std::to_string(segment.bandwidth) + " mbps requested on " + port_urn_.str() +
                      ", " + std::to_string(avail) + " available",
                  {{"port", port_urn_.str()}, {"max", avail}});
    }
  }
  VlanSet free = available_labels(segment.interval);
  if (!free.contains(segment.vlan)) {
    throw Error(ErrorCode::kVlanConflict,
                "vlan " + std::to_string(segment.vlan) + " unavailable on " + port_urn_.str(),
                {{"port", port_urn_.str()}, {"vlan", segment.vlan}, {"alternatives", free.values()}});
  }
  debit(segment, +1);
  allocations_.push_back(
      Allocation{segment, AllocationState::kHeld, now + hold_duration, std::move(delta_id)});
  return allocations_.back();
}

void ReservationCalendar::commit_hold(std::string_view delta_id, int64_t now) {
  bool found = false;
  for (const auto& a : allocations_) {
    if (a.delta_id != delta_id) continue;
    found = true;
    if (a.state == AllocationState::kHeld && *a.hold_expires_at <= now) {
      throw Error(ErrorCode::kHoldExpired, "hold for delta " + std::string(delta_id) + " expired",
                  {{"delta_id", std::string(delta_id)}, {"port", port_urn_.str()}});
    }
  }
  if (!found) {
    throw Error(ErrorCode::kUnknownAllocation,
                "no allocation for delta " + std::string(delta_id) + " on " + port_urn_.str(),
                {{"delta_id", std::string(delta_id)}});
  }
  for (auto& a : allocations_) {
    if (a.delta_id == delta_id) {
      a.state = AllocationState::kCommitted;
      a.hold_expires_at.reset();
    }
  }
}

void ReservationCalendar::release(std::string_view connection_id) {
  std::erase_if(allocations_, [&](const Allocation& a) {
    if (a.segment.connection_id != connection_id) return false;
    debit(a.segment, -1);
    return true;
  });
}

void ReservationCalendar::release_holds(std::string_view delta_id) {
  std::erase_if(allocations_, [&](const Allocation& a) {
    if (a.delta_id != delta_id || a.state != AllocationState::kHeld) return false;
    debit(a.segment, -1);
    return true;
  });
}

std::vector<std::string> ReservationCalendar::expire_holds(int64_t now) {
  std::vector<std::string> expired;
  std::erase_if(allocations_, [&](const Allocation& a) {
    if (a.state != AllocationState::kHeld || *a.hold_expires_at > now) return false;
    debit(a.segment, -1);
    expired.push_back(a.segment.connection_id);
    return true;
  });
  return expired;
}

void ReservationCalendar::insert_committed(const ReservationSegment& segment, std::string delta_id) {
  debit(segment, +1);
  allocations_.push_back(
      Allocation{segment, AllocationState::kCommitted, std::nullopt, std::move(delta_id)});
}

std::vector<int64_t> ReservationCalendar::breakpoints() const {
  std::vector<int64_t> out;
  out.reserve(allocations_.size() * 2);
  for (const auto& a : allocations_) {
    out.push_back(a.segment.interval.start);
    out.push_back(a.segment.interval.end);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace sense
