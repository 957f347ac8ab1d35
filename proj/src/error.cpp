#include "sense/error.hpp"

#include <array>
#include <utility>

namespace sense {

namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 25> kNames{{
    {ErrorCode::kMalformedIntent, "malformed-intent"},
    {ErrorCode::kUnknownUrn, "unknown-urn"},
    {ErrorCode::kNoPath, "no-path"},
    {ErrorCode::kNoLabel, "no-label"},
    {ErrorCode::kInsufficientBandwidth, "insufficient-bandwidth"},
    {ErrorCode::kVlanConflict, "vlan-conflict"},
    {ErrorCode::kHoldExpired, "hold-expired"},
    {ErrorCode::kUnknownDelta, "unknown-delta"},
    {ErrorCode::kBadState, "bad-state"},
    {ErrorCode::kTooManyRounds, "too-many-rounds"},
    {ErrorCode::kNoFeasibleWindow, "no-feasible-window"},
    {ErrorCode::kNoFeasibleSchedule, "no-feasible-schedule"},
    {ErrorCode::kMalformedDocument, "malformed-document"},
    {ErrorCode::kInvariantViolation, "invariant-violation"},
    {ErrorCode::kUnknownPort, "unknown-port"},
    {ErrorCode::kUnknownConnection, "unknown-connection"},
    {ErrorCode::kUnknownAllocation, "unknown-allocation"},
    {ErrorCode::kDuplicateDomain, "duplicate-domain"},
    {ErrorCode::kInvalidPath, "invalid-path"},
    {ErrorCode::kUnknownInstance, "unknown-instance"},
    {ErrorCode::kDisconnectedSpec, "disconnected-spec"},
    {ErrorCode::kMalformedEndpoint, "malformed-endpoint"},
    {ErrorCode::kCorruptJournal, "corrupt-journal"},
    {ErrorCode::kTransport, "transport"},
    {ErrorCode::kInconsistentSchedule, "inconsistent-schedule"},
}};

}  // namespace

std::string_view code_name(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "unknown";
}

bool is_wire_code(ErrorCode code) {
  return static_cast<int>(code) <= static_cast<int>(ErrorCode::kNoFeasibleSchedule);
}

ErrorCode wire_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedDocument:
    case ErrorCode::kInvariantViolation:
    case ErrorCode::kDuplicateDomain:
    case ErrorCode::kDisconnectedSpec:
    case ErrorCode::kMalformedEndpoint:
    case ErrorCode::kCorruptJournal:
    case ErrorCode::kInconsistentSchedule:
      return ErrorCode::kMalformedIntent;
    case ErrorCode::kUnknownPort:
    case ErrorCode::kUnknownInstance:
      return ErrorCode::kUnknownUrn;
    case ErrorCode::kUnknownConnection:
    case ErrorCode::kUnknownAllocation:
      return ErrorCode::kUnknownDelta;
    case ErrorCode::kInvalidPath:
      return ErrorCode::kNoPath;
    case ErrorCode::kTransport:
      return ErrorCode::kBadState;
    default:
      return code;
  }
}

ErrorCode code_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  throw Error(ErrorCode::kMalformedDocument, "unknown error code '" + std::string(name) + "'");
}

Error::Error(ErrorCode code, std::string message, json detail)
    : std::runtime_error(std::string(code_name(code)) + ": " + message),
      code_(code),
      detail_(std::move(detail)) {}

}  // namespace sense
