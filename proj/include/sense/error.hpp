#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace sense {

using nlohmann::json;

// The first twelve codes are the only ones allowed on an external interface;
// the rest are internal refinements that collapse onto one of them through
// wire_code().
enum class ErrorCode {
  kMalformedIntent,
  kUnknownUrn,
  kNoPath,
  kNoLabel,
  kInsufficientBandwidth,
  kVlanConflict,
  kHoldExpired,
  kUnknownDelta,
  kBadState,
  kTooManyRounds,
  kNoFeasibleWindow,
  kNoFeasibleSchedule,

  kMalformedDocument,
  kInvariantViolation,
  kUnknownPort,
  kUnknownConnection,
  kUnknownAllocation,
  kDuplicateDomain,
  kInvalidPath,
  kUnknownInstance,
  kDisconnectedSpec,
  kMalformedEndpoint,
  kCorruptJournal,
  kTransport,
  kInconsistentSchedule,
};

std::string_view code_name(ErrorCode code);
ErrorCode wire_code(ErrorCode code);
bool is_wire_code(ErrorCode code);
// Accepts wire and internal names alike.
ErrorCode code_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, json detail = json::object());

  ErrorCode code() const { return code_; }
  const json& detail() const { return detail_; }

 private:
  ErrorCode code_;
  json detail_;
};

}  // namespace sense
