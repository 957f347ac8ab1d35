#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace sense {

// An instant plus the UTC offset it was (or will be) rendered with.
struct WireTime {
  int64_t epoch = 0;
  int offset_minutes = 0;

  bool operator==(const WireTime&) const = default;
};

// ISO-8601 with numeric offset or 'Z'. Month/day/hour fields may omit the
// leading zero ("2018-9-01T10:00:00.000-0400").
WireTime parse_iso8601(std::string_view text);

// "YYYY-MM-DDTHH:MM:SS.000+HHMM".
std::string format_iso8601(int64_t epoch, int offset_minutes);

// "now", "+<n>d", "+<n>h" relative to `now`, or an absolute ISO-8601 instant.
int64_t resolve_time(std::string_view text, int64_t now);

// "<n>d" / "<n>h" / "<n>m" / "<n>s" (leading '+' allowed) in seconds.
int64_t parse_duration(std::string_view text);

}  // namespace sense
