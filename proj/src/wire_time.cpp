#include "sense/wire_time.hpp"

#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>

#include "sense/error.hpp"

namespace sense {

namespace {

[[noreturn]] void bad_time(std::string_view text, const char* why) {
  throw Error(ErrorCode::kMalformedIntent,
              "bad time '" + std::string(text) + "': " + why, {{"value", std::string(text)}});
}

// Reads 1..max_digits decimal digits starting at pos.
int read_number(std::string_view text, size_t& pos, size_t max_digits) {
  size_t start = pos;
  while (pos < text.size() && pos - start < max_digits &&
         std::isdigit(static_cast<unsigned char>(text[pos]))) {
    ++pos;
  }
  if (pos == start) bad_time(text, "expected digits");
  int value = 0;
  std::from_chars(text.data() + start, text.data() + pos, value);
  return value;
}

void expect(std::string_view text, size_t& pos, char c) {
  if (pos >= text.size() || text[pos] != c) bad_time(text, "unexpected character");
  ++pos;
}

}  // namespace

WireTime parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  size_t pos = 0;
  int y = read_number(text, pos, 4);
  expect(text, pos, '-');
  int mo = read_number(text, pos, 2);
  expect(text, pos, '-');
  int d = read_number(text, pos, 2);
  expect(text, pos, 'T');
  int hh = read_number(text, pos, 2);
  expect(text, pos, ':');
  int mm = read_number(text, pos, 2);
  expect(text, pos, ':');
  int ss = read_number(text, pos, 2);
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    read_number(text, pos, 9);  // sub-second precision is dropped
  }
  int offset = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    int sign = text[pos] == '-' ? -1 : 1;
    ++pos;
    int oh = read_number(text, pos, 2);
    if (pos < text.size() && text[pos] == ':') ++pos;
    int om = read_number(text, pos, 2);
    offset = sign * (oh * 60 + om);
  } else {
    bad_time(text, "missing UTC offset");
  }
  if (pos != text.size()) bad_time(text, "trailing characters");

  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60) bad_time(text, "field out of range");
  int64_t local = sys_days{ymd}.time_since_epoch() / seconds{1} + hh * 3600 + mm * 60 + ss;
  return WireTime{local - offset * 60, offset};
}

std::string format_iso8601(int64_t epoch, int offset_minutes) {
  using namespace std::chrono;
  int64_t local = epoch + int64_t{offset_minutes} * 60;
  sys_seconds tp{seconds{local}};
  sys_days day_point = floor<days>(tp);
  year_month_day ymd{day_point};
  hh_mm_ss hms{tp - day_point};
  int off = offset_minutes < 0 ? -offset_minutes : offset_minutes;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.000%c%02d%02d",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()),
                offset_minutes < 0 ? '-' : '+', off / 60, off % 60);
  return buf;
}

int64_t parse_duration(std::string_view text) {
  std::string_view t = text;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  if (t.size() < 2) bad_time(text, "expected <n><unit>");
  int64_t n = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size() - 1, n);
  if (ec != std::errc{} || ptr != t.data() + t.size() - 1 || n < 0) {
    bad_time(text, "bad count");
  }
  switch (t.back()) {
    case 'd': return n * 86400;
    case 'h': return n * 3600;
    case 'm': return n * 60;
    case 's': return n;
    default: bad_time(text, "unknown unit");
  }
}

int64_t resolve_time(std::string_view text, int64_t now) {
  if (text == "now") return now;
  if (!text.empty() && text.front() == '+') return now + parse_duration(text);
  return parse_iso8601(text).epoch;
}

}  // namespace sense
