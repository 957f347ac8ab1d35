#include "sense/ids.hpp"

#include <array>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <random>

namespace sense {

namespace {

std::string format_uuid(uint64_t hi, uint64_t lo) {
  std::array<char, 37> buf{};
  std::snprintf(buf.data(), buf.size(), "%08x-%04x-%04x-%04x-%012llx",
                static_cast<unsigned>(hi >> 32), static_cast<unsigned>((hi >> 16) & 0xffff),
                static_cast<unsigned>(hi & 0xffff), static_cast<unsigned>(lo >> 48),
                static_cast<unsigned long long>(lo & 0xffffffffffffULL));
  return std::string(buf.data());
}

uint64_t fnv1a(std::string_view s, uint64_t seed) {
  uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string random_uuid() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  uint64_t hi, lo;
  {
    std::lock_guard lock(mu);
    hi = rng();
    lo = rng();
  }
  hi = (hi & ~0xf000ULL) | 0x4000ULL;
  lo = (lo & ~(0xc000ULL << 48)) | (0x8000ULL << 48);
  return format_uuid(hi, lo);
}

std::string name_uuid(std::string_view name) {
  uint64_t hi = fnv1a(name, 0xcbf29ce484222325ULL);
  uint64_t lo = fnv1a(name, 0x84222325cbf29ce4ULL ^ hi);
  hi = (hi & ~0xf000ULL) | 0x5000ULL;
  lo = (lo & ~(0xc000ULL << 48)) | (0x8000ULL << 48);
  return format_uuid(hi, lo);
}

}  // namespace sense
