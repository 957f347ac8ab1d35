#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "sense/error.hpp"

namespace sense {

// Strict field-by-field reader for wire objects. Every key must be consumed
// before finish(); leftovers raise malformed-document.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string_view what);

  template <typename T>
  T required(const std::string& key) {
    const json& v = lookup(key, true);
    return convert<T>(v, key);
  }

  template <typename T>
  std::optional<T> optional(const std::string& key) {
    if (!j_.contains(key)) return std::nullopt;
    const json& v = lookup(key, false);
    return convert<T>(v, key);
  }

  const json& raw(const std::string& key) { return lookup(key, true); }
  const json* raw_optional(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    return &lookup(key, false);
  }
  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const;

 private:
  const json& lookup(const std::string& key, bool required);

  template <typename T>
  T convert(const json& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail_type(key);
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail_type(key);
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail_type(key);
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail_type(key);
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedDocument, what_ + "." + key + ": " + e.what(),
                  {{"field", key}});
    }
  }

  [[noreturn]] void fail_type(const std::string& key) const;

  const json& j_;
  std::string what_;
  std::set<std::string> seen_;
};

json parse_json(std::string_view text, std::string_view what);

}  // namespace sense
