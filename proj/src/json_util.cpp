#include "sense/json_util.hpp"

namespace sense {

ObjectReader::ObjectReader(const json& j, std::string_view what) : j_(j), what_(what) {
  if (!j_.is_object()) {
    throw Error(ErrorCode::kMalformedDocument, what_ + ": expected an object");
  }
}

const json& ObjectReader::lookup(const std::string& key, bool required) {
  auto it = j_.find(key);
  if (it == j_.end()) {
    if (required) {
      throw Error(ErrorCode::kMalformedDocument, what_ + ": missing field '" + key + "'",
                  {{"field", key}});
    }
    static const json kNull;
    return kNull;
  }
  seen_.insert(key);
  return *it;
}

void ObjectReader::fail_type(const std::string& key) const {
  throw Error(ErrorCode::kMalformedDocument, what_ + ": field '" + key + "' has the wrong type",
              {{"field", key}});
}

void ObjectReader::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it) {
    if (!seen_.count(it.key())) {
      throw Error(ErrorCode::kMalformedDocument,
                  what_ + ": unknown field '" + it.key() + "'", {{"field", it.key()}});
    }
  }
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string(what) + ": " + e.what(),
                {{"byte", e.byte}});
  }
}

}  // namespace sense
