#pragma once

#include <string>
#include <string_view>

namespace sense {

// Random RFC 4122 version-4 identifier.
std::string random_uuid();

// Deterministic UUID-shaped identifier derived from a name. Two calls with the
// same name always agree; used for delta ids so a design is reproducible.
std::string name_uuid(std::string_view name);

}  // namespace sense
