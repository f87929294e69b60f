#pragma once

#include <string>

#include <json.hpp>

#include "auditline/errors.hpp"

namespace auditline {

using json = nlohmann::json;

// Canonical form: keys sorted lexicographically at every nesting level (the
// default nlohmann::json object is backed by std::map, so parsing or building
// a document already sorts it), no insignificant whitespace, UTF-8 bytes.
// Admissible values are booleans, integers, strings, and arrays/objects
// thereof; floats, nulls and binaries have no canonical form here and are
// rejected so that identical logical documents always byte-compare equal.
inline void check_canonical_value(const json& value, const std::string& at) {
  switch (value.type()) {
    case json::value_t::boolean:
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::string:
      return;
    case json::value_t::array: {
      std::size_t i = 0;
      for (const auto& item : value) {
        check_canonical_value(item, at + "[" + std::to_string(i++) + "]");
      }
      return;
    }
    case json::value_t::object: {
      for (const auto& [key, item] : value.items()) {
        check_canonical_value(item, at.empty() ? key : at + "." + key);
      }
      return;
    }
    default:
      throw SerializationError("value at '" + at +
                               "' has no canonical encoding (" +
                               std::string(value.type_name()) + ")");
  }
}

// Serializes to canonical bytes. Throws SerializationError on values outside
// the canonical subset.
inline std::string canonical_dump(const json& value) {
  check_canonical_value(value, "");
  return value.dump(-1, ' ', false, json::error_handler_t::strict);
}

}  // namespace auditline
