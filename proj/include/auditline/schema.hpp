#pragma once

#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

namespace auditline {

// Minimal JSON Schema validation: the subset the shipped schemas use —
// type, properties, required, additionalProperties, items, enum, pattern,
// minimum/maximum, minItems, minLength. Not a general draft implementation.
namespace schema_detail {

using json = nlohmann::json;

inline bool type_matches(const std::string& type, const json& value) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "integer") return value.is_number_integer();
  if (type == "number") return value.is_number();
  if (type == "boolean") return value.is_boolean();
  if (type == "null") return value.is_null();
  return false;
}

inline void validate_node(const json& root, const json& schema_in,
                          const json& value, const std::string& path,
                          std::vector<std::string>& errors) {
  if (!schema_in.is_object()) return;

  // Local $ref resolution ("#/definitions/...").
  const json* resolved = &schema_in;
  if (schema_in.contains("$ref")) {
    const std::string ref = schema_in.at("$ref").get<std::string>();
    if (ref.rfind("#/", 0) != 0) {
      errors.push_back(path + ": unsupported $ref '" + ref + "'");
      return;
    }
    const json* node = &root;
    std::size_t pos = 2;
    while (pos < ref.size()) {
      const std::size_t sep = std::min(ref.find('/', pos), ref.size());
      const std::string key = ref.substr(pos, sep - pos);
      if (!node->is_object() || !node->contains(key)) {
        errors.push_back(path + ": unresolvable $ref '" + ref + "'");
        return;
      }
      node = &node->at(key);
      pos = sep + 1;
    }
    resolved = node;
  }
  const json& schema = *resolved;

  if (schema.contains("type")) {
    const json& type = schema.at("type");
    bool ok = false;
    if (type.is_string()) {
      ok = type_matches(type.get<std::string>(), value);
    } else if (type.is_array()) {
      for (const auto& t : type) {
        if (type_matches(t.get<std::string>(), value)) {
          ok = true;
          break;
        }
      }
    }
    if (!ok) {
      errors.push_back(path + ": expected type " + type.dump());
      return;
    }
  }

  if (schema.contains("enum")) {
    bool ok = false;
    for (const auto& candidate : schema.at("enum")) {
      if (candidate == value) {
        ok = true;
        break;
      }
    }
    if (!ok) errors.push_back(path + ": value not in enum");
  }

  if (value.is_string()) {
    if (schema.contains("pattern")) {
      const std::regex re(schema.at("pattern").get<std::string>());
      if (!std::regex_search(value.get<std::string>(), re)) {
        errors.push_back(path + ": pattern mismatch");
      }
    }
    if (schema.contains("minLength") &&
        value.get<std::string>().size() <
            schema.at("minLength").get<std::size_t>()) {
      errors.push_back(path + ": shorter than minLength");
    }
  }

  if (value.is_number()) {
    if (schema.contains("minimum") &&
        value.get<double>() < schema.at("minimum").get<double>()) {
      errors.push_back(path + ": below minimum");
    }
    if (schema.contains("maximum") &&
        value.get<double>() > schema.at("maximum").get<double>()) {
      errors.push_back(path + ": above maximum");
    }
  }

  if (value.is_array()) {
    if (schema.contains("minItems") &&
        value.size() < schema.at("minItems").get<std::size_t>()) {
      errors.push_back(path + ": fewer items than minItems");
    }
    if (schema.contains("items")) {
      std::size_t i = 0;
      for (const auto& item : value) {
        validate_node(root, schema.at("items"), item,
                      path + "/" + std::to_string(i++), errors);
      }
    }
  }

  if (value.is_object()) {
    const json props = schema.value("properties", json::object());
    if (schema.contains("required")) {
      for (const auto& key : schema.at("required")) {
        if (!value.contains(key.get<std::string>())) {
          errors.push_back(path + ": missing required property '" +
                           key.get<std::string>() + "'");
        }
      }
    }
    for (const auto& [key, item] : value.items()) {
      if (props.contains(key)) {
        validate_node(root, props.at(key), item, path + "/" + key, errors);
      } else if (schema.contains("additionalProperties")) {
        const json& extra = schema.at("additionalProperties");
        if (extra.is_boolean() && !extra.get<bool>()) {
          errors.push_back(path + ": unexpected property '" + key + "'");
        } else if (extra.is_object()) {
          validate_node(root, extra, item, path + "/" + key, errors);
        }
      }
    }
  }
}

}  // namespace schema_detail

// Errors found validating document against schema; empty means valid.
inline std::vector<std::string> validate_against_schema(
    const nlohmann::json& schema, const nlohmann::json& document) {
  std::vector<std::string> errors;
  schema_detail::validate_node(schema, schema, document, "#", errors);
  return errors;
}

}  // namespace auditline
