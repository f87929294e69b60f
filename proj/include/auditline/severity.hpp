#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "auditline/canonical.hpp"

namespace auditline {

enum class SeverityLevel { INFO = 0, LOW = 1, MEDIUM = 2, HIGH = 3, CRITICAL = 4 };

inline std::string to_string(SeverityLevel level) {
  switch (level) {
    case SeverityLevel::CRITICAL: return "CRITICAL";
    case SeverityLevel::HIGH: return "HIGH";
    case SeverityLevel::MEDIUM: return "MEDIUM";
    case SeverityLevel::LOW: return "LOW";
    case SeverityLevel::INFO: return "INFO";
  }
  return "INFO";
}

inline std::optional<SeverityLevel> severity_level_from_string(std::string_view s) {
  if (s == "CRITICAL") return SeverityLevel::CRITICAL;
  if (s == "HIGH") return SeverityLevel::HIGH;
  if (s == "MEDIUM") return SeverityLevel::MEDIUM;
  if (s == "LOW") return SeverityLevel::LOW;
  if (s == "INFO") return SeverityLevel::INFO;
  return std::nullopt;
}

// One level up the CRITICAL > HIGH > MEDIUM > LOW > INFO order, clamped.
inline SeverityLevel elevate(SeverityLevel level) {
  return level == SeverityLevel::CRITICAL
             ? SeverityLevel::CRITICAL
             : static_cast<SeverityLevel>(static_cast<int>(level) + 1);
}

enum class CiaLevel { none = 0, partial = 1, full = 2 };

inline std::string to_string(CiaLevel level) {
  switch (level) {
    case CiaLevel::none: return "none";
    case CiaLevel::partial: return "partial";
    case CiaLevel::full: return "full";
  }
  return "none";
}

inline std::optional<CiaLevel> cia_level_from_string(std::string_view s) {
  if (s == "none") return CiaLevel::none;
  if (s == "partial") return CiaLevel::partial;
  if (s == "full") return CiaLevel::full;
  return std::nullopt;
}

struct CiaImpact {
  CiaLevel confidentiality = CiaLevel::none;
  CiaLevel integrity = CiaLevel::none;
  CiaLevel availability = CiaLevel::none;

  bool all_none() const {
    return confidentiality == CiaLevel::none && integrity == CiaLevel::none &&
           availability == CiaLevel::none;
  }
  // Count of impacted dimensions; the risk matrix impact rank.
  int impacted_dimensions() const {
    return (confidentiality != CiaLevel::none ? 1 : 0) +
           (integrity != CiaLevel::none ? 1 : 0) +
           (availability != CiaLevel::none ? 1 : 0);
  }
  bool operator==(const CiaImpact&) const = default;

  json to_json() const {
    return json{{"confidentiality", to_string(confidentiality)},
                {"integrity", to_string(integrity)},
                {"availability", to_string(availability)}};
  }
};

struct Severity {
  SeverityLevel level = SeverityLevel::INFO;
  CiaImpact cia_impact;

  bool operator==(const Severity&) const = default;

  json to_json() const {
    return json{{"level", to_string(level)}, {"cia_impact", cia_impact.to_json()}};
  }
};

inline CiaLevel merge_cia(CiaLevel a, CiaLevel b) { return a < b ? b : a; }

inline CiaImpact merge_cia(const CiaImpact& a, const CiaImpact& b) {
  return CiaImpact{merge_cia(a.confidentiality, b.confidentiality),
                   merge_cia(a.integrity, b.integrity),
                   merge_cia(a.availability, b.availability)};
}

}  // namespace auditline
