#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "auditline/canonical.hpp"
#include "auditline/errors.hpp"
#include "auditline/severity.hpp"
#include "auditline/sha256.hpp"

namespace auditline {

// Structural constants of the shipped coverage. Enforced for any registry.
inline constexpr int kPhaseCount = 4;
inline constexpr int kTaskCount = 26;
inline constexpr int kDomainCount = 16;
inline constexpr int kCheckCount = 95;

struct PhaseRecord {
  int phase = 0;  // 1..4
  std::string name;
};

struct DomainRecord {
  std::string id;
  std::string name;
};

// Rule spec for deterministic checks. Two shapes:
//   pattern          — scan files matching globs for a regex; matches fail.
//   presence_required — if any file matches globs+pattern (the trigger),
//                       at least one file matching required_globs must exist.
struct BuiltinRule {
  std::string type;  // "pattern" | "presence_required"
  std::vector<std::string> globs;
  std::string pattern;
  bool case_insensitive = false;
  std::vector<std::string> required_globs;
};

enum class CheckMode { builtin, agent };

struct CheckRecord {
  std::string check_id;
  std::string domain_id;
  std::string title;
  CheckMode mode = CheckMode::agent;
  std::optional<BuiltinRule> builtin_rule;
  Severity default_severity;
  std::string remediation;  // default guidance attached to builtin failures
};

struct TaskRecord {
  std::string task_id;
  int phase = 0;
  std::string kind;
  std::string title;
  std::optional<std::string> domain_id;  // present iff phase 2
  std::vector<std::string> depends_on;
  std::vector<std::string> boundary;  // allowed path prefixes under reports/
  std::vector<std::string> context_globs;
};

struct ScoringPolicy {
  std::map<SeverityLevel, int> weights = {
      {SeverityLevel::CRITICAL, 25}, {SeverityLevel::HIGH, 10},
      {SeverityLevel::MEDIUM, 4},    {SeverityLevel::LOW, 1},
      {SeverityLevel::INFO, 0},
  };

  int weight(SeverityLevel level) const {
    const auto it = weights.find(level);
    return it == weights.end() ? 0 : it->second;
  }
};

// The encoded coverage: phases, domains, checks and tasks, immutable after
// load and shareable across threads.
struct Registry {
  std::vector<PhaseRecord> phases;
  std::vector<DomainRecord> domains;
  std::vector<CheckRecord> checks;
  std::vector<TaskRecord> tasks;
  ScoringPolicy scoring;
  std::string digest;  // SHA-256 of the canonical registry document

  const TaskRecord* find_task(const std::string& task_id) const {
    for (const auto& t : tasks)
      if (t.task_id == task_id) return &t;
    return nullptr;
  }
  const CheckRecord* find_check(const std::string& check_id) const {
    for (const auto& c : checks)
      if (c.check_id == check_id) return &c;
    return nullptr;
  }
  const DomainRecord* find_domain(const std::string& domain_id) const {
    for (const auto& d : domains)
      if (d.id == domain_id) return &d;
    return nullptr;
  }
  // Checks of one domain, in registry declaration order.
  std::vector<CheckRecord> checks_for_domain(const std::string& domain_id) const {
    std::vector<CheckRecord> out;
    for (const auto& c : checks)
      if (c.domain_id == domain_id) out.push_back(c);
    return out;
  }
  // Declaration position; tie-break key for task selection.
  std::size_t declaration_index(const std::string& task_id) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].task_id == task_id) return i;
    return tasks.size();
  }
};

namespace detail {

inline const json& require_field(const json& j, const char* key,
                                 const std::string& where) {
  if (!j.contains(key)) {
    throw RegistryError(where + ": missing field '" + key + "'");
  }
  return j.at(key);
}

inline std::string require_string(const json& j, const char* key,
                                  const std::string& where) {
  const json& v = require_field(j, key, where);
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw RegistryError(where + ": field '" + key +
                        "' must be a non-empty string");
  }
  return v.get<std::string>();
}

inline Severity parse_severity(const json& j, const std::string& where) {
  Severity out;
  const auto level = severity_level_from_string(
      require_string(j, "level", where));
  if (!level) throw RegistryError(where + ": unknown severity level");
  out.level = *level;
  const json& cia = require_field(j, "cia_impact", where);
  auto dim = [&](const char* key) {
    const auto v = cia_level_from_string(require_string(cia, key, where));
    if (!v) throw RegistryError(where + ": unknown CIA level for " + key);
    return *v;
  };
  out.cia_impact.confidentiality = dim("confidentiality");
  out.cia_impact.integrity = dim("integrity");
  out.cia_impact.availability = dim("availability");
  return out;
}

}  // namespace detail

// Parses and validates a registry document. Any invariant violation aborts
// the whole load with a RegistryError naming the violation.
inline Registry parse_registry(const json& doc) {
  if (!doc.is_object()) throw RegistryError("registry: not a JSON object");
  Registry reg;

  // Phases: exactly 4, numbered 1..4 in order.
  const json& phases = detail::require_field(doc, "phases", "registry");
  if (!phases.is_array() || phases.size() != kPhaseCount) {
    throw RegistryError("phases: expected " + std::to_string(kPhaseCount) +
                        ", found " + std::to_string(phases.is_array() ? phases.size() : 0));
  }
  int expected_phase = 1;
  for (const auto& p : phases) {
    PhaseRecord rec;
    const json& num = detail::require_field(p, "phase", "phase record");
    if (!num.is_number_integer() || num.get<int>() != expected_phase) {
      throw RegistryError("phases: must be numbered 1.." +
                          std::to_string(kPhaseCount) + " in order");
    }
    rec.phase = expected_phase++;
    rec.name = detail::require_string(p, "name", "phase record");
    reg.phases.push_back(std::move(rec));
  }

  // Domains: exactly 16, unique ids.
  const json& domains = detail::require_field(doc, "domains", "registry");
  if (!domains.is_array() || domains.size() != kDomainCount) {
    throw RegistryError("domains: expected " + std::to_string(kDomainCount) +
                        ", found " + std::to_string(domains.is_array() ? domains.size() : 0));
  }
  std::set<std::string> domain_ids;
  for (const auto& d : domains) {
    DomainRecord rec;
    rec.id = detail::require_string(d, "id", "domain record");
    rec.name = detail::require_string(d, "name", "domain record");
    if (!domain_ids.insert(rec.id).second) {
      throw RegistryError("domains: duplicate id '" + rec.id + "'");
    }
    reg.domains.push_back(std::move(rec));
  }

  // Checks: exactly 95, unique ids, valid domain references, every check in
  // exactly one domain; builtin checks carry a rule.
  const json& checks = detail::require_field(doc, "checks", "registry");
  if (!checks.is_array() || checks.size() != kCheckCount) {
    throw RegistryError("checks: expected " + std::to_string(kCheckCount) +
                        ", found " + std::to_string(checks.is_array() ? checks.size() : 0));
  }
  std::set<std::string> check_ids;
  for (const auto& c : checks) {
    CheckRecord rec;
    rec.check_id = detail::require_string(c, "check_id", "check record");
    if (!check_ids.insert(rec.check_id).second) {
      throw RegistryError("checks: duplicate id '" + rec.check_id + "'");
    }
    const std::string where = "check " + rec.check_id;
    rec.domain_id = detail::require_string(c, "domain_id", where);
    if (!domain_ids.count(rec.domain_id)) {
      throw RegistryError(where + ": unknown domain reference '" +
                          rec.domain_id + "'");
    }
    rec.title = detail::require_string(c, "title", where);
    const std::string mode = detail::require_string(c, "mode", where);
    if (mode == "builtin") {
      rec.mode = CheckMode::builtin;
    } else if (mode == "agent") {
      rec.mode = CheckMode::agent;
    } else {
      throw RegistryError(where + ": unknown mode '" + mode + "'");
    }
    rec.default_severity = detail::parse_severity(
        detail::require_field(c, "default_severity", where), where);
    if (rec.default_severity.level == SeverityLevel::INFO &&
        !rec.default_severity.cia_impact.all_none()) {
      throw RegistryError(where + ": INFO severity requires all-none CIA impact");
    }
    if (c.contains("remediation")) {
      rec.remediation = c.at("remediation").get<std::string>();
    }
    if (rec.mode == CheckMode::builtin) {
      if (rec.remediation.empty()) {
        // Builtin failures take their remediation from the record.
        throw RegistryError(where + ": builtin checks require remediation text");
      }
      const json& rule = detail::require_field(c, "builtin_rule", where);
      BuiltinRule br;
      br.type = detail::require_string(rule, "type", where);
      if (br.type != "pattern" && br.type != "presence_required") {
        throw RegistryError(where + ": unknown builtin rule type '" + br.type + "'");
      }
      for (const auto& g : detail::require_field(rule, "globs", where)) {
        br.globs.push_back(g.get<std::string>());
      }
      br.pattern = detail::require_string(rule, "pattern", where);
      if (rule.contains("case_insensitive")) {
        br.case_insensitive = rule.at("case_insensitive").get<bool>();
      }
      if (br.type == "presence_required") {
        for (const auto& g :
             detail::require_field(rule, "required_globs", where)) {
          br.required_globs.push_back(g.get<std::string>());
        }
      }
      rec.builtin_rule = std::move(br);
    } else if (c.contains("builtin_rule")) {
      throw RegistryError(where + ": agent checks cannot carry a builtin rule");
    }
    reg.checks.push_back(std::move(rec));
  }

  // Tasks: exactly 26; phase 2 has exactly 16 tasks, one per domain.
  const json& tasks = detail::require_field(doc, "tasks", "registry");
  if (!tasks.is_array() || tasks.size() != kTaskCount) {
    throw RegistryError("tasks: expected " + std::to_string(kTaskCount) +
                        ", found " + std::to_string(tasks.is_array() ? tasks.size() : 0));
  }
  std::set<std::string> task_ids;
  for (const auto& t : tasks) {
    TaskRecord rec;
    rec.task_id = detail::require_string(t, "task_id", "task record");
    if (!task_ids.insert(rec.task_id).second) {
      throw RegistryError("tasks: duplicate id '" + rec.task_id + "'");
    }
    const std::string where = "task " + rec.task_id;
    const json& phase = detail::require_field(t, "phase", where);
    if (!phase.is_number_integer() || phase.get<int>() < 1 ||
        phase.get<int>() > kPhaseCount) {
      throw RegistryError(where + ": phase must be in 1.." +
                          std::to_string(kPhaseCount));
    }
    rec.phase = phase.get<int>();
    rec.kind = detail::require_string(t, "kind", where);
    rec.title = detail::require_string(t, "title", where);
    if (t.contains("domain_id")) {
      rec.domain_id = t.at("domain_id").get<std::string>();
      if (!domain_ids.count(*rec.domain_id)) {
        throw RegistryError(where + ": unknown domain reference '" +
                            *rec.domain_id + "'");
      }
    }
    if (rec.phase == 2 && !rec.domain_id) {
      throw RegistryError(where + ": phase-2 task must map to exactly one domain");
    }
    if (rec.phase != 2 && rec.domain_id) {
      throw RegistryError(where + ": only phase-2 tasks carry a domain");
    }
    for (const auto& d : detail::require_field(t, "depends_on", where)) {
      rec.depends_on.push_back(d.get<std::string>());
    }
    const json& boundary = detail::require_field(t, "boundary", where);
    if (!boundary.is_array() || boundary.empty()) {
      throw RegistryError(where + ": boundary must be a non-empty prefix list");
    }
    for (const auto& b : boundary) {
      const std::string prefix = b.get<std::string>();
      if (prefix.rfind("reports/", 0) != 0 ||
          prefix.find("..") != std::string::npos) {
        throw RegistryError(where + ": boundary prefix '" + prefix +
                            "' must live under reports/");
      }
      rec.boundary.push_back(prefix);
    }
    if (t.contains("context_globs")) {
      for (const auto& g : t.at("context_globs")) {
        rec.context_globs.push_back(g.get<std::string>());
      }
    }
    reg.tasks.push_back(std::move(rec));
  }

  // Phase-2 coverage: exactly 16 domain tasks, each domain exactly once.
  std::set<std::string> phase2_domains;
  int phase2_count = 0;
  for (const auto& t : reg.tasks) {
    if (t.phase != 2) continue;
    ++phase2_count;
    if (!phase2_domains.insert(*t.domain_id).second) {
      throw RegistryError("task " + t.task_id + ": domain '" + *t.domain_id +
                          "' audited by more than one phase-2 task");
    }
  }
  if (phase2_count != kDomainCount ||
      phase2_domains.size() != static_cast<std::size_t>(kDomainCount)) {
    throw RegistryError("tasks: phase 2 must hold exactly one task per domain (" +
                        std::to_string(kDomainCount) + " tasks)");
  }

  // Dependencies: known ids, phase order, acyclic.
  for (const auto& t : reg.tasks) {
    for (const auto& dep : t.depends_on) {
      const TaskRecord* d = reg.find_task(dep);
      if (!d) {
        throw RegistryError("task " + t.task_id + ": unknown dependency '" +
                            dep + "'");
      }
      if (d->phase > t.phase) {
        throw RegistryError("task " + t.task_id + ": phase-order violation — " +
                            "depends on '" + dep + "' of later phase " +
                            std::to_string(d->phase));
      }
    }
  }
  {
    // Kahn's algorithm; leftovers mean a cycle.
    std::map<std::string, int> indegree;
    for (const auto& t : reg.tasks)
      indegree[t.task_id] = static_cast<int>(t.depends_on.size());
    std::vector<std::string> ready;
    for (const auto& t : reg.tasks)
      if (indegree[t.task_id] == 0) ready.push_back(t.task_id);
    std::size_t resolved = 0;
    while (!ready.empty()) {
      const std::string id = ready.front();
      ready.erase(ready.begin());
      ++resolved;
      for (const auto& t : reg.tasks) {
        if (std::find(t.depends_on.begin(), t.depends_on.end(), id) !=
            t.depends_on.end()) {
          if (--indegree[t.task_id] == 0) ready.push_back(t.task_id);
        }
      }
    }
    if (resolved != reg.tasks.size()) {
      throw RegistryError("tasks: dependency cycle detected");
    }
  }

  // Scoring weights are data; absent sections keep the defaults.
  if (doc.contains("scoring")) {
    const json& scoring = doc.at("scoring");
    if (scoring.contains("weights")) {
      for (const auto& [name, value] : scoring.at("weights").items()) {
        const auto level = severity_level_from_string(name);
        if (!level) {
          throw RegistryError("scoring: unknown severity '" + name + "'");
        }
        if (!value.is_number_integer() || value.get<int>() < 0) {
          throw RegistryError("scoring: weight for " + name +
                              " must be a non-negative integer");
        }
        reg.scoring.weights[*level] = value.get<int>();
      }
    }
  }

  reg.digest = sha256_hex(canonical_dump(doc));
  return reg;
}

inline Registry load_registry(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    throw RegistryError("cannot open registry file: " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw RegistryError("registry is not valid JSON: " + std::string(e.what()));
  }
  return parse_registry(doc);
}

}  // namespace auditline
