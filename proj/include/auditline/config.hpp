#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "auditline/agents.hpp"
#include "auditline/canonical.hpp"
#include "auditline/clock.hpp"
#include "auditline/errors.hpp"

namespace auditline {

// Runtime configuration of one run. Serialized into the run_initialized
// event, so a run directory is self-describing.
struct RunConfig {
  std::string repo_root;
  std::optional<std::string> docs_dir;
  std::string registry_path;
  std::map<std::string, AgentBinding> bindings;  // task kind -> binding; "default" fallback
  int max_repair_attempts = 2;
  std::uint64_t context_byte_budget = 65536;
  std::uint64_t quick_fix_max_locations = 3;
  std::string clock_mode = "system";  // "system" | "fixed"
  std::string fixed_time = "2026-01-01T00:00:00Z";

  std::unique_ptr<Clock> make_clock() const {
    if (clock_mode == "fixed") return std::make_unique<FixedClock>(fixed_time);
    return std::make_unique<SystemClock>();
  }

  const AgentBinding* binding_for(const std::string& task_kind) const {
    auto it = bindings.find(task_kind);
    if (it != bindings.end()) return &it->second;
    it = bindings.find("default");
    return it == bindings.end() ? nullptr : &it->second;
  }

  json to_json() const {
    json j;
    j["repo_root"] = repo_root;
    if (docs_dir) j["docs_dir"] = *docs_dir;
    j["registry_path"] = registry_path;
    json agents = json::object();
    for (const auto& [kind, binding] : bindings) {
      json b;
      if (binding.kind == AgentKind::scripted) {
        b["kind"] = "scripted";
        b["script_path"] = binding.script_path;
      } else {
        b["kind"] = "model_service";
        b["endpoint"] = binding.endpoint;
        b["model"] = binding.model;
        b["timeout_seconds"] = binding.timeout_seconds;
        b["max_retries"] = binding.max_retries;
      }
      agents[kind] = std::move(b);
    }
    j["agents"] = agents;
    j["max_repair_attempts"] = max_repair_attempts;
    j["context_byte_budget"] = context_byte_budget;
    j["quick_fix_max_locations"] = quick_fix_max_locations;
    json clock;
    clock["mode"] = clock_mode;
    if (clock_mode == "fixed") clock["fixed_time"] = fixed_time;
    j["clock"] = clock;
    return j;
  }

  static RunConfig from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> kKnown = {
        "repo_root",           "docs_dir",
        "registry_path",       "agents",
        "max_repair_attempts", "context_byte_budget",
        "quick_fix_max_locations", "clock"};
    for (const auto& [key, value] : doc.items()) {
      if (!kKnown.count(key)) {
        throw ConfigError("config: unknown field '" + key + "'");
      }
    }
    RunConfig out;
    for (const char* key : {"repo_root", "registry_path"}) {
      if (!doc.contains(key) || !doc.at(key).is_string() ||
          doc.at(key).get<std::string>().empty()) {
        throw ConfigError(std::string("config: '") + key +
                          "' must be a non-empty string");
      }
    }
    out.repo_root = doc.at("repo_root").get<std::string>();
    out.registry_path = doc.at("registry_path").get<std::string>();
    if (doc.contains("docs_dir")) {
      out.docs_dir = doc.at("docs_dir").get<std::string>();
    }
    if (!doc.contains("agents") || !doc.at("agents").is_object() ||
        doc.at("agents").empty()) {
      throw ConfigError("config: 'agents' must map task kinds to bindings");
    }
    for (const auto& [kind, value] : doc.at("agents").items()) {
      AgentBinding binding;
      binding.name = kind;
      const std::string agent_kind = value.at("kind").get<std::string>();
      if (agent_kind == "scripted") {
        binding.kind = AgentKind::scripted;
        binding.script_path = value.at("script_path").get<std::string>();
      } else if (agent_kind == "model_service") {
        binding.kind = AgentKind::model_service;
        binding.endpoint = value.at("endpoint").get<std::string>();
        binding.model = value.at("model").get<std::string>();
        if (value.contains("timeout_seconds")) {
          binding.timeout_seconds = value.at("timeout_seconds").get<int>();
        }
        if (value.contains("max_retries")) {
          binding.max_retries = value.at("max_retries").get<int>();
        }
      } else {
        throw ConfigError("config: agent kind must be scripted or model_service");
      }
      out.bindings[kind] = std::move(binding);
    }
    if (doc.contains("max_repair_attempts")) {
      const int attempts = doc.at("max_repair_attempts").get<int>();
      if (attempts < 0) {
        throw ConfigError("config: max_repair_attempts must be >= 0");
      }
      out.max_repair_attempts = attempts;
    }
    if (doc.contains("context_byte_budget")) {
      out.context_byte_budget =
          doc.at("context_byte_budget").get<std::uint64_t>();
    }
    if (doc.contains("quick_fix_max_locations")) {
      out.quick_fix_max_locations =
          doc.at("quick_fix_max_locations").get<std::uint64_t>();
    }
    if (doc.contains("clock")) {
      const json& clock = doc.at("clock");
      out.clock_mode = clock.at("mode").get<std::string>();
      if (out.clock_mode != "system" && out.clock_mode != "fixed") {
        throw ConfigError("config: clock.mode must be system or fixed");
      }
      if (clock.contains("fixed_time")) {
        out.fixed_time = clock.at("fixed_time").get<std::string>();
      }
    }
    return out;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) {
      throw ConfigError("cannot open config file: " + path.string());
    }
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return from_json(doc);
  }

  // All referenced paths must exist at run start.
  void check_paths() const {
    namespace fs = std::filesystem;
    if (!fs::is_directory(repo_root)) {
      throw ConfigError("repo_root does not exist: " + repo_root);
    }
    if (!fs::is_regular_file(registry_path)) {
      throw ConfigError("registry_path does not exist: " + registry_path);
    }
    if (docs_dir && !fs::is_directory(*docs_dir)) {
      throw ConfigError("docs_dir does not exist: " + *docs_dir);
    }
    for (const auto& [kind, binding] : bindings) {
      if (binding.kind == AgentKind::scripted &&
          !fs::is_regular_file(binding.script_path)) {
        throw ConfigError("agent script does not exist: " + binding.script_path);
      }
    }
  }
};

}  // namespace auditline
