#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>

#include "auditline/canonical.hpp"
#include "auditline/context.hpp"
#include "auditline/errors.hpp"

namespace auditline {

// Environment variable holding the model-service credential; never stored in
// run configuration files.
inline constexpr const char* kModelTokenEnv = "AUDITLINE_MODEL_TOKEN";

enum class AgentKind { scripted, model_service };

struct AgentBinding {
  std::string name;
  AgentKind kind = AgentKind::scripted;
  // scripted
  std::string script_path;
  // model_service
  std::string endpoint;
  std::string model;
  int timeout_seconds = 30;
  int max_retries = 2;
};

struct AgentOutput {
  std::string raw_text;  // recorded verbatim before any parsing
  std::uint64_t latency_ms = 0;
  int attempt = 1;
};

// Deterministic prompt document for one pack: byte-identical for identical
// packs.
inline std::string render_prompt(const ContextPack& pack) {
  std::string out;
  out += "# audit task dispatch\n\n";
  out += "task_id: " + pack.task.task_id + "\n";
  out += "title: " + pack.task.title + "\n";
  out += "kind: " + pack.task.kind + "\n";
  out += "phase: " + std::to_string(pack.task.phase) + "\n";
  out += "domain: " + (pack.task.domain_id ? *pack.task.domain_id
                                           : std::string("(none)")) + "\n";
  out += "prior_status: " + to_string(pack.prior_status) + "\n";
  out += "expected_action: " + to_string(pack.expected_action()) + "\n";

  out += "\n## intention contract\n";
  out += "Respond with exactly one JSON object and nothing else.\n";
  out += "Required fields: action (claim|complete|block), task_id, actor, "
         "prior_status (restate the status above).\n";
  out += "complete additionally requires: checks (one result per listed "
         "check), file_updates (at least one, paths under: ";
  for (std::size_t i = 0; i < pack.task.boundary.size(); ++i) {
    if (i) out += ", ";
    out += pack.task.boundary[i];
  }
  out += "), findings (one per failed check).\n";
  out += "block additionally requires: reason.\n";

  out += "\n## checks (" + std::to_string(pack.checks.size()) + ")\n";
  if (pack.checks.empty()) {
    out += "(none; report at least one task verification check of your own)\n";
  }
  for (const auto& check : pack.checks) {
    out += "- " + check.check_id + " [" +
           (check.mode == CheckMode::builtin ? "builtin" : "agent") + "] " +
           check.title + "\n";
  }

  out += "\n## deterministic check results (restate verbatim under complete)\n";
  if (pack.builtin_results.empty()) {
    out += "(none)\n";
  } else {
    json results = json::array();
    for (const auto& r : pack.builtin_results) results.push_back(r.to_json());
    out += canonical_dump(results) + "\n";
  }

  out += "\n## repository excerpts (" +
         std::to_string(pack.repo_excerpts.size()) + ")\n";
  if (pack.repo_excerpts.empty()) {
    out += "(no repository excerpts)\n";
  }
  for (const auto& excerpt : pack.repo_excerpts) {
    out += "--- " + excerpt.path + (excerpt.truncated ? " (truncated)" : "") +
           " ---\n";
    out += excerpt.content;
    if (out.empty() || out.back() != '\n') out += '\n';
  }

  out += "\n## dependency artifacts (" +
         std::to_string(pack.dependency_artifacts.size()) + ")\n";
  if (pack.dependency_artifacts.empty()) {
    out += "(none)\n";
  }
  for (const auto& artifact : pack.dependency_artifacts) {
    out += "--- " + artifact.path + " ---\n";
    out += artifact.content;
    if (out.empty() || out.back() != '\n') out += '\n';
  }

  if (pack.repair) {
    out += "\n## repair feedback\n";
    out += "attempt " + std::to_string(pack.repair->attempt) +
           ": previous emission rejected: code=" + to_string(pack.repair->code) +
           ", detail=" + pack.repair->detail + "\n";
  }
  return out;
}

// Producer of raw intention text. The kernel treats every implementation as
// untrusted: output is recorded verbatim and validated downstream; no agent
// code path writes files or appends events.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentOutput dispatch(const ContextPack& pack) = 0;
};

// Replays canned responses keyed by (task_id, expected action); the primary
// test instrument, including adversarial suites.
class ScriptedAgent final : public Agent {
 public:
  struct Entry {
    std::string task_id;
    std::string action;  // "claim" | "complete"
    std::string raw_text;
  };

  explicit ScriptedAgent(std::vector<Entry> entries) {
    for (auto& entry : entries) {
      queues_[{entry.task_id, entry.action}].push_back(std::move(entry.raw_text));
    }
  }

  static ScriptedAgent from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) {
      throw ConfigError("cannot open agent script: " + path.string());
    }
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("agent script is not valid JSON: " +
                        std::string(e.what()));
    }
    if (!doc.is_array()) {
      throw ConfigError("agent script must be a JSON array of entries");
    }
    std::vector<Entry> entries;
    for (const auto& item : doc) {
      Entry entry;
      entry.task_id = item.at("task_id").get<std::string>();
      entry.action = item.at("action").get<std::string>();
      entry.raw_text = item.at("raw_text").get<std::string>();
      entries.push_back(std::move(entry));
    }
    return ScriptedAgent(std::move(entries));
  }

  AgentOutput dispatch(const ContextPack& pack) override {
    const std::pair<std::string, std::string> key{
        pack.task.task_id, to_string(pack.expected_action())};
    auto it = queues_.find(key);
    if (it == queues_.end() || it->second.empty()) {
      throw DispatchError("script exhausted for task " + key.first +
                          " action " + key.second);
    }
    AgentOutput out;
    out.raw_text = it->second.front();
    it->second.pop_front();
    out.attempt = ++attempts_[key];
    return out;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::deque<std::string>> queues_;
  std::map<std::pair<std::string, std::string>, int> attempts_;
};

// Minimal HTTP client for an external model service: POST {model, prompt},
// response {text}. Vendor-specific schemas are a thin mapping layer on top.
class ModelServiceAgent final : public Agent {
 public:
  explicit ModelServiceAgent(AgentBinding binding)
      : binding_(std::move(binding)) {
    const std::string& url = binding_.endpoint;
    const std::size_t scheme = url.find("://");
    const std::size_t host_begin = scheme == std::string::npos ? 0 : scheme + 3;
    const std::size_t path_begin = url.find('/', host_begin);
    base_ = url.substr(0, path_begin);
    path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
  }

  AgentOutput dispatch(const ContextPack& pack) override {
    json request;
    request["model"] = binding_.model;
    request["prompt"] = render_prompt(pack);
    const std::string body = request.dump();

    const auto start = std::chrono::steady_clock::now();
    std::string last_error;
    const int attempts = binding_.max_retries + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      httplib::Client client(base_);
      client.set_connection_timeout(binding_.timeout_seconds, 0);
      client.set_read_timeout(binding_.timeout_seconds, 0);
      httplib::Headers headers;
      if (const char* token = std::getenv(kModelTokenEnv)) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
      auto response = client.Post(path_, headers, body, "application/json");
      if (!response) {
        last_error = "transport error: " + httplib::to_string(response.error());
        continue;
      }
      if (response->status != 200) {
        last_error = "service returned status " +
                     std::to_string(response->status);
        continue;
      }
      json parsed;
      try {
        parsed = json::parse(response->body);
      } catch (const json::exception& e) {
        last_error = std::string("unparseable service response: ") + e.what();
        continue;
      }
      if (!parsed.is_object() || !parsed.contains("text") ||
          !parsed.at("text").is_string()) {
        last_error = "service response lacks a text field";
        continue;
      }
      AgentOutput out;
      out.raw_text = parsed.at("text").get<std::string>();
      out.latency_ms = static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::steady_clock::now() - start)
              .count());
      out.attempt = attempt;
      return out;
    }
    throw DispatchError("model service unreachable after " +
                        std::to_string(attempts) + " attempt(s): " + last_error);
  }

 private:
  AgentBinding binding_;
  std::string base_;
  std::string path_;
};

}  // namespace auditline
