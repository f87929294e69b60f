#pragma once

// Shared fixture plumbing: shipped-data paths, scripted-agent generation for
// happy-path / adversarial / truncated runs, and config authoring.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "auditline/agents.hpp"
#include "auditline/checks.hpp"
#include "auditline/config.hpp"
#include "auditline/orchestrator.hpp"
#include "auditline/registry.hpp"

namespace testsupport {

using auditline::json;

inline std::filesystem::path data_registry_path() {
  return std::filesystem::path(AUDITLINE_DATA_DIR) / "registry.json";
}

inline std::filesystem::path report_schema_path() {
  return std::filesystem::path(AUDITLINE_SCHEMA_DIR) / "report.schema.json";
}

inline std::filesystem::path intention_schema_path() {
  return std::filesystem::path(AUDITLINE_SCHEMA_DIR) / "intention.schema.json";
}

inline std::filesystem::path fixture_repo_path() {
  return std::filesystem::path(AUDITLINE_FIXTURE_DIR) / "vulnapp";
}

inline std::filesystem::path golden_dir() {
  return std::filesystem::path(AUDITLINE_FIXTURE_DIR) / "golden";
}

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return json::parse(in);
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

constexpr const char* kActor = "agent-a";

inline std::string claim_text(const std::string& task_id,
                              const std::string& actor = kActor,
                              const std::string& prior = "todo") {
  json j;
  j["action"] = "claim";
  j["task_id"] = task_id;
  j["actor"] = actor;
  j["prior_status"] = prior;
  return j.dump();
}

// A schema-valid complete for the given task: builtin results restated
// exactly, agent checks passed, one report artifact inside the boundary.
inline json complete_object(const auditline::Registry& registry,
                            const auditline::TaskRecord& task,
                            const std::filesystem::path& repo_root,
                            const std::string& actor = kActor) {
  json checks = json::array();
  json findings = json::array();
  if (task.domain_id) {
    for (const auto& check : registry.checks_for_domain(*task.domain_id)) {
      if (check.mode == auditline::CheckMode::builtin) {
        const auditline::CheckResult result =
            auditline::run_builtin_check(check, repo_root);
        checks.push_back(result.to_json());
        if (result.status == auditline::CheckStatus::fail) {
          findings.push_back(result.to_json());
        }
      } else {
        json c;
        c["check_id"] = check.check_id;
        c["status"] = "pass";
        c["evidence"] = json::array();
        c["explanation"] = "reviewed the audited scope; no violation observed";
        c["remediation"] = "";
        checks.push_back(std::move(c));
      }
    }
  } else {
    json c;
    c["check_id"] = "task-verify-" + task.task_id;
    c["status"] = "pass";
    c["evidence"] = json::array();
    c["explanation"] = "task output reviewed against its definition";
    c["remediation"] = "";
    checks.push_back(std::move(c));
  }

  json updates = json::array();
  json update;
  // One artifact per task, unique path so siblings sharing a boundary never
  // shadow each other in the artifact index.
  update["path"] = task.boundary.front() + task.task_id + "-report.md";
  update["content"] = "# " + task.title + "\n\nproduced by " + actor + "\n";
  updates.push_back(std::move(update));

  json j;
  j["action"] = "complete";
  j["task_id"] = task.task_id;
  j["actor"] = actor;
  j["prior_status"] = "in_progress";
  j["checks"] = checks;
  j["file_updates"] = updates;
  j["findings"] = findings;
  return j;
}

inline std::string complete_text(const auditline::Registry& registry,
                                 const auditline::TaskRecord& task,
                                 const std::filesystem::path& repo_root,
                                 const std::string& actor = kActor) {
  return complete_object(registry, task, repo_root, actor).dump();
}

struct ScriptEntry {
  std::string task_id;
  std::string action;
  std::string raw_text;
};

inline std::vector<ScriptEntry> happy_script(
    const auditline::Registry& registry,
    const std::filesystem::path& repo_root) {
  std::vector<ScriptEntry> entries;
  for (const auto& task : registry.tasks) {
    entries.push_back({task.task_id, "claim", claim_text(task.task_id)});
    entries.push_back(
        {task.task_id, "complete", complete_text(registry, task, repo_root)});
  }
  return entries;
}

inline void write_script(const std::filesystem::path& path,
                         const std::vector<ScriptEntry>& entries) {
  json doc = json::array();
  for (const auto& entry : entries) {
    doc.push_back(json{{"task_id", entry.task_id},
                       {"action", entry.action},
                       {"raw_text", entry.raw_text}});
  }
  write_text(path, doc.dump(2) + "\n");
}

// One violation per protocol invariant, each followed by the valid repair
// already queued behind it.
inline std::vector<ScriptEntry> adversarial_script(
    const auditline::Registry& registry,
    const std::filesystem::path& repo_root) {
  std::vector<ScriptEntry> entries;
  auto task = [&](const std::string& id) { return *registry.find_task(id); };

  // claim-before-work: complete while still todo (status restated honestly,
  // so the state machine itself rejects it)
  {
    json j = complete_object(registry, task("T01"), repo_root);
    j["prior_status"] = "todo";
    entries.push_back({"T01", "claim", j.dump()});
  }
  // complete-after-work: a second claim while in_progress
  entries.push_back({"T02", "complete", claim_text("T02", kActor, "in_progress")});
  // prior-status consistency: restates in_progress for a todo task
  entries.push_back({"T03", "claim", claim_text("T03", kActor, "in_progress")});
  // lock ownership: completion by an actor that never claimed
  entries.push_back({"T04", "complete",
                     complete_text(registry, task("T04"), repo_root, "intruder")});
  // boundary discipline: artifact path outside the task's prefixes
  {
    json j = complete_object(registry, task("T05"), repo_root);
    j["file_updates"][0]["path"] = "reports/phase1/escape.md";
    entries.push_back({"T05", "complete", j.dump()});
  }
  // done immutability: act on a task that is already done
  entries.push_back({"T06", "claim", claim_text("T01", kActor, "done")});

  const auto happy = happy_script(registry, repo_root);
  entries.insert(entries.end(), happy.begin(), happy.end());

  // Reorder: violations must sit in front of their happy twin for the same
  // (task, action) key; entries already precede because they were pushed
  // first and the scripted agent consumes per-key FIFO.
  return entries;
}

// Happy path except one domain task whose completion never becomes valid.
inline std::vector<ScriptEntry> truncated_script(
    const auditline::Registry& registry,
    const std::filesystem::path& repo_root, const std::string& broken_task) {
  std::vector<ScriptEntry> entries;
  const auditline::TaskRecord task = *registry.find_task(broken_task);
  // Parse-valid but protocol-invalid: one check result cannot cover the
  // domain's check set.
  json bad;
  bad["action"] = "complete";
  bad["task_id"] = broken_task;
  bad["actor"] = kActor;
  bad["prior_status"] = "in_progress";
  json check;
  check["check_id"] = registry.checks_for_domain(*task.domain_id).front().check_id;
  check["status"] = "pass";
  check["evidence"] = json::array();
  check["explanation"] = "only looked at one check";
  check["remediation"] = "";
  bad["checks"] = json::array({check});
  bad["file_updates"] =
      json::array({json{{"path", task.boundary.front() + "report.md"},
                        {"content", "partial"}}});
  bad["findings"] = json::array();
  for (int i = 0; i < 3; ++i) {
    entries.push_back({broken_task, "complete", bad.dump()});
  }

  for (const auto& t : registry.tasks) {
    entries.push_back({t.task_id, "claim", claim_text(t.task_id)});
    if (t.task_id == broken_task) continue;  // no valid completion exists
    entries.push_back(
        {t.task_id, "complete", complete_text(registry, t, repo_root)});
  }
  return entries;
}

inline std::filesystem::path write_config(
    const std::filesystem::path& dir, const std::filesystem::path& repo_root,
    const std::filesystem::path& script_path,
    const std::filesystem::path& registry_path = data_registry_path()) {
  json config;
  config["repo_root"] = repo_root.string();
  config["registry_path"] = registry_path.string();
  config["agents"] = json{
      {"default", json{{"kind", "scripted"}, {"script_path", script_path.string()}}}};
  config["max_repair_attempts"] = 2;
  config["context_byte_budget"] = 65536;
  config["quick_fix_max_locations"] = 3;
  config["clock"] = json{{"mode", "fixed"}, {"fixed_time", "2026-01-01T00:00:00Z"}};
  const std::filesystem::path path = dir / "config.json";
  write_text(path, config.dump(2) + "\n");
  return path;
}

struct FixtureRun {
  std::filesystem::path run_dir;
  auditline::RunOutcome outcome;
};

inline FixtureRun run_with_config(const std::filesystem::path& config_path,
                                  const std::filesystem::path& run_dir) {
  auditline::Orchestrator::init_run(auditline::RunConfig::load(config_path),
                                    run_dir);
  auditline::Orchestrator orchestrator{run_dir};
  return FixtureRun{run_dir, orchestrator.run()};
}

// init + run with the given script entries against the vulnapp fixture.
inline FixtureRun run_fixture(const std::filesystem::path& work_dir,
                              const std::vector<ScriptEntry>& entries,
                              const std::string& tag = "run") {
  const std::filesystem::path script = work_dir / (tag + "-script.json");
  write_script(script, entries);
  const std::filesystem::path config =
      write_config(work_dir, fixture_repo_path(), script);
  return run_with_config(config, work_dir / (tag + "-dir"));
}

}  // namespace testsupport
