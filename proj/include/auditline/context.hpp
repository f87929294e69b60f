#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "auditline/checks.hpp"
#include "auditline/projection.hpp"
#include "auditline/protocol.hpp"
#include "auditline/registry.hpp"

namespace auditline {

// Tasks in todo whose dependencies are all done, restricted to the current
// phase, in registry declaration order. Deterministic.
inline std::vector<std::string> eligible_tasks(const AuditState& state,
                                               const Registry& registry) {
  std::vector<std::string> out;
  for (const auto& task : registry.tasks) {
    const TaskView* view = state.find_task(task.task_id);
    if (!view || view->status != TaskStatus::todo) continue;
    if (task.phase != state.current_phase) continue;
    bool ready = true;
    for (const auto& dep : task.depends_on) {
      const TaskView* dep_view = state.find_task(dep);
      if (!dep_view || dep_view->status != TaskStatus::done) {
        ready = false;
        break;
      }
    }
    if (ready) out.push_back(task.task_id);
  }
  return out;
}

struct RepoExcerpt {
  std::string path;
  std::string content;
  bool truncated = false;
};

struct DependencyArtifact {
  std::string path;
  std::string content;
};

struct RepairFeedback {
  RejectionCode code = RejectionCode::schema_violation;
  std::string detail;
  int attempt = 1;
};

// The purified input for one dispatch: no conversation history, a pure
// function of (state, registry, repository snapshot). Timestamps never enter
// the pack.
struct ContextPack {
  TaskRecord task;
  std::vector<CheckRecord> checks;
  std::vector<CheckResult> builtin_results;
  std::vector<RepoExcerpt> repo_excerpts;
  std::vector<DependencyArtifact> dependency_artifacts;
  TaskStatus prior_status = TaskStatus::todo;
  std::optional<RepairFeedback> repair;

  Action expected_action() const {
    return prior_status == TaskStatus::todo ? Action::claim : Action::complete;
  }
};

namespace context_detail {

inline void add_excerpts(const std::filesystem::path& root,
                         const std::string& path_prefix,
                         const std::vector<std::string>& globs,
                         std::uint64_t& remaining,
                         std::vector<RepoExcerpt>& out) {
  for (const auto& rel : list_repository_files(root)) {
    if (!glob_match_any(globs, rel)) continue;
    const auto content = checks_detail::read_file(root / rel);
    if (!content || content->find('\0') != std::string::npos) continue;
    RepoExcerpt excerpt;
    excerpt.path = path_prefix + rel;
    if (content->size() <= remaining) {
      excerpt.content = *content;
      remaining -= content->size();
    } else if (remaining > 0) {
      excerpt.content = content->substr(0, remaining);
      excerpt.content += "\n...[truncated]";
      excerpt.truncated = true;
      remaining = 0;
    } else {
      excerpt.content = "...[truncated]";
      excerpt.truncated = true;
    }
    out.push_back(std::move(excerpt));
    if (remaining == 0) break;
  }
}

}  // namespace context_detail

// Builds the dispatch pack for a task: the task record, its checks with the
// deterministic builtin results, repository excerpts selected by the task's
// rule globs inside the byte budget, the artifacts of every dependency, and
// the exact prior status the agent must restate.
inline ContextPack build_context(
    const std::string& task_id, const AuditState& state,
    const std::filesystem::path& repo_root,
    const std::filesystem::path& artifact_root, const Registry& registry,
    std::uint64_t byte_budget,
    const std::optional<std::filesystem::path>& docs_dir = std::nullopt) {
  const TaskRecord* task = registry.find_task(task_id);
  if (!task) {
    throw ContextError("task '" + task_id + "' is not in the roadmap");
  }
  const TaskView* view = state.find_task(task_id);
  if (!view) {
    throw ContextError("task '" + task_id + "' missing from projected state");
  }

  ContextPack pack;
  pack.task = *task;
  pack.prior_status = view->status;
  if (task->domain_id) {
    pack.checks = registry.checks_for_domain(*task->domain_id);
  }
  pack.builtin_results = run_builtin_checks_for_task(*task, registry, repo_root);

  // Excerpt selection: the task's own globs, else the globs of its builtin
  // rules, else the whole tree.
  std::vector<std::string> globs = task->context_globs;
  if (globs.empty()) {
    for (const auto& check : pack.checks) {
      if (check.builtin_rule) {
        for (const auto& g : check.builtin_rule->globs) globs.push_back(g);
      }
    }
  }
  if (globs.empty()) globs.push_back("**/*");

  std::uint64_t remaining = byte_budget;
  context_detail::add_excerpts(repo_root, "", globs, remaining,
                               pack.repo_excerpts);
  if (docs_dir) {
    context_detail::add_excerpts(*docs_dir, "@docs/", {"**/*"}, remaining,
                                 pack.repo_excerpts);
  }

  // Artifacts of every direct dependency; a done dependency without its
  // artifacts means the projection and registry disagree.
  for (const auto& dep : task->depends_on) {
    bool found = false;
    for (const auto& [path, ref] : state.artifacts) {
      if (ref.written_by_task != dep) continue;
      const auto content = checks_detail::read_file(artifact_root / path);
      if (!content) {
        throw ContextError("dependency artifact '" + path +
                           "' of task " + dep + " is missing on disk");
      }
      pack.dependency_artifacts.push_back(DependencyArtifact{path, *content});
      found = true;
    }
    if (!found) {
      throw ContextError("dependency task " + dep +
                         " left no artifacts to build context from");
    }
  }
  return pack;
}

}  // namespace auditline
