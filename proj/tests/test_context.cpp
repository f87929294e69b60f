#include <catch2/catch_amalgamated.hpp>

#include "auditline/context.hpp"
#include "support/runfix.hpp"
#include "support/temp_dir.hpp"

using namespace auditline;
using testsupport::ScopedTempDir;

namespace {

const Registry& reg() {
  static Registry r = load_registry(testsupport::data_registry_path());
  return r;
}

void mark(AuditState& state, const std::string& task_id, TaskStatus status,
          const char* owner = "agent-a") {
  TaskView& view = state.tasks.at(task_id);
  view.status = status;
  if (status != TaskStatus::todo) view.owner = owner;
}

}  // namespace

TEST_CASE("initial eligibility is exactly the no-dependency phase-1 tasks",
          "[context]") {
  const AuditState state = project({}, reg());
  std::vector<std::string> expected;
  for (const auto& task : reg().tasks) {
    if (task.phase == 1 && task.depends_on.empty()) {
      expected.push_back(task.task_id);
    }
  }
  CHECK(eligible_tasks(state, reg()) == expected);
}

TEST_CASE("phase 2 exposes the 16 domain tasks once phase 1 is done",
          "[context]") {
  AuditState state = project({}, reg());
  mark(state, "T01", TaskStatus::done);
  mark(state, "T02", TaskStatus::done);
  mark(state, "T03", TaskStatus::done);
  state.current_phase = 2;
  const auto eligible = eligible_tasks(state, reg());
  CHECK(eligible.size() == 16);
  for (const auto& id : eligible) {
    CHECK(reg().find_task(id)->phase == 2);
  }
}

TEST_CASE("a blocked dependency keeps dependents ineligible", "[context]") {
  AuditState state = project({}, reg());
  mark(state, "T01", TaskStatus::done);
  mark(state, "T02", TaskStatus::blocked);
  const auto eligible = eligible_tasks(state, reg());
  for (const auto& id : eligible) {
    CHECK(id != "T03");  // depends on blocked T02
  }
}

TEST_CASE("pack carries the restated prior status and the task checks",
          "[context]") {
  ScopedTempDir artifacts;
  const AuditState state = project({}, reg());
  const ContextPack pack =
      build_context("T01", state, testsupport::fixture_repo_path(),
                    artifacts.path(), reg(), 65536);
  CHECK(pack.task.task_id == "T01");
  CHECK(pack.prior_status == TaskStatus::todo);
  CHECK(pack.expected_action() == Action::claim);
  CHECK(pack.checks.empty());  // recon tasks have no domain checks
  CHECK_FALSE(pack.repo_excerpts.empty());
}

TEST_CASE("domain packs precompute builtin results", "[context]") {
  ScopedTempDir artifacts;
  AuditState state = project({}, reg());
  std::uint64_t seq = 0;
  for (const char* dep : {"T01", "T02", "T03"}) {
    mark(state, dep, TaskStatus::done);
    const std::string rel = std::string("reports/phase1/") + dep + ".md";
    testsupport::write_text(artifacts.path() / rel, "done\n");
    state.artifacts[rel] = ArtifactRef{dep, seq++};
  }
  mark(state, "T04", TaskStatus::in_progress);
  const ContextPack pack =
      build_context("T04", state, testsupport::fixture_repo_path(),
                    artifacts.path(), reg(), 65536);
  CHECK(pack.checks.size() == 6);  // secrets_configuration carries six checks
  REQUIRE(pack.builtin_results.size() == 3);
  CHECK(pack.builtin_results[0].check_id == "SEC-01");
  CHECK(pack.builtin_results[0].status == CheckStatus::fail);
}

TEST_CASE("empty repository still yields a dispatchable pack", "[context]") {
  ScopedTempDir repo;
  ScopedTempDir artifacts;
  const AuditState state = project({}, reg());
  const ContextPack pack = build_context("T01", state, repo.path(),
                                         artifacts.path(), reg(), 65536);
  CHECK(pack.repo_excerpts.empty());
  const std::string prompt = render_prompt(pack);
  CHECK(prompt.find("(no repository excerpts)") != std::string::npos);
}

TEST_CASE("byte budget truncates with explicit markers", "[context]") {
  ScopedTempDir repo;
  ScopedTempDir artifacts;
  std::string big(8192, 'x');
  testsupport::write_text(repo.path() / "big1.py", big);
  testsupport::write_text(repo.path() / "big2.py", big);
  const AuditState state = project({}, reg());
  const ContextPack pack =
      build_context("T01", state, repo.path(), artifacts.path(), reg(), 1024);

  std::uint64_t content_bytes = 0;
  bool any_truncated = false;
  for (const auto& excerpt : pack.repo_excerpts) {
    content_bytes += excerpt.content.size();
    any_truncated = any_truncated || excerpt.truncated;
    if (excerpt.truncated) {
      CHECK(excerpt.content.find("[truncated]") != std::string::npos);
    }
  }
  CHECK(any_truncated);
  // budget + fixed per-file marker overhead
  CHECK(content_bytes <= 1024 + 32 * pack.repo_excerpts.size());
}

TEST_CASE("dependency artifacts of all direct dependencies are included",
          "[context]") {
  ScopedTempDir artifacts;
  AuditState state = project({}, reg());

  // Pretend phases 1-2 completed, each leaving one artifact on disk.
  const TaskRecord* inventory_task = reg().find_task("T20");
  REQUIRE(inventory_task->depends_on.size() == 16);
  std::uint64_t seq = 0;
  for (const auto& dep : inventory_task->depends_on) {
    mark(state, dep, TaskStatus::done);
    const std::string rel =
        reg().find_task(dep)->boundary.front() + "report.md";
    testsupport::write_text(artifacts.path() / rel, "# " + dep + "\n");
    state.artifacts[rel] = ArtifactRef{dep, seq++};
  }
  state.current_phase = 3;

  const ContextPack pack =
      build_context("T20", state, testsupport::fixture_repo_path(),
                    artifacts.path(), reg(), 65536);
  CHECK(pack.dependency_artifacts.size() == 16);
}

TEST_CASE("a done dependency without artifacts is a context error",
          "[context]") {
  ScopedTempDir artifacts;
  AuditState state = project({}, reg());
  mark(state, "T01", TaskStatus::done);
  // T02 depends on T01, which indexed no artifact.
  CHECK_THROWS_AS(build_context("T02", state, testsupport::fixture_repo_path(),
                                artifacts.path(), reg(), 65536),
                  ContextError);
}

TEST_CASE("an indexed artifact missing on disk is a context error",
          "[context]") {
  ScopedTempDir artifacts;
  AuditState state = project({}, reg());
  mark(state, "T01", TaskStatus::done);
  state.artifacts["reports/phase1/report.md"] = ArtifactRef{"T01", 0};
  CHECK_THROWS_AS(build_context("T02", state, testsupport::fixture_repo_path(),
                                artifacts.path(), reg(), 65536),
                  ContextError);
}

TEST_CASE("packs are deterministic given state and snapshot", "[context]") {
  ScopedTempDir artifacts;
  const AuditState state = project({}, reg());
  const ContextPack a =
      build_context("T01", state, testsupport::fixture_repo_path(),
                    artifacts.path(), reg(), 4096);
  const ContextPack b =
      build_context("T01", state, testsupport::fixture_repo_path(),
                    artifacts.path(), reg(), 4096);
  CHECK(render_prompt(a) == render_prompt(b));
}
