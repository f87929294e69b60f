#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "auditline/config.hpp"
#include "auditline/context.hpp"
#include "auditline/event_store.hpp"
#include "auditline/projection.hpp"
#include "auditline/protocol.hpp"
#include "auditline/report.hpp"

namespace auditline {

inline constexpr const char* kOrchestratorActor = "orchestrator";
inline constexpr const char* kOperatorActor = "operator";
inline constexpr const char* kEventsFile = "events.jsonl";

enum class RunStatus { verified_complete, complete_with_blocked, aborted };

inline std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::verified_complete: return "verified_complete";
    case RunStatus::complete_with_blocked: return "complete_with_blocked";
    case RunStatus::aborted: return "aborted";
  }
  return "aborted";
}

struct RunOutcome {
  RunStatus status = RunStatus::aborted;
  std::string state_hash;
  std::string message;
  int rejection_count = 0;
};

// The run loop and operator commands. Strictly serial: one dispatch, one
// validation, one append batch at a time; only this class performs effects.
class Orchestrator {
 public:
  explicit Orchestrator(std::filesystem::path run_dir)
      : run_dir_(std::move(run_dir)) {}

  // Creates the run directory, an empty log, and the run_initialized event
  // carrying the config snapshot and the registry digest. Refuses non-empty
  // directories; runs never silently reuse state.
  static void init_run(const RunConfig& config,
                       const std::filesystem::path& run_dir) {
    namespace fs = std::filesystem;
    config.check_paths();
    const Registry registry = load_registry(config.registry_path);
    if (fs::exists(run_dir) && !fs::is_empty(run_dir)) {
      throw RunError("run directory is not empty: " + run_dir.string());
    }
    fs::create_directories(run_dir);
    fs::create_directories(run_dir / "diagnostics");
    const auto clock = config.make_clock();
    EventStore store = EventStore::create(run_dir / kEventsFile, *clock);
    EventDraft draft;
    draft.kind = EventKind::run_initialized;
    draft.actor = kOrchestratorActor;
    draft.payload = {{"config", config.to_json()},
                     {"registry_sha256", registry.digest}};
    store.append(draft);
  }

  // The canonical execution cycle, repeated until every task is done or
  // explicitly blocked: parse the store, project state, select the next
  // eligible task, dispatch with purified context, validate, append accepted
  // events, rebuild views and verify by replay.
  RunOutcome run() {
    RunOutcome outcome;
    try {
      bootstrap();
    } catch (const Error& e) {
      outcome.status = RunStatus::aborted;
      outcome.message = e.what();
      return outcome;
    }

    try {
      for (int iteration = 0; iteration < kMaxIterations; ++iteration) {
        EventStore store = EventStore::open(log_path(), *clock_);
        AuditState state = project(store.events(), *registry_);

        // Recovery before termination: a dependency-blocked task whose
        // dependencies became done (an operator unblocked upstream) returns
        // to todo instead of counting as terminal.
        if (auto_unblock(store, state)) continue;

        if (all_terminal(state)) {
          return seal(store, outcome);
        }

        std::vector<std::string> eligible = eligible_tasks(state, *registry_);
        if (eligible.empty()) {
          // Operator recovery: an unblocked task of an earlier phase is
          // driven even though the phase pointer has moved on.
          if (const auto task_id = earlier_phase_todo(state)) {
            drive_task(store, *task_id, outcome);
            continue;
          }
          if (phase_tasks_terminal(state) &&
              state.current_phase < kPhaseCount) {
            EventDraft draft;
            draft.kind = EventKind::phase_advanced;
            draft.actor = kOrchestratorActor;
            draft.payload = {{"from", state.current_phase},
                             {"to", state.current_phase + 1}};
            store.append(draft);
            continue;
          }
          if (block_unsatisfiable(store, state)) continue;
          outcome.status = RunStatus::aborted;
          outcome.message = "no eligible task and no way to make progress";
          return outcome;
        }

        drive_task(store, eligible.front(), outcome);
      }
      outcome.status = RunStatus::aborted;
      outcome.message = "iteration limit reached";
      return outcome;
    } catch (const Error& e) {
      // Fail closed: the log keeps every admitted event up to the failure.
      outcome.status = RunStatus::aborted;
      outcome.message = e.what();
      return outcome;
    }
  }

  // Replay-based verification: chain, reprojection, recorded-hash match and
  // registry digest pinning.
  VerificationResult verify() {
    std::vector<Event> events;
    try {
      events = read_all(log_path());
    } catch (const ParseError& e) {
      VerificationResult result;
      result.chain.valid = false;
      result.chain.first_bad_sequence = e.line() == 0 ? 0 : e.line() - 1;
      result.detail = e.what();
      return result;
    } catch (const IntegrityError& e) {
      VerificationResult result;
      result.chain.valid = false;
      result.chain.first_bad_sequence = e.line() == 0 ? 0 : e.line() - 1;
      result.detail = e.what();
      return result;
    }
    VerificationResult preflight;
    preflight.chain = verify_chain(events);
    if (!preflight.chain.valid) {
      preflight.detail = "hash chain diverges at sequence " +
                         std::to_string(*preflight.chain.first_bad_sequence);
      return preflight;
    }
    RunConfig config = config_from_log(events);
    Registry registry = load_registry(config.registry_path);
    const std::string recorded_digest =
        events.front().payload.at("registry_sha256").get<std::string>();
    if (registry.digest != recorded_digest) {
      preflight.matches_recorded = MatchesRecorded::no;
      preflight.detail =
          "registry digest mismatch: the registry file changed since init";
      return preflight;
    }
    return replay_verify(log_path(), registry);
  }

  json status_json() {
    bootstrap();
    EventStore store = EventStore::open(log_path(), *clock_);
    const AuditState state = project(store.events(), *registry_);
    const auto counts = state.status_counts();
    json j;
    j["phase"] = state.current_phase;
    j["task_counts"] = json{{"todo", counts.at(TaskStatus::todo)},
                            {"in_progress", counts.at(TaskStatus::in_progress)},
                            {"done", counts.at(TaskStatus::done)},
                            {"blocked", counts.at(TaskStatus::blocked)}};
    json severity_counts = json::object();
    for (const auto& finding : state.findings) {
      if (finding.status != CheckStatus::fail || !finding.severity) continue;
      const std::string level = to_string(finding.severity->level);
      severity_counts[level] = severity_counts.value(level, 0) + 1;
    }
    j["finding_severity_counts"] = severity_counts;
    if (state.last_sequence) j["last_sequence"] = *state.last_sequence;
    j["state_hash"] = state.state_hash;
    return j;
  }

  std::string status_text() {
    const json j = status_json();
    std::string out;
    out += "phase: " + std::to_string(j.at("phase").get<int>()) + "\n";
    out += "tasks: todo " + j.at("task_counts").at("todo").dump() +
           ", in_progress " + j.at("task_counts").at("in_progress").dump() +
           ", done " + j.at("task_counts").at("done").dump() + ", blocked " +
           j.at("task_counts").at("blocked").dump() + "\n";
    out += "failed findings by severity: " +
           j.at("finding_severity_counts").dump() + "\n";
    if (j.contains("last_sequence")) {
      out += "last_sequence: " + j.at("last_sequence").dump() + "\n";
    }
    out += "state_hash: " + j.at("state_hash").get<std::string>() + "\n";
    return out;
  }

  // Re-renders the final reports from the log alone.
  ReportBundle rerender_reports() {
    bootstrap();
    EventStore store = EventStore::open(log_path(), *clock_);
    const AuditState state = project(store.events(), *registry_);
    const bool partial = !all_done(state);
    ReportBundle bundle =
        compile_reports(state, *registry_, config_->quick_fix_max_locations,
                        *clock_, partial);
    write_reports(bundle);
    return bundle;
  }

  // Operator-only recovery: returns a blocked task to todo via an explicit
  // event. Agents have no path to this transition.
  void unblock(const std::string& task_id, const std::string& reason) {
    if (reason.empty()) throw RunError("unblock requires a reason");
    bootstrap();
    EventStore store = EventStore::open(log_path(), *clock_);
    const AuditState state = project(store.events(), *registry_);
    const TaskView* view = state.find_task(task_id);
    if (!view) throw RunError("unknown task: " + task_id);
    if (view->status != TaskStatus::blocked) {
      throw RunError("task " + task_id + " is not blocked (status " +
                     to_string(view->status) + ")");
    }
    EventDraft draft;
    draft.kind = EventKind::task_unblocked;
    draft.actor = kOperatorActor;
    draft.payload = {{"task_id", task_id}, {"reason", reason}};
    store.append(draft);
  }

  std::filesystem::path log_path() const { return run_dir_ / kEventsFile; }
  const std::filesystem::path& run_dir() const { return run_dir_; }

 private:
  static constexpr int kMaxIterations = 100000;

  void bootstrap() {
    if (config_) return;
    const std::vector<Event> events = read_all(log_path());
    RunConfig config = config_from_log(events);
    config_ = std::make_unique<RunConfig>(std::move(config));
    clock_ = config_->make_clock();
    registry_ = std::make_unique<Registry>(load_registry(config_->registry_path));
    const std::string recorded_digest =
        events.front().payload.at("registry_sha256").get<std::string>();
    if (registry_->digest != recorded_digest) {
      throw RunError(
          "registry digest mismatch: the registry file changed since init");
    }
  }

  static RunConfig config_from_log(const std::vector<Event>& events) {
    if (events.empty() || events.front().kind != EventKind::run_initialized) {
      throw RunError("run is not initialized (no run_initialized event)");
    }
    return RunConfig::from_json(events.front().payload.at("config"));
  }

  static bool all_terminal(const AuditState& state) {
    for (const auto& [id, view] : state.tasks) {
      if (view.status != TaskStatus::done && view.status != TaskStatus::blocked) {
        return false;
      }
    }
    return true;
  }

  static bool all_done(const AuditState& state) {
    for (const auto& [id, view] : state.tasks) {
      if (view.status != TaskStatus::done) return false;
    }
    return true;
  }

  bool phase_tasks_terminal(const AuditState& state) const {
    for (const auto& task : registry_->tasks) {
      if (task.phase != state.current_phase) continue;
      const TaskView* view = state.find_task(task.task_id);
      if (view->status != TaskStatus::done &&
          view->status != TaskStatus::blocked) {
        return false;
      }
    }
    return true;
  }

  // A task the operator unblocked after the phase pointer moved past it.
  std::optional<std::string> earlier_phase_todo(const AuditState& state) const {
    for (const auto& task : registry_->tasks) {
      if (task.phase >= state.current_phase) continue;
      const TaskView* view = state.find_task(task.task_id);
      if (view->status != TaskStatus::todo) continue;
      bool ready = true;
      for (const auto& dep : task.depends_on) {
        if (state.find_task(dep)->status != TaskStatus::done) ready = false;
      }
      if (ready) return task.task_id;
    }
    return std::nullopt;
  }

  // Dependency-blocked dependents return to todo once their dependencies are
  // all done again (only possible after an operator unblock upstream).
  bool auto_unblock(EventStore& store, const AuditState& state) {
    for (const auto& task : registry_->tasks) {
      const TaskView* view = state.find_task(task.task_id);
      if (view->status != TaskStatus::blocked || !view->block_reason ||
          view->block_reason->rfind("dependency_blocked", 0) != 0) {
        continue;
      }
      bool ready = true;
      for (const auto& dep : task.depends_on) {
        if (state.find_task(dep)->status != TaskStatus::done) ready = false;
      }
      if (!ready) continue;
      EventDraft draft;
      draft.kind = EventKind::task_unblocked;
      draft.actor = kOrchestratorActor;
      draft.payload = {{"task_id", task.task_id},
                       {"reason", "dependencies satisfied"}};
      store.append(draft);
      return true;
    }
    return false;
  }

  // A todo task of the current phase whose dependency chain contains a
  // blocked task can never become eligible; block it explicitly so the run
  // can terminate with the gap declared.
  bool block_unsatisfiable(EventStore& store, const AuditState& state) {
    for (const auto& task : registry_->tasks) {
      if (task.phase != state.current_phase) continue;
      const TaskView* view = state.find_task(task.task_id);
      if (view->status != TaskStatus::todo) continue;
      for (const auto& dep : task.depends_on) {
        const TaskView* dep_view = state.find_task(dep);
        if (dep_view->status == TaskStatus::done) continue;
        EventDraft draft;
        draft.kind = EventKind::task_blocked;
        draft.actor = kOrchestratorActor;
        draft.payload = {{"task_id", task.task_id},
                         {"reason", "dependency_blocked: " + dep}};
        store.append(draft);
        return true;
      }
    }
    return false;
  }

  Agent& agent_for(const TaskRecord& task) {
    const AgentBinding* binding = config_->binding_for(task.kind);
    if (!binding) {
      throw ConfigError("no agent binding for task kind '" + task.kind + "'");
    }
    const std::string key = binding->kind == AgentKind::scripted
                                ? "scripted:" + binding->script_path
                                : "model:" + binding->endpoint + "|" +
                                      binding->model;
    auto it = agents_.find(key);
    if (it == agents_.end()) {
      std::unique_ptr<Agent> agent;
      if (binding->kind == AgentKind::scripted) {
        agent = std::make_unique<ScriptedAgent>(
            ScriptedAgent::from_file(binding->script_path));
      } else {
        agent = std::make_unique<ModelServiceAgent>(*binding);
      }
      it = agents_.emplace(key, std::move(agent)).first;
    }
    return *it->second;
  }

  void append_diagnostic(const char* file, json entry) {
    entry["timestamp"] = clock_->now_iso8601();
    std::ofstream out(run_dir_ / "diagnostics" / file,
                      std::ios::binary | std::ios::app);
    // Diagnostics are non-authoritative; replace undumpable bytes instead of
    // failing the run.
    out << entry.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }

  void block_administratively(EventStore& store, const std::string& task_id,
                              const std::string& reason) {
    EventDraft draft;
    draft.kind = EventKind::task_blocked;
    draft.actor = kOrchestratorActor;
    draft.payload = {{"task_id", task_id}, {"reason", reason}};
    store.append(draft);
  }

  // Drives one task through claim and then complete-or-block, with the
  // configured repair budget per stage. Every rejection is recorded in the
  // diagnostics file and never in the event log.
  void drive_task(EventStore& store, const std::string& task_id,
                  RunOutcome& outcome) {
    const TaskRecord* task = registry_->find_task(task_id);
    for (int stage = 0; stage < 2; ++stage) {
      AuditState state = project(store.events(), *registry_);
      const TaskView* view = state.find_task(task_id);
      if (view->status == TaskStatus::done ||
          view->status == TaskStatus::blocked) {
        return;
      }
      // stage 0 expects a claim from todo; a task already in_progress (an
      // interrupted run) resumes at the completion stage.
      if (stage == 0 && view->status != TaskStatus::todo) continue;

      std::optional<RepairFeedback> repair;
      int rejections_this_stage = 0;
      while (true) {
        ContextPack pack;
        try {
          pack = build_context(task_id, state, config_->repo_root, run_dir_,
                               *registry_, config_->context_byte_budget,
                               config_->docs_dir
                                   ? std::optional<std::filesystem::path>(
                                         *config_->docs_dir)
                                   : std::nullopt);
        } catch (const ContextError& e) {
          block_administratively(store, task_id,
                                 std::string("context_error: ") + e.what());
          return;
        }
        pack.repair = repair;

        AgentOutput output;
        try {
          output = agent_for(*task).dispatch(pack);
        } catch (const DispatchError& e) {
          block_administratively(store, task_id,
                                 std::string("dispatch_failed: ") + e.what());
          return;
        }
        append_diagnostic("agent_outputs.jsonl",
                          json{{"task_id", task_id},
                               {"expected_action",
                                to_string(pack.expected_action())},
                               {"attempt", output.attempt},
                               {"latency_ms", output.latency_ms},
                               {"raw_text", output.raw_text}});

        std::optional<Rejection> rejection;
        EventDrafts drafts;
        auto parsed = parse_intention(output.raw_text);
        if (std::holds_alternative<Rejection>(parsed)) {
          rejection = std::get<Rejection>(parsed);
        } else {
          const Intention& intention = std::get<Intention>(parsed);
          auto validated =
              validate(intention, state, *registry_,
                       boundary_for_task(*registry_, intention.task_id),
                       pack.builtin_results);
          if (std::holds_alternative<Rejection>(validated)) {
            rejection = std::get<Rejection>(validated);
          } else if (intention.task_id != task_id) {
            // Valid for some task, but not the one this dispatch is for:
            // the agent is acting on stale or foreign context. Nothing is
            // appended.
            rejection = Rejection{
                RejectionCode::status_mismatch,
                "intention targets task " + intention.task_id +
                    " but the dispatch was for task " + task_id};
          } else {
            drafts = std::get<EventDrafts>(validated);
            // Artifact bytes land on disk before their events; a partial
            // write leaves untracked files, never untracked events.
            for (const auto& update : intention.file_updates) {
              write_artifact(update.path, update.content);
            }
          }
        }

        if (rejection) {
          outcome.rejection_count += 1;
          rejections_this_stage += 1;
          append_diagnostic(
              "rejections.jsonl",
              json{{"task_id", task_id},
                   {"expected_action", to_string(pack.expected_action())},
                   {"attempt", rejections_this_stage},
                   {"code", to_string(rejection->code)},
                   {"detail", rejection->detail},
                   {"raw_text", output.raw_text}});
          if (rejections_this_stage > config_->max_repair_attempts) {
            block_administratively(store, task_id,
                                   "protocol_violations_exhausted");
            return;
          }
          repair = RepairFeedback{rejection->code, rejection->detail,
                                  rejections_this_stage + 1};
          continue;
        }

        bool blocked_by_agent = false;
        for (const auto& draft : drafts) {
          store.append(draft);
          if (draft.kind == EventKind::task_blocked) blocked_by_agent = true;
        }
        const ChainReport chain = verify_chain(store.events());
        if (!chain.valid) {
          throw IntegrityError(*chain.first_bad_sequence + 1,
                               "hash chain broke during append");
        }
        if (blocked_by_agent) return;
        break;  // stage admitted
      }
    }
  }

  void write_artifact(const std::string& path, const std::string& content) {
    const auto normalized = normalize_artifact_path(path);
    if (!normalized) {
      throw RunError("artifact path escaped validation: " + path);
    }
    const std::filesystem::path target = run_dir_ / *normalized;
    std::filesystem::create_directories(target.parent_path());
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) {
      throw StorageError("cannot write artifact: " + target.string());
    }
    out << content;
    out.flush();
    if (!out.good()) {
      throw StorageError("artifact write failed: " + target.string());
    }
  }

  // Terminal seal: record the verification event whose hash matches the
  // state it lands in, check the artifact chain, and render the final
  // reports.
  RunOutcome seal(EventStore& store, RunOutcome outcome) {
    AuditState state = project(store.events(), *registry_);
    AuditState sealed = state;
    sealed.last_sequence = store.size();
    const std::string final_hash = compute_state_hash(sealed);
    EventDraft draft;
    draft.kind = EventKind::verification_recorded;
    draft.actor = kOrchestratorActor;
    draft.payload = {{"state_hash", final_hash},
                     {"events_checked", store.size()}};
    store.append(draft);

    const AuditState final_state = project(store.events(), *registry_);
    if (final_state.state_hash != final_hash) {
      outcome.status = RunStatus::aborted;
      outcome.message = "sealed state hash failed to reproduce under replay";
      return outcome;
    }

    // Complete artifact chain: every indexed artifact exists on disk with
    // the content hash of its latest admitted write.
    std::map<std::string, std::string> latest_hash;
    for (const Event& event : store.events()) {
      if (event.kind != EventKind::artifact_written) continue;
      latest_hash[event.payload.at("path").get<std::string>()] =
          event.payload.at("content_sha256").get<std::string>();
    }
    for (const auto& [path, expected] : latest_hash) {
      const auto content = checks_detail::read_file(run_dir_ / path);
      if (!content || sha256_hex(*content) != expected) {
        outcome.status = RunStatus::aborted;
        outcome.message = "artifact chain incomplete: " + path;
        return outcome;
      }
    }

    const bool partial = !all_done(final_state);
    ReportBundle bundle =
        compile_reports(final_state, *registry_,
                        config_->quick_fix_max_locations, *clock_, partial);
    write_reports(bundle);

    outcome.status = partial ? RunStatus::complete_with_blocked
                             : RunStatus::verified_complete;
    outcome.state_hash = final_state.state_hash;
    outcome.message = partial ? "terminal with blocked tasks" : "verified";
    return outcome;
  }

  void write_reports(const ReportBundle& bundle) {
    const std::filesystem::path dir = run_dir_ / "reports" / "final";
    std::filesystem::create_directories(dir);
    {
      std::ofstream out(dir / "report.json", std::ios::binary | std::ios::trunc);
      out << canonical_dump(bundle.json_doc) << '\n';
    }
    {
      std::ofstream out(dir / "report.md", std::ios::binary | std::ios::trunc);
      out << bundle.markdown;
    }
  }

  std::filesystem::path run_dir_;
  std::unique_ptr<RunConfig> config_;
  std::unique_ptr<Registry> registry_;
  std::unique_ptr<Clock> clock_;
  std::map<std::string, std::unique_ptr<Agent>> agents_;
};

}  // namespace auditline
