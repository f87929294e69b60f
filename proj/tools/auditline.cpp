// auditline — event-sourced security audit runs: init, run, verify, status,
// report, unblock.
//
// Exit codes: 0 success/verified, 1 usage error, 2 verification failure,
// 3 aborted run.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "auditline/orchestrator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitVerificationFailure = 2;
constexpr int kExitAborted = 3;

int cmd_init(const std::string& config_path, const std::string& run_dir) {
  const auditline::RunConfig config = auditline::RunConfig::load(config_path);
  auditline::Orchestrator::init_run(config, run_dir);
  std::cout << "initialized run at " << run_dir << "\n";
  return kExitOk;
}

int cmd_run(const std::string& run_dir) {
  auditline::Orchestrator orchestrator{run_dir};
  const auditline::RunOutcome outcome = orchestrator.run();
  std::cout << "status: " << auditline::to_string(outcome.status) << "\n";
  if (!outcome.state_hash.empty()) {
    std::cout << "state_hash: " << outcome.state_hash << "\n";
  }
  std::cout << "rejections: " << outcome.rejection_count << "\n";
  if (!outcome.message.empty()) {
    std::cout << "detail: " << outcome.message << "\n";
  }
  return outcome.status == auditline::RunStatus::aborted ? kExitAborted
                                                         : kExitOk;
}

int cmd_verify(const std::string& run_dir) {
  auditline::Orchestrator orchestrator{run_dir};
  const auditline::VerificationResult result = orchestrator.verify();
  std::cout << "chain_valid: " << (result.chain.valid ? "true" : "false")
            << "\n";
  std::cout << "events_checked: " << result.chain.events_checked << "\n";
  if (result.chain.first_bad_sequence) {
    std::cout << "first_bad_sequence: " << *result.chain.first_bad_sequence
              << "\n";
  }
  if (!result.state_hash.empty()) {
    std::cout << "state_hash: " << result.state_hash << "\n";
  }
  std::cout << "matches_recorded: " << auditline::to_string(result.matches_recorded)
            << "\n";
  if (!result.detail.empty()) {
    std::cout << "detail: " << result.detail << "\n";
  }
  return result.ok() ? kExitOk : kExitVerificationFailure;
}

int cmd_status(const std::string& run_dir, bool as_json) {
  auditline::Orchestrator orchestrator{run_dir};
  if (as_json) {
    std::cout << auditline::canonical_dump(orchestrator.status_json()) << "\n";
  } else {
    std::cout << orchestrator.status_text();
  }
  return kExitOk;
}

int cmd_report(const std::string& run_dir) {
  auditline::Orchestrator orchestrator{run_dir};
  orchestrator.rerender_reports();
  std::cout << "wrote " << run_dir << "/reports/final/report.md and report.json"
            << "\n";
  return kExitOk;
}

int cmd_unblock(const std::string& run_dir, const std::string& task_id,
                const std::string& reason) {
  auditline::Orchestrator orchestrator{run_dir};
  orchestrator.unblock(task_id, reason);
  std::cout << "task " << task_id << " returned to todo\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"governed, replay-verifiable security audit runs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  std::string task_id;
  std::string reason;
  bool as_json = false;

  auto* init = app.add_subcommand("init", "initialize a run directory");
  init->add_option("--config", config_path, "run configuration file")
      ->required();
  init->add_option("run_dir", run_dir, "run directory")->required();

  auto* run = app.add_subcommand("run", "execute the audit run loop");
  run->add_option("run_dir", run_dir, "run directory")->required();

  auto* verify = app.add_subcommand("verify", "replay-verify a run");
  verify->add_option("run_dir", run_dir, "run directory")->required();

  auto* status = app.add_subcommand("status", "summarize projected state");
  status->add_flag("--json", as_json, "emit canonical JSON");
  status->add_option("run_dir", run_dir, "run directory")->required();

  auto* report = app.add_subcommand("report", "re-render reports from the log");
  report->add_option("run_dir", run_dir, "run directory")->required();

  auto* unblock = app.add_subcommand("unblock", "return a blocked task to todo");
  unblock->add_option("run_dir", run_dir, "run directory")->required();
  unblock->add_option("task_id", task_id, "task to unblock")->required();
  unblock->add_option("--reason", reason, "operator reason")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (init->parsed()) return cmd_init(config_path, run_dir);
    if (run->parsed()) return cmd_run(run_dir);
    if (verify->parsed()) return cmd_verify(run_dir);
    if (status->parsed()) return cmd_status(run_dir, as_json);
    if (report->parsed()) return cmd_report(run_dir);
    if (unblock->parsed()) return cmd_unblock(run_dir, task_id, reason);
  } catch (const auditline::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerificationFailure;
  } catch (const auditline::IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitVerificationFailure;
  } catch (const auditline::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
