#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "auditline/errors.hpp"
#include "auditline/finding.hpp"
#include "auditline/registry.hpp"

namespace auditline {

// Glob over '/'-separated relative paths: '*' and '?' stay inside a segment,
// "**" crosses segments.
inline bool glob_match(std::string_view pattern, std::string_view path) {
  if (pattern.empty()) return path.empty();
  if (pattern.rfind("**", 0) == 0) {
    std::string_view rest = pattern.substr(2);
    if (!rest.empty() && rest.front() == '/') {
      // "**/x" also matches "x" at the top level
      if (glob_match(rest.substr(1), path)) return true;
    }
    for (std::size_t i = 0; i <= path.size(); ++i) {
      if (glob_match(rest, path.substr(i))) return true;
    }
    return false;
  }
  const char p = pattern.front();
  if (p == '*') {
    for (std::size_t i = 0; i <= path.size(); ++i) {
      if (i > 0 && path[i - 1] == '/') break;
      if (glob_match(pattern.substr(1), path.substr(i))) return true;
    }
    return false;
  }
  if (path.empty()) return false;
  if (p == '?') {
    return path.front() != '/' && glob_match(pattern.substr(1), path.substr(1));
  }
  return p == path.front() && glob_match(pattern.substr(1), path.substr(1));
}

inline bool glob_match_any(const std::vector<std::string>& patterns,
                           std::string_view path) {
  return std::any_of(patterns.begin(), patterns.end(),
                     [&](const std::string& p) { return glob_match(p, path); });
}

// Regular files under root as sorted '/'-separated relative paths. VCS
// internals are not part of the audited snapshot.
inline std::vector<std::string> list_repository_files(
    const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (!fs::exists(root)) return files;
  for (auto it = fs::recursive_directory_iterator(
           root, fs::directory_options::skip_permission_denied);
       it != fs::recursive_directory_iterator(); ++it) {
    const std::string rel = fs::relative(it->path(), root).generic_string();
    if (rel.rfind(".git/", 0) == 0 || rel == ".git") {
      if (it->is_directory()) it.disable_recursion_pending();
      continue;
    }
    std::error_code ec;
    // Symlinks are listed as-is; a dangling one fails at read time and is
    // reported, not skipped.
    if (it->is_symlink(ec) && !ec) {
      files.push_back(rel);
      continue;
    }
    ec.clear();
    if (it->is_regular_file(ec) && !ec) files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  return files;
}

namespace checks_detail {

inline constexpr std::size_t kMaxEvidence = 20;
inline constexpr std::size_t kMaxExcerpt = 160;

// JSON-safe, single-line evidence excerpt.
inline std::string sanitize_excerpt(std::string_view line) {
  std::string out;
  std::size_t begin = line.find_first_not_of(" \t");
  std::size_t end = line.find_last_not_of(" \t\r");
  if (begin == std::string_view::npos) return out;
  line = line.substr(begin, end - begin + 1);
  for (const char c : line) {
    const auto byte = static_cast<unsigned char>(c);
    out += (byte < 0x20 || byte > 0x7e) ? '?' : c;
    if (out.size() >= kMaxExcerpt) break;
  }
  return out;
}

inline std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) return std::nullopt;
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) return std::nullopt;
  return content;
}

// Scans one file line by line; appends (path, 1-based line, excerpt) hits.
inline void scan_file(const std::string& rel_path, const std::string& content,
                      const std::regex& re, std::vector<Evidence>& hits) {
  if (content.find('\0') != std::string::npos) return;  // binary
  std::size_t pos = 0;
  std::uint64_t line_no = 0;
  while (pos <= content.size()) {
    ++line_no;
    const std::size_t eol = std::min(content.find('\n', pos), content.size());
    const std::string line = content.substr(pos, eol - pos);
    if (std::regex_search(line, re)) {
      hits.push_back(Evidence{rel_path, line_no, sanitize_excerpt(line)});
      if (hits.size() >= kMaxEvidence) return;
    }
    if (eol >= content.size()) break;
    pos = eol + 1;
  }
}

}  // namespace checks_detail

// Executes a builtin rule spec against the repository snapshot. Deterministic:
// sorted file order, capped evidence, default severity and remediation from
// the registry record. Unreadable inputs surface as not_applicable with an
// explanation rather than as silence.
inline CheckResult run_builtin_check(const CheckRecord& check,
                                     const std::filesystem::path& repo_root) {
  if (check.mode != CheckMode::builtin || !check.builtin_rule) {
    throw Error("check " + check.check_id + " has no builtin rule");
  }
  const BuiltinRule& rule = *check.builtin_rule;

  CheckResult result;
  result.check_id = check.check_id;

  auto flags = std::regex::ECMAScript;
  if (rule.case_insensitive) flags |= std::regex::icase;
  std::regex re;
  try {
    re = std::regex(rule.pattern, flags);
  } catch (const std::regex_error& e) {
    throw RegistryError("check " + check.check_id + ": bad builtin pattern: " +
                        e.what());
  }

  const std::vector<std::string> files = list_repository_files(repo_root);
  std::vector<std::string> scanned;
  for (const auto& rel : files) {
    if (glob_match_any(rule.globs, rel)) scanned.push_back(rel);
  }

  std::vector<Evidence> hits;
  for (const auto& rel : scanned) {
    const auto content = checks_detail::read_file(repo_root / rel);
    if (!content) {
      result.status = CheckStatus::not_applicable;
      result.explanation = "evidence gathering failed: cannot read '" + rel +
                           "'; check skipped rather than silently passed";
      result.evidence.clear();
      return result;
    }
    checks_detail::scan_file(rel, *content, re, hits);
    if (hits.size() >= checks_detail::kMaxEvidence) break;
  }

  if (rule.type == "pattern") {
    if (scanned.empty()) {
      result.status = CheckStatus::not_applicable;
      result.explanation = "no repository files match the rule globs";
      return result;
    }
    if (hits.empty()) {
      result.status = CheckStatus::pass;
      result.explanation = "no matches across " +
                           std::to_string(scanned.size()) + " scanned file(s)";
      return result;
    }
    result.status = CheckStatus::fail;
    result.evidence = std::move(hits);
    result.severity = check.default_severity;
    result.explanation = std::to_string(result.evidence.size()) +
                         " match(es) for the rule pattern";
    result.remediation = check.remediation;
    return result;
  }

  // presence_required: the trigger matches demand at least one file matching
  // required_globs.
  if (hits.empty()) {
    result.status = CheckStatus::not_applicable;
    result.explanation = "rule trigger not present in the repository";
    return result;
  }
  const bool satisfied = std::any_of(files.begin(), files.end(),
                                     [&](const std::string& rel) {
                                       return glob_match_any(rule.required_globs,
                                                             rel);
                                     });
  if (satisfied) {
    result.status = CheckStatus::pass;
    result.explanation = "required files are present";
    return result;
  }
  result.status = CheckStatus::fail;
  result.evidence = std::move(hits);
  result.severity = check.default_severity;
  result.explanation = "trigger present but no file matches the required globs";
  result.remediation = check.remediation;
  return result;
}

// All builtin results for one task, in registry declaration order.
inline std::vector<CheckResult> run_builtin_checks_for_task(
    const TaskRecord& task, const Registry& registry,
    const std::filesystem::path& repo_root) {
  std::vector<CheckResult> results;
  if (!task.domain_id) return results;
  for (const auto& check : registry.checks_for_domain(*task.domain_id)) {
    if (check.mode == CheckMode::builtin) {
      results.push_back(run_builtin_check(check, repo_root));
    }
  }
  return results;
}

}  // namespace auditline
