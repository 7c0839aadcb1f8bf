#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "deceptkit/common/error.hpp"
#include "deceptkit/experiments/plan.hpp"

namespace deceptkit::cli {

// A command was refused because of a run's state (unknown id, a completed
// run asked to run again, a report of an unfinished run).
class RunStateError : public Error {
 public:
  using Error::Error;
};

enum class RunStatus { kPending, kRunning, kComplete, kFailed };

std::string_view to_string(RunStatus status);
RunStatus parse_run_status(std::string_view text);

struct RunEntry {
  std::string id;  // "<UTC timestamp>-<short hash>"
  RunStatus status = RunStatus::kPending;
  nlohmann::json plan;  // resolved plan snapshot
  std::string corpus_sha256;
  std::string created_at;
  std::string updated_at;
  std::string error;  // last failure message
  std::filesystem::path dir;

  nlohmann::json to_json() const;
};

// Run directories under one root. Each run owns <root>/<id>/ with its entry
// in run.json, rewritten by atomic rename on every status change; every
// change is also appended to <root>/registry.jsonl.
class RunRegistry {
 public:
  explicit RunRegistry(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  // New pending run with a fresh id and an exclusive directory.
  RunEntry create(const experiments::ExperimentPlan& plan, const std::string& corpus_sha256);

  // Throws RunStateError for an unknown id.
  RunEntry get(const std::string& id) const;
  std::vector<RunEntry> list() const;  // by id

  // Allowed: pending -> running, running -> running (after a crash),
  // running -> complete | failed, failed -> running. A complete run never
  // changes again.
  void transition(RunEntry& entry, RunStatus to, const std::string& error = "");

 private:
  void save(const RunEntry& entry);

  std::filesystem::path root_;
};

}  // namespace deceptkit::cli
