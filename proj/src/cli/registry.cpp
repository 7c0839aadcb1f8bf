#include "deceptkit/cli/registry.hpp"

#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>

#include <fmt/format.h>

#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/hash.hpp"

namespace deceptkit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now(const char* format) {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

RunEntry entry_from_json(const json& j, const fs::path& dir) {
  RunEntry e;
  e.id = j.at("id").get<std::string>();
  e.status = parse_run_status(j.at("status").get<std::string>());
  e.plan = j.at("plan");
  e.corpus_sha256 = j.value("corpus_sha256", std::string());
  e.created_at = j.value("created_at", std::string());
  e.updated_at = j.value("updated_at", std::string());
  e.error = j.value("error", std::string());
  e.dir = dir;
  return e;
}

bool allowed(RunStatus from, RunStatus to) {
  switch (from) {
    case RunStatus::kPending: return to == RunStatus::kRunning || to == RunStatus::kFailed;
    case RunStatus::kRunning: return to != RunStatus::kPending;
    case RunStatus::kFailed: return to == RunStatus::kRunning;
    case RunStatus::kComplete: return false;
  }
  return false;
}

}  // namespace

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kPending: return "pending";
    case RunStatus::kRunning: return "running";
    case RunStatus::kComplete: return "complete";
    case RunStatus::kFailed: return "failed";
  }
  return "unknown";
}

RunStatus parse_run_status(std::string_view text) {
  for (RunStatus s : {RunStatus::kPending, RunStatus::kRunning, RunStatus::kComplete, RunStatus::kFailed}) {
    if (to_string(s) == text) return s;
  }
  throw FormatError("unknown run status '" + std::string(text) + "'");
}

json RunEntry::to_json() const {
  return {{"id", id},
          {"status", to_string(status)},
          {"plan", plan},
          {"corpus_sha256", corpus_sha256},
          {"created_at", created_at},
          {"updated_at", updated_at},
          {"error", error}};
}

RunRegistry::RunRegistry(fs::path root) : root_(std::move(root)) {}

RunEntry RunRegistry::create(const experiments::ExperimentPlan& plan, const std::string& corpus_sha256) {
  fs::create_directories(root_);
  const std::string snapshot = plan.to_json().dump();
  for (int attempt = 0;; ++attempt) {
    const auto now = std::chrono::system_clock::now().time_since_epoch().count();
    const std::string salt = fmt::format("{}|{}|{}|{}", snapshot, now, ::getpid(), attempt);
    RunEntry e;
    e.id = utc_now("%Y%m%dT%H%M%SZ") + "-" + sha256_hex(salt).substr(0, 8);
    e.dir = root_ / e.id;
    if (!fs::create_directory(e.dir)) {
      if (attempt >= 16) throw Error("cannot allocate a run directory under " + root_.string());
      continue;
    }
    e.plan = plan.to_json();
    e.corpus_sha256 = corpus_sha256;
    e.created_at = e.updated_at = utc_now("%Y-%m-%dT%H:%M:%SZ");
    save(e);
    return e;
  }
}

RunEntry RunRegistry::get(const std::string& id) const {
  const fs::path file = root_ / id / "run.json";
  if (id.empty() || id.find('/') != std::string::npos || !fs::exists(file)) {
    throw RunStateError("no run '" + id + "' under " + root_.string());
  }
  try {
    return entry_from_json(json::parse(read_file(file)), root_ / id);
  } catch (const json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
}

std::vector<RunEntry> RunRegistry::list() const {
  std::vector<RunEntry> out;
  if (!fs::exists(root_)) return out;
  for (const auto& d : fs::directory_iterator(root_)) {
    if (d.is_directory() && fs::exists(d.path() / "run.json")) out.push_back(get(d.path().filename().string()));
  }
  std::sort(out.begin(), out.end(), [](const RunEntry& a, const RunEntry& b) { return a.id < b.id; });
  return out;
}

void RunRegistry::transition(RunEntry& entry, RunStatus to, const std::string& error) {
  const RunEntry current = get(entry.id);
  if (current.status == RunStatus::kComplete) {
    throw RunStateError("run " + entry.id + " is complete and immutable; start a new run instead");
  }
  if (!allowed(current.status, to)) {
    throw RunStateError(fmt::format("run {} cannot go from {} to {}", entry.id, to_string(current.status),
                                    to_string(to)));
  }
  entry.status = to;
  entry.error = error;
  entry.updated_at = utc_now("%Y-%m-%dT%H:%M:%SZ");
  save(entry);
}

void RunRegistry::save(const RunEntry& entry) {
  write_file_atomic(entry.dir / "run.json", entry.to_json().dump(2) + "\n");
  std::ofstream log(root_ / "registry.jsonl", std::ios::app);
  log << json{{"id", entry.id}, {"status", to_string(entry.status)}, {"at", entry.updated_at}}.dump() << '\n';
}

}  // namespace deceptkit::cli
