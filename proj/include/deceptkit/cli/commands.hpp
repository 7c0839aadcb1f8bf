#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "deceptkit/cli/registry.hpp"

namespace deceptkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Exit code for an exception escaping a command: 1 for invalid input,
// configuration or run state, 2 for failures while doing the work.
int exit_code_for(const std::exception& e);

struct IngestOptions {
  std::filesystem::path catalog = "config/datasets.json";
  std::filesystem::path raw_root = "data/raw";
  std::filesystem::path out = "data/corpus.jsonl";
  // Generate the synthetic mini corpus under <out dir>/fixture_raw and
  // ingest it with the real recipes instead of reading raw_root.
  bool fixture = false;
  bool allow_warnings = false;
  std::uint64_t seed = 0;  // split seed for the leakage check
};

// Ingests every dataset, validates the result and writes the corpus, its
// manifest and <out>.report.txt. Returns 1 without writing the corpus when
// validation flags anything, unless allow_warnings is set. Missing raw files
// are listed together with each dataset's acquisition note.
int cmd_ingest(const IngestOptions& options, std::ostream& out);

struct RunCommandOptions {
  std::filesystem::path plan;
  std::filesystem::path runs_root = "runs";
  std::optional<std::uint64_t> seed;  // replaces the plan's seeds
  std::vector<std::string> backends;  // keeps only these plan backends
  std::vector<int> fractions;         // replaces the new-event fractions
  std::string resume;                 // id of an unfinished run to continue
};

// Executes a plan as a new registry entry (pending -> running -> complete,
// or failed) and returns its id. Resuming reuses the entry's plan snapshot
// and completed training units; a complete run is refused.
std::string cmd_run(const RunCommandOptions& options, std::ostream& out);

// Markdown summary of a complete run.
std::string cmd_report(const std::filesystem::path& runs_root, const std::string& run_id);

struct AnalyzeOptions {
  std::filesystem::path runs_root = "runs";
  std::string run_id;
  std::string model;                  // default: the ensemble when present, else the first backend
  std::optional<std::uint64_t> seed;  // default: the plan's first seed
  std::optional<int> fraction;        // new-event runs; default: the last fraction
  std::vector<std::string> fpr_keywords;
  std::string errors;  // "false_positive" or "false_negative"
  std::size_t k = 10;
  bool embeddings = false;
  double perplexity = 30.0;
  std::string attention;  // probe text
};

// Writes the requested analyses under <run>/analysis/ and returns the
// written paths.
std::vector<std::filesystem::path> cmd_analyze(const AnalyzeOptions& options, std::ostream& out);

// Saved model directories of complete runs, one line each.
void cmd_models_list(const std::filesystem::path& runs_root, std::ostream& out);

// Copies a saved model out of a run after verifying it loads.
void cmd_models_export(const std::filesystem::path& runs_root, const std::string& run_id, const std::string& backend,
                       std::optional<std::uint64_t> seed, std::optional<int> fraction,
                       const std::filesystem::path& dest, std::ostream& out);

// Loads a model directory, prints its summary and, for each text, the
// class probabilities.
void cmd_models_load(const std::filesystem::path& dir, const std::vector<std::string>& texts, std::ostream& out);

}  // namespace deceptkit::cli
