#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "deceptkit/backends/config.hpp"
#include "deceptkit/ensemble/voting.hpp"

namespace deceptkit::experiments {

enum class Protocol { kGeneral, kNewEvent };

std::string_view to_string(Protocol protocol);
Protocol parse_protocol(std::string_view text);

inline constexpr int kPlanSchemaVersion = 1;

struct EnsembleSettings {
  bool enabled = true;
  ensemble::VoteMode mode = ensemble::VoteMode::kSoft;
  ensemble::VoteOptions options;
};

struct NewEventSettings {
  std::string event_tag = "covid";
  std::vector<int> fractions = {0, 20, 40, 60, 80, 100};  // percent of in-domain training data
  double validation_fraction = 0.2;                       // of the combined training data
};

// Declarative description of one protocol run.
struct ExperimentPlan {
  std::string name;
  Protocol protocol = Protocol::kGeneral;
  std::string corpus;   // unified corpus file
  std::string catalog;  // dataset catalog used for split policies
  std::vector<backends::BackendConfig> backends;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  // Grid search on the first seed's training data; the chosen points are
  // reused for every seed.
  bool cross_validate = false;
  std::size_t cv_folds = 3;
  EnsembleSettings ensemble;
  NewEventSettings new_event;
  bool save_models = false;

  // Rejects unknown keys, a wrong schema version and inconsistent settings.
  static ExperimentPlan from_json(const nlohmann::json& j);
  static ExperimentPlan load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Column label of a member model ("char_cnn", ...) or "ensemble".
  std::vector<std::string> model_names() const;
  bool has_ensemble() const { return ensemble.enabled && backends.size() >= 2; }
};

inline constexpr const char* kEnsembleModel = "ensemble";

}  // namespace deceptkit::experiments
