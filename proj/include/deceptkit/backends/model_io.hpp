#pragma once

#include <filesystem>
#include <optional>

#include "deceptkit/backends/model.hpp"

namespace deceptkit::backends {

inline constexpr int kModelFormatVersion = 1;

// Per-epoch training history as CSV text.
std::string history_csv(const std::vector<EpochRecord>& history);

// Writes a model directory: model.json (configuration, architecture,
// fingerprint, weight checksum), weights.safetensors, history.csv and, for
// encoder backends, vocab.txt. An existing directory is replaced.
void export_model(const TrainedModel& model, const std::filesystem::path& dir);

// Loads a model directory. When `expected` is given the stored backend kind
// must match it. Missing, extra or mis-shaped tensors are format errors.
TrainedModel load_model(const std::filesystem::path& dir, std::optional<BackendKind> expected = std::nullopt);

}  // namespace deceptkit::backends
