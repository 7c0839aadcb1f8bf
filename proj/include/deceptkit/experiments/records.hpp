#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "deceptkit/analysis/metrics.hpp"
#include "deceptkit/common/label.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::experiments {

// One model's output on one test sample.
struct PredictionRecord {
  std::string sample_id;
  corpus::DatasetId dataset = corpus::DatasetId::kPheme;
  Label gold = Label::kNonDeceptive;
  ClassProbs probs{};
  Label predicted = Label::kNonDeceptive;

  bool operator==(const PredictionRecord&) const = default;
};

// CSV with full-precision probabilities, so metrics recomputed from the
// file equal the ones computed in memory.
void write_predictions(std::span<const PredictionRecord> records, const std::filesystem::path& csv);
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& csv);

std::vector<analysis::LabeledPrediction> labeled(std::span<const PredictionRecord> records);
std::map<std::string, Label> gold_of(std::span<const PredictionRecord> records);

// Records split by source dataset, in table order.
std::map<corpus::DatasetId, std::vector<PredictionRecord>> by_dataset(std::span<const PredictionRecord> records);

}  // namespace deceptkit::experiments
