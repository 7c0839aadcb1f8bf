#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "deceptkit/common/label.hpp"

namespace deceptkit::analysis {

// Confusion counts with deceptive as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  void add(Label predicted, Label gold);
  ConfusionCounts& operator+=(const ConfusionCounts& other);
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricsReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
  std::size_t support_deceptive = 0;
  std::size_t support_non_deceptive = 0;
  // No gold positives and no predicted positives: F1 is reported as 0.
  bool f1_degenerate = false;
  // No gold negatives: FPR is reported as 0.
  bool fpr_undefined = false;

  nlohmann::ordered_json to_json() const;
};

// accuracy = (TP+TN)/N, f1 = 2TP/(2TP+FP+FN), fpr = FP/(FP+TN).
MetricsReport metrics_from_counts(const ConfusionCounts& counts);

struct LabeledPrediction {
  std::string sample_id;
  Label predicted = Label::kNonDeceptive;
};

// Predictions and gold labels are matched by sample id; every gold id must
// have exactly one prediction and vice versa.
MetricsReport compute_metrics(std::span<const LabeledPrediction> predictions, const std::map<std::string, Label>& gold);

// Positional variant for parallel label vectors.
MetricsReport compute_metrics(std::span<const Label> predicted, std::span<const Label> gold);

struct AggregateReport {
  MetricsReport pooled;           // micro metrics over all predictions
  double weighted_accuracy = 0.0; // test-size-weighted mean of per-set metrics
  double weighted_f1 = 0.0;
};

// Pools prediction sets that must be disjoint by sample id.
AggregateReport aggregate_total(const std::vector<std::vector<LabeledPrediction>>& sets,
                                const std::map<std::string, Label>& gold);

}  // namespace deceptkit::analysis
