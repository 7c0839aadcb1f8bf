#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deceptkit/backends/classifier.hpp"
#include "deceptkit/common/label.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::backends {

struct ProbabilityPrediction {
  std::string sample_id;
  ClassProbs probs{};  // indexed by class_index(Label)
  BackendKind backend = BackendKind::kCharCnn;

  Label argmax() const { return probs[1] > probs[0] ? Label::kDeceptive : Label::kNonDeceptive; }
};

struct PredictionBatch {
  std::vector<ProbabilityPrediction> predictions;
  // Inputs cut to the backend's token limit.
  std::size_t truncated = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // training-mode predictions during the epoch
  std::optional<double> val_f1;
  std::optional<double> eval_train_accuracy;  // evaluation-mode, when requested
  double learning_rate = 0.0;
};

// Immutable result of train_backend or load_model.
class TrainedModel {
 public:
  TrainedModel(BackendConfig config, std::shared_ptr<Classifier> classifier, std::vector<EpochRecord> history,
               std::string corpus_fingerprint, int best_epoch);

  BackendKind kind() const { return config_.kind; }
  const BackendConfig& config() const { return config_; }
  const Classifier& classifier() const { return *classifier_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  const std::string& corpus_fingerprint() const { return fingerprint_; }
  int best_epoch() const { return best_epoch_; }

 private:
  BackendConfig config_;
  std::shared_ptr<Classifier> classifier_;
  std::vector<EpochRecord> history_;
  std::string fingerprint_;
  int best_epoch_;
};

// Order-independent digest of the ids, labels and texts of the data a model
// was trained on.
std::string corpus_fingerprint(std::span<const corpus::TextSample> train, std::span<const corpus::TextSample> val);

// Trains one backend. Each epoch shuffles the training set and updates once
// per batch with adaptive-moment steps. With a non-empty validation set the
// epoch with the best validation F1 is kept and training stops after
// `patience` epochs without improvement; with an empty validation set the
// final epoch is kept.
TrainedModel train_backend(const BackendConfig& config, std::span<const corpus::TextSample> train,
                           std::span<const corpus::TextSample> val);

// Order-preserving softmax probabilities, one per sample.
PredictionBatch predict_proba(const TrainedModel& model, std::span<const corpus::TextSample> samples);
PredictionBatch predict_proba(const Classifier& classifier, std::span<const corpus::TextSample> samples);

}  // namespace deceptkit::backends
