#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "deceptkit/analysis/metrics.hpp"
#include "deceptkit/corpus/dataset_spec.hpp"
#include "deceptkit/corpus/types.hpp"
#include "deceptkit/experiments/plan.hpp"
#include "deceptkit/experiments/records.hpp"

namespace deceptkit::experiments {

// Called after each training unit (one backend on one seed, or one backend
// on one seed and fraction) has persisted its predictions. Throwing from it
// aborts the run; completed units are reused when the run is resumed.
using UnitCallback = std::function<void(const std::string& unit)>;

struct RunOptions {
  UnitCallback on_unit_done;
};

struct MeanMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;
};

struct ModelMetrics {
  std::map<corpus::DatasetId, analysis::MetricsReport> per_dataset;
  analysis::AggregateReport total;
};

struct SeedMetrics {
  std::uint64_t seed = 0;
  std::map<std::string, ModelMetrics> models;  // keyed by model name
};

struct GeneralResult {
  std::vector<SeedMetrics> seeds;
  // model -> dataset key -> mean over seeds. The pooled total is under
  // "total" and the test-size-weighted total under "total_weighted".
  std::map<std::string, std::map<std::string, MeanMetrics>> mean;
  std::map<std::string, nlohmann::json> chosen_hyperparams;  // by backend, when cross-validated
  std::size_t ensemble_ties = 0;
  std::size_t truncated_inputs = 0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

// Trains each backend once per seed on the union of all training splits,
// validates on the union of validation splits and evaluates on every
// dataset's test split. Writes into `run_dir`:
//   plan.json, result.json, metrics.csv, metrics_mean.csv,
//   seed_<s>/splits.csv, seed_<s>/predictions/<model>.csv,
//   seed_<s>/history/<backend>.csv, seed_<s>/ensemble.jsonl,
//   seed_<s>/models/<backend>/ (with save_models), cv/<backend>.{csv,json}.
// Existing prediction files are treated as completed units.
GeneralResult run_general(const ExperimentPlan& plan, const corpus::Corpus& corpus,
                          const corpus::DatasetCatalog& catalog, const std::filesystem::path& run_dir,
                          const RunOptions& options = {});

struct CurvePoint {
  std::uint64_t seed = 0;
  int fraction = 0;
  std::string model;
  analysis::MetricsReport metrics;
  std::size_t train_size = 0;
  std::size_t in_domain_train = 0;  // in-domain samples among train and val
  std::size_t val_size = 0;
  std::size_t test_size = 0;
};

struct Improvement {
  std::string model;
  double f1_at_zero = 0.0;
  double f1_at_next = 0.0;
  double delta = 0.0;  // F1 points
};

struct NewEventResult {
  std::vector<CurvePoint> points;
  std::map<std::string, std::map<int, MeanMetrics>> mean;  // model -> fraction -> mean over seeds
  // From 0% to the first nonzero fraction; empty unless both are planned.
  std::vector<Improvement> improvements;
  double mean_improvement = 0.0;
  std::map<std::uint64_t, std::string> test_digest;  // per seed, identical across fractions
  std::map<std::string, nlohmann::json> chosen_hyperparams;
  std::size_t truncated_inputs = 0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

// For each seed and fraction, trains on all out-of-domain training data plus
// the nested in-domain subset, holds out a stratified validation share of the
// combined pool, and evaluates on the fixed in-domain test set. Writes
// plan.json, result.json, curve.csv, curve_mean.csv, improvement.csv and
// seed_<s>/fraction_<f>/{predictions,history,models}/.
NewEventResult run_new_event(const ExperimentPlan& plan, const corpus::Corpus& corpus,
                             const corpus::DatasetCatalog& catalog, const std::filesystem::path& run_dir,
                             const RunOptions& options = {});

// Host, compiler and library facts recorded with every run.
nlohmann::json environment_metadata();

// Recomputes per-dataset and pooled metrics from a persisted prediction file.
ModelMetrics metrics_from_records(std::span<const PredictionRecord> records);

}  // namespace deceptkit::experiments
