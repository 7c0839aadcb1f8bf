#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "deceptkit/backends/config.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::backends {

inline constexpr std::size_t kDefaultFolds = 3;

struct CvRow {
  nlohmann::json point;
  std::vector<double> fold_f1;
  double mean_f1 = 0.0;
  std::size_t model_size = 0;
};

struct CvResult {
  nlohmann::json best;
  std::size_t best_index = 0;
  std::vector<CvRow> table;  // grid order
};

// Scores one configuration: train on `train`, return F1 on `held_out`.
using FoldEvaluator = std::function<double(const BackendConfig&, std::span<const corpus::TextSample> train,
                                           std::span<const corpus::TextSample> held_out)>;

// Trains with the configured epochs and no early stopping, then scores the
// held-out fold.
double default_fold_evaluator(const BackendConfig& config, std::span<const corpus::TextSample> train,
                              std::span<const corpus::TextSample> held_out);

// Label-stratified assignment of samples to k folds; returns the fold of
// each sample, in input order.
std::vector<std::size_t> stratified_folds(std::span<const corpus::TextSample> samples, std::size_t k,
                                          std::uint64_t seed);

// Hidden-unit count of a configuration, used to prefer smaller models.
std::size_t model_size(const BackendConfig& config);

// Scores every grid point by mean F1 over k stratified folds. The best mean
// wins; ties go to the smaller model and then to the earlier grid point.
CvResult cross_validate(const BackendConfig& config, std::span<const corpus::TextSample> train,
                        std::size_t folds = kDefaultFolds, const FoldEvaluator& evaluator = default_fold_evaluator);

void write_cv_table(const CvResult& result, const std::filesystem::path& csv);

}  // namespace deceptkit::backends
