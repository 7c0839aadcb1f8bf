#include "deceptkit/backends/cross_validate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "deceptkit/analysis/metrics.hpp"
#include "deceptkit/backends/model.hpp"
#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"

namespace deceptkit::backends {

namespace {

constexpr double kTieTolerance = 1e-12;

}  // namespace

double default_fold_evaluator(const BackendConfig& config, std::span<const corpus::TextSample> train,
                              std::span<const corpus::TextSample> held_out) {
  const TrainedModel model = train_backend(config, train, {});
  const PredictionBatch batch = predict_proba(model, held_out);
  analysis::ConfusionCounts c;
  for (std::size_t i = 0; i < held_out.size(); ++i) c.add(batch.predictions[i].argmax(), held_out[i].label);
  return analysis::metrics_from_counts(c).f1;
}

std::vector<std::size_t> stratified_folds(std::span<const corpus::TextSample> samples, std::size_t k,
                                          std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (samples.size() < k) {
    throw TrainingError("cross-validation with " + std::to_string(k) + " folds needs at least " + std::to_string(k) +
                        " samples, got " + std::to_string(samples.size()));
  }
  std::map<Label, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < samples.size(); ++i) by_label[samples[i].label].push_back(i);
  std::vector<std::size_t> fold(samples.size(), 0);
  Rng rng(seed);
  std::size_t next = 0;
  for (auto& [label, indices] : by_label) {
    std::sort(indices.begin(), indices.end(),
              [&](std::size_t a, std::size_t b) { return samples[a].id < samples[b].id; });
    rng.shuffle(std::span<std::size_t>(indices));
    for (std::size_t idx : indices) fold[idx] = next++ % k;
  }
  return fold;
}

std::size_t model_size(const BackendConfig& config) {
  std::size_t size = 0;
  for (const char* key : {"hidden_units", "fc_units"}) {
    if (config.hyperparams.contains(key)) size += config.hyperparams[key].get<std::size_t>();
  }
  return size;
}

CvResult cross_validate(const BackendConfig& config, std::span<const corpus::TextSample> train, std::size_t folds,
                        const FoldEvaluator& evaluator) {
  const auto points = config.grid_points();
  const auto fold_of = stratified_folds(train, folds, derive_seed(config.seed, "folds"));
  CvResult result;
  for (std::size_t g = 0; g < points.size(); ++g) {
    const BackendConfig candidate = config.with(points[g]);
    CvRow row;
    row.point = points[g];
    row.model_size = model_size(candidate);
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<corpus::TextSample> fit;
      std::vector<corpus::TextSample> held_out;
      for (std::size_t i = 0; i < train.size(); ++i) (fold_of[i] == f ? held_out : fit).push_back(train[i]);
      BackendConfig fold_config = candidate;
      fold_config.seed = derive_seed(config.seed, f);
      row.fold_f1.push_back(evaluator(fold_config, fit, held_out));
    }
    double sum = 0.0;
    for (double v : row.fold_f1) sum += v;
    row.mean_f1 = sum / static_cast<double>(folds);
    spdlog::info("{} cv {}/{} {} mean F1 {:.4f}", to_string(config.kind), g + 1, points.size(), row.point.dump(),
                 row.mean_f1);
    result.table.push_back(std::move(row));
  }
  for (std::size_t g = 1; g < result.table.size(); ++g) {
    const CvRow& row = result.table[g];
    const CvRow& best = result.table[result.best_index];
    const bool better = row.mean_f1 > best.mean_f1 + kTieTolerance;
    const bool tie = std::abs(row.mean_f1 - best.mean_f1) <= kTieTolerance;
    if (better || (tie && row.model_size < best.model_size)) result.best_index = g;
  }
  result.best = result.table[result.best_index].point;
  return result;
}

void write_cv_table(const CvResult& result, const std::filesystem::path& csv) {
  const std::size_t folds = result.table.empty() ? 0 : result.table.front().fold_f1.size();
  std::string out = "grid_index,point";
  for (std::size_t f = 0; f < folds; ++f) out += fmt::format(",fold{}_f1", f + 1);
  out += ",mean_f1,model_size,selected\n";
  for (std::size_t g = 0; g < result.table.size(); ++g) {
    const CvRow& row = result.table[g];
    out += fmt::format("{},{}", g, csv_escape(row.point.dump()));
    for (double v : row.fold_f1) out += fmt::format(",{:.6f}", v);
    out += fmt::format(",{:.6f},{},{}\n", row.mean_f1, row.model_size, g == result.best_index ? 1 : 0);
  }
  write_file_atomic(csv, out);
}

}  // namespace deceptkit::backends
