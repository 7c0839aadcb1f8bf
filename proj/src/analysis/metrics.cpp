#include "deceptkit/analysis/metrics.hpp"

#include <set>

#include "deceptkit/common/error.hpp"

namespace deceptkit::analysis {

void ConfusionCounts::add(Label predicted, Label gold) {
  const bool p = predicted == Label::kDeceptive;
  const bool g = gold == Label::kDeceptive;
  if (p && g) {
    ++tp;
  } else if (p) {
    ++fp;
  } else if (g) {
    ++fn;
  } else {
    ++tn;
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  tn += other.tn;
  return *this;
}

nlohmann::ordered_json MetricsReport::to_json() const {
  return {{"accuracy", accuracy},
          {"f1", f1},
          {"fpr", fpr},
          {"tp", counts.tp},
          {"fp", counts.fp},
          {"fn", counts.fn},
          {"tn", counts.tn},
          {"support_deceptive", support_deceptive},
          {"support_non_deceptive", support_non_deceptive},
          {"f1_degenerate", f1_degenerate},
          {"fpr_undefined", fpr_undefined}};
}

MetricsReport metrics_from_counts(const ConfusionCounts& c) {
  if (c.total() == 0) throw DataError("cannot compute metrics over zero predictions");
  MetricsReport r;
  r.counts = c;
  r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  const std::size_t f1_denominator = 2 * c.tp + c.fp + c.fn;
  r.f1_degenerate = f1_denominator == 0;
  r.f1 = r.f1_degenerate ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(f1_denominator);
  r.fpr_undefined = c.fp + c.tn == 0;
  r.fpr = r.fpr_undefined ? 0.0 : static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  r.support_deceptive = c.tp + c.fn;
  r.support_non_deceptive = c.fp + c.tn;
  return r;
}

namespace {

ConfusionCounts count_by_id(std::span<const LabeledPrediction> predictions, const std::map<std::string, Label>& gold,
                            std::set<std::string>& seen) {
  ConfusionCounts c;
  for (const auto& p : predictions) {
    const auto it = gold.find(p.sample_id);
    if (it == gold.end()) throw DataError("prediction for unknown sample id '" + p.sample_id + "'");
    if (!seen.insert(p.sample_id).second) throw DataError("sample id '" + p.sample_id + "' predicted twice");
    c.add(p.predicted, it->second);
  }
  return c;
}

}  // namespace

MetricsReport compute_metrics(std::span<const LabeledPrediction> predictions, const std::map<std::string, Label>& gold) {
  std::set<std::string> seen;
  const ConfusionCounts c = count_by_id(predictions, gold, seen);
  if (seen.size() != gold.size()) {
    for (const auto& [id, label] : gold) {
      if (seen.count(id) == 0) throw DataError("no prediction for sample id '" + id + "'");
    }
  }
  return metrics_from_counts(c);
}

MetricsReport compute_metrics(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) {
    throw DataError(std::to_string(predicted.size()) + " predictions for " + std::to_string(gold.size()) +
                    " gold labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) c.add(predicted[i], gold[i]);
  return metrics_from_counts(c);
}

AggregateReport aggregate_total(const std::vector<std::vector<LabeledPrediction>>& sets,
                                const std::map<std::string, Label>& gold) {
  if (sets.empty()) throw DataError("aggregate_total needs at least one prediction set");
  std::set<std::string> seen;
  ConfusionCounts pooled;
  AggregateReport out;
  double weight_sum = 0.0;
  for (const auto& set : sets) {
    std::set<std::string> local;
    for (const auto& p : set) {
      if (seen.count(p.sample_id) != 0) throw DataError("sample id '" + p.sample_id + "' appears in two sets");
    }
    const ConfusionCounts c = count_by_id(set, gold, local);
    seen.insert(local.begin(), local.end());
    pooled += c;
    const MetricsReport r = metrics_from_counts(c);
    const auto n = static_cast<double>(c.total());
    out.weighted_accuracy += n * r.accuracy;
    out.weighted_f1 += n * r.f1;
    weight_sum += n;
  }
  out.pooled = metrics_from_counts(pooled);
  out.weighted_accuracy /= weight_sum;
  out.weighted_f1 /= weight_sum;
  return out;
}

}  // namespace deceptkit::analysis
