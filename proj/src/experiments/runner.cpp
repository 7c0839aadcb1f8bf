#include "deceptkit/experiments/runner.hpp"

#include <sys/utsname.h>

#include <chrono>
#include <ctime>
#include <set>
#include <thread>

#include <Eigen/Core>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "deceptkit/backends/cross_validate.hpp"
#include "deceptkit/backends/model_io.hpp"
#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/rng.hpp"
#include "deceptkit/corpus/splits.hpp"
#include "deceptkit/ensemble/voting.hpp"
#include "deceptkit/experiments/new_event.hpp"

#ifndef DECEPTKIT_VERSION
#define DECEPTKIT_VERSION "unknown"
#endif

namespace deceptkit::experiments {

namespace fs = std::filesystem;
using backends::BackendConfig;
using corpus::Split;
using corpus::TextSample;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct UnitOutcome {
  std::vector<PredictionRecord> records;
  std::size_t truncated = 0;
};

std::vector<PredictionRecord> to_records(const std::vector<backends::ProbabilityPrediction>& preds,
                                         std::span<const TextSample> test) {
  std::vector<PredictionRecord> records;
  records.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    records.push_back({test[i].id, test[i].dataset, test[i].label, preds[i].probs, preds[i].argmax()});
  }
  return records;
}

void check_checkpoint(const std::vector<PredictionRecord>& records, std::span<const TextSample> test,
                      const fs::path& path) {
  bool ok = records.size() == test.size();
  for (std::size_t i = 0; ok && i < records.size(); ++i) {
    ok = records[i].sample_id == test[i].id && records[i].gold == test[i].label;
  }
  if (!ok) {
    throw DataError(path.string() + " does not match this run's test set; delete it to retrain the unit");
  }
}

// Trains one backend and persists its outputs under `dir`, or reuses the
// predictions of an earlier invocation. The prediction file is written last
// and marks the unit as complete.
UnitOutcome run_unit(const BackendConfig& config, std::span<const TextSample> train, std::span<const TextSample> val,
                     std::span<const TextSample> test, const fs::path& dir, bool save_model) {
  const std::string name(backends::to_string(config.kind));
  const fs::path pred_path = dir / "predictions" / (name + ".csv");
  const fs::path meta_path = dir / "predictions" / (name + ".json");
  if (fs::exists(pred_path)) {
    UnitOutcome out;
    out.records = read_predictions(pred_path);
    check_checkpoint(out.records, test, pred_path);
    if (fs::exists(meta_path)) out.truncated = json::parse(read_file(meta_path)).value("truncated_inputs", 0);
    spdlog::info("reusing {}", pred_path.string());
    return out;
  }
  spdlog::info("training {} on {} samples ({} validation)", name, train.size(), val.size());
  const auto start = Clock::now();
  const backends::TrainedModel model = backends::train_backend(config, train, val);
  const backends::PredictionBatch batch = backends::predict_proba(model, test);
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();

  fs::create_directories(dir / "history");
  fs::create_directories(dir / "predictions");
  write_file_atomic(dir / "history" / (name + ".csv"), backends::history_csv(model.history()));
  if (save_model) backends::export_model(model, dir / "models" / name);
  const json meta = {{"backend", name},
                     {"config", config.to_json()},
                     {"best_epoch", model.best_epoch()},
                     {"epochs_run", model.history().size()},
                     {"train_size", train.size()},
                     {"val_size", val.size()},
                     {"test_size", test.size()},
                     {"truncated_inputs", batch.truncated},
                     {"corpus_fingerprint", model.corpus_fingerprint()},
                     {"seconds", seconds}};
  write_file_atomic(meta_path, meta.dump(2) + "\n");
  UnitOutcome out{to_records(batch.predictions, test), batch.truncated};
  write_predictions(out.records, pred_path);
  return out;
}

struct EnsembleOutcome {
  std::vector<PredictionRecord> records;
  std::size_t ties = 0;
};

EnsembleOutcome run_ensemble(const ExperimentPlan& plan, const std::vector<std::vector<PredictionRecord>>& members,
                             const fs::path& dir) {
  std::vector<std::vector<backends::ProbabilityPrediction>> sets;
  for (std::size_t m = 0; m < members.size(); ++m) {
    std::vector<backends::ProbabilityPrediction> set;
    for (const auto& r : members[m]) set.push_back({r.sample_id, r.probs, plan.backends[m].kind});
    sets.push_back(std::move(set));
  }
  const ensemble::EnsembleBatch batch = ensemble::combine(sets, plan.ensemble.mode, plan.ensemble.options);
  EnsembleOutcome out;
  out.ties = batch.ties;
  std::string jsonl;
  for (std::size_t i = 0; i < batch.predictions.size(); ++i) {
    const auto& p = batch.predictions[i];
    const auto& first = members.front()[i];
    out.records.push_back({p.sample_id, first.dataset, first.gold, p.combined, p.label});
    jsonl += p.to_json().dump() + "\n";
  }
  write_file_atomic(dir / "ensemble.jsonl", jsonl);
  write_predictions(out.records, dir / "predictions" / (std::string(kEnsembleModel) + ".csv"));
  return out;
}

std::uint64_t backend_seed(std::uint64_t run_seed, const BackendConfig& config) {
  return derive_seed(derive_seed(run_seed, backends::to_string(config.kind)), config.seed);
}

// Grid search on the first seed's training data; results are cached in
// cv/ so a resumed run does not repeat it.
std::vector<BackendConfig> tuned_configs(const ExperimentPlan& plan, std::span<const TextSample> first_train,
                                         const fs::path& run_dir, std::map<std::string, json>* chosen) {
  std::vector<BackendConfig> configs = plan.backends;
  if (!plan.cross_validate) return configs;
  for (auto& config : configs) {
    if (config.grid.empty()) continue;
    const std::string name(backends::to_string(config.kind));
    const fs::path best_path = run_dir / "cv" / (name + ".json");
    json best;
    if (fs::exists(best_path)) {
      best = json::parse(read_file(best_path)).at("best");
    } else {
      fs::create_directories(run_dir / "cv");
      BackendConfig cv_config = config;
      cv_config.seed = backend_seed(plan.seeds.front(), config);
      spdlog::info("cross-validating {} over {} grid points", name, config.grid_points().size());
      const backends::CvResult cv = backends::cross_validate(cv_config, first_train, plan.cv_folds);
      backends::write_cv_table(cv, run_dir / "cv" / (name + ".csv"));
      best = cv.best;
      write_file_atomic(best_path, json{{"best", best}, {"best_index", cv.best_index}}.dump(2) + "\n");
    }
    config = config.with(best);
    (*chosen)[name] = best;
  }
  return configs;
}

std::string iso_time_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_json(const fs::path& run_dir, const ExperimentPlan& plan, const json& result,
                    const std::string& started) {
  const json doc = {{"plan", plan.to_json()},
                    {"environment", environment_metadata()},
                    {"started_at", started},
                    {"finished_at", iso_time_now()},
                    {"result", result}};
  write_file_atomic(run_dir / "result.json", doc.dump(2) + "\n");
}

json metrics_json(const MeanMetrics& m) { return {{"accuracy", m.accuracy}, {"f1", m.f1}}; }

std::string metrics_row(const analysis::MetricsReport& r) {
  const auto& c = r.counts;
  return fmt::format("{},{},{},{},{},{:.6f},{:.6f},{:.6f}", c.total(), c.tp, c.fp, c.fn, c.tn, r.accuracy, r.f1,
                     r.fpr);
}

void begin_run(const ExperimentPlan& plan, const fs::path& run_dir, Protocol expected) {
  if (plan.protocol != expected) {
    throw ConfigError("plan '" + plan.name + "' uses the " + std::string(to_string(plan.protocol)) + " protocol");
  }
  fs::create_directories(run_dir);
  write_file_atomic(run_dir / "plan.json", plan.to_json().dump(2) + "\n");
}

}  // namespace

json environment_metadata() {
  utsname u{};
  json j = {{"deceptkit_version", DECEPTKIT_VERSION},
            {"compiler", __VERSION__},
            {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION)},
            {"spdlog", fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)},
            {"hardware_threads", std::thread::hardware_concurrency()},
            {"recorded_at", iso_time_now()}};
  if (uname(&u) == 0) {
    j["host"] = u.nodename;
    j["os"] = fmt::format("{} {}", u.sysname, u.release);
    j["machine"] = u.machine;
  }
  if (const char* cache = std::getenv("DECEPTKIT_MODEL_CACHE")) j["model_cache"] = cache;
  return j;
}

ModelMetrics metrics_from_records(std::span<const PredictionRecord> records) {
  ModelMetrics out;
  const auto gold = gold_of(records);
  if (gold.size() != records.size()) throw DataError("duplicate sample ids in prediction records");
  std::vector<std::vector<analysis::LabeledPrediction>> sets;
  for (const auto& [dataset, subset] : by_dataset(records)) {
    sets.push_back(labeled(subset));
    out.per_dataset[dataset] = analysis::compute_metrics(sets.back(), gold_of(subset));
  }
  out.total = analysis::aggregate_total(sets, gold);
  return out;
}

json GeneralResult::to_json() const {
  json per_seed = json::array();
  for (const auto& s : seeds) {
    json models = json::object();
    for (const auto& [name, m] : s.models) {
      json datasets = json::object();
      for (const auto& [id, r] : m.per_dataset) datasets[std::string(corpus::dataset_key(id))] = r.to_json();
      models[name] = {{"datasets", datasets},
                      {"total", m.total.pooled.to_json()},
                      {"total_weighted", {{"accuracy", m.total.weighted_accuracy}, {"f1", m.total.weighted_f1}}}};
    }
    per_seed.push_back({{"seed", s.seed}, {"models", models}});
  }
  json means = json::object();
  for (const auto& [model, rows] : mean) {
    for (const auto& [key, m] : rows) means[model][key] = metrics_json(m);
  }
  return {{"protocol", "general"},
          {"seeds", per_seed},
          {"mean", means},
          {"chosen_hyperparams", chosen_hyperparams},
          {"ensemble_ties", ensemble_ties},
          {"truncated_inputs", truncated_inputs},
          {"wall_seconds", wall_seconds}};
}

GeneralResult run_general(const ExperimentPlan& plan, const corpus::Corpus& corpus,
                          const corpus::DatasetCatalog& catalog, const fs::path& run_dir, const RunOptions& options) {
  begin_run(plan, run_dir, Protocol::kGeneral);
  const std::string started = iso_time_now();
  const auto start = Clock::now();
  GeneralResult result;
  std::vector<BackendConfig> configs;

  for (std::size_t si = 0; si < plan.seeds.size(); ++si) {
    const std::uint64_t seed = plan.seeds[si];
    const fs::path seed_dir = run_dir / fmt::format("seed_{}", seed);
    const corpus::SplitAssignment splits = corpus::assign_splits(corpus, catalog, seed);
    std::vector<TextSample> train, val, test;
    std::string split_csv = "sample_id,split\n";
    for (const auto& s : corpus.samples()) {
      const Split split = splits.at(s.id);
      (split == Split::kTrain ? train : split == Split::kVal ? val : test).push_back(s);
      split_csv += csv_escape(s.id) + "," + std::string(corpus::to_string(split)) + "\n";
    }
    if (train.empty() || test.empty()) throw DataError(fmt::format("seed {}: empty training or test split", seed));
    fs::create_directories(seed_dir);
    write_file_atomic(seed_dir / "splits.csv", split_csv);
    spdlog::info("seed {}: {} train, {} validation, {} test", seed, train.size(), val.size(), test.size());

    if (si == 0) configs = tuned_configs(plan, train, run_dir, &result.chosen_hyperparams);

    SeedMetrics seed_metrics{seed, {}};
    std::vector<std::vector<PredictionRecord>> members;
    for (const auto& base : configs) {
      BackendConfig config = base;
      config.seed = backend_seed(seed, base);
      UnitOutcome unit = run_unit(config, train, val, test, seed_dir, plan.save_models);
      result.truncated_inputs += unit.truncated;
      const std::string name(backends::to_string(config.kind));
      seed_metrics.models[name] = metrics_from_records(unit.records);
      members.push_back(std::move(unit.records));
      if (options.on_unit_done) options.on_unit_done(fmt::format("seed_{}/{}", seed, name));
    }
    if (plan.has_ensemble()) {
      EnsembleOutcome ens = run_ensemble(plan, members, seed_dir);
      result.ensemble_ties += ens.ties;
      seed_metrics.models[kEnsembleModel] = metrics_from_records(ens.records);
    }
    write_file_atomic(seed_dir / "metrics.json", GeneralResult{{seed_metrics}, {}, {}, 0, 0, 0}.to_json().dump(2));
    result.seeds.push_back(std::move(seed_metrics));
  }

  // Means over seeds; a dataset without test samples in some seed is left out.
  std::string metrics_csv = "seed,model,dataset,n,tp,fp,fn,tn,accuracy,f1,fpr\n";
  std::string mean_csv = "model,dataset,accuracy,f1\n";
  const double n_seeds = static_cast<double>(result.seeds.size());
  for (const std::string& model : plan.model_names()) {
    auto& rows = result.mean[model];
    for (const auto id : corpus::kAllDatasets) {
      MeanMetrics m;
      bool everywhere = true;
      for (const auto& s : result.seeds) {
        const auto& per = s.models.at(model).per_dataset;
        const auto it = per.find(id);
        if (it == per.end()) {
          everywhere = false;
          break;
        }
        m.accuracy += it->second.accuracy / n_seeds;
        m.f1 += it->second.f1 / n_seeds;
      }
      if (everywhere) rows[std::string(corpus::dataset_key(id))] = m;
    }
    MeanMetrics pooled, weighted;
    for (const auto& s : result.seeds) {
      const auto& t = s.models.at(model).total;
      pooled.accuracy += t.pooled.accuracy / n_seeds;
      pooled.f1 += t.pooled.f1 / n_seeds;
      weighted.accuracy += t.weighted_accuracy / n_seeds;
      weighted.f1 += t.weighted_f1 / n_seeds;
    }
    rows["total"] = pooled;
    rows["total_weighted"] = weighted;
    for (const auto& s : result.seeds) {
      const ModelMetrics& mm = s.models.at(model);
      for (const auto& [id, r] : mm.per_dataset) {
        metrics_csv += fmt::format("{},{},{},{}\n", s.seed, model, corpus::dataset_key(id), metrics_row(r));
      }
      metrics_csv += fmt::format("{},{},total,{}\n", s.seed, model, metrics_row(mm.total.pooled));
    }
    for (const auto id : corpus::kAllDatasets) {
      const auto it = rows.find(std::string(corpus::dataset_key(id)));
      if (it != rows.end()) {
        mean_csv += fmt::format("{},{},{:.6f},{:.6f}\n", model, it->first, it->second.accuracy, it->second.f1);
      }
    }
    mean_csv += fmt::format("{},total,{:.6f},{:.6f}\n", model, pooled.accuracy, pooled.f1);
    mean_csv += fmt::format("{},total_weighted,{:.6f},{:.6f}\n", model, weighted.accuracy, weighted.f1);
  }
  write_file_atomic(run_dir / "metrics.csv", metrics_csv);
  write_file_atomic(run_dir / "metrics_mean.csv", mean_csv);
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  write_run_json(run_dir, plan, result.to_json(), started);
  return result;
}

json NewEventResult::to_json() const {
  json pts = json::array();
  for (const auto& p : points) {
    pts.push_back({{"seed", p.seed},
                   {"fraction", p.fraction},
                   {"model", p.model},
                   {"metrics", p.metrics.to_json()},
                   {"train_size", p.train_size},
                   {"in_domain_train", p.in_domain_train},
                   {"val_size", p.val_size},
                   {"test_size", p.test_size}});
  }
  json means = json::object();
  for (const auto& [model, rows] : mean) {
    for (const auto& [f, m] : rows) means[model][std::to_string(f)] = metrics_json(m);
  }
  json imp = json::array();
  for (const auto& i : improvements) {
    imp.push_back({{"model", i.model}, {"f1_at_zero", i.f1_at_zero}, {"f1_at_next", i.f1_at_next}, {"delta", i.delta}});
  }
  json digests = json::object();
  for (const auto& [seed, d] : test_digest) digests[std::to_string(seed)] = d;
  return {{"protocol", "new_event"},
          {"points", pts},
          {"mean", means},
          {"improvements", imp},
          {"mean_improvement", mean_improvement},
          {"chosen_hyperparams", chosen_hyperparams},
          {"test_digest", digests},
          {"truncated_inputs", truncated_inputs},
          {"wall_seconds", wall_seconds}};
}

NewEventResult run_new_event(const ExperimentPlan& plan, const corpus::Corpus& corpus,
                             const corpus::DatasetCatalog& catalog, const fs::path& run_dir,
                             const RunOptions& options) {
  begin_run(plan, run_dir, Protocol::kNewEvent);
  const std::string started = iso_time_now();
  const auto start = Clock::now();
  const auto& settings = plan.new_event;
  NewEventResult result;
  std::vector<BackendConfig> configs;
  std::string curve_csv = "seed,fraction,model,f1,accuracy,train_size,in_domain_train,val_size,test_size\n";

  for (std::size_t si = 0; si < plan.seeds.size(); ++si) {
    const std::uint64_t seed = plan.seeds[si];
    const corpus::SplitAssignment splits = corpus::assign_splits(corpus, catalog, seed);
    const NewEventPartition part = partition_new_event(corpus, splits, settings.event_tag);
    const std::string digest = sample_digest(part.test);
    result.test_digest[seed] = digest;
    const auto subsets = nested_subsets(part.in_domain, settings.fractions, seed);
    spdlog::info("seed {}: {} out-of-domain, {} in-domain training samples, {} test", seed, part.out_of_domain.size(),
                 part.in_domain.size(), part.test.size());

    for (std::size_t fi = 0; fi < settings.fractions.size(); ++fi) {
      const int fraction = settings.fractions[fi];
      const TrainValSplit training = compose_training(part.out_of_domain, subsets[fi], settings.validation_fraction,
                                                      derive_seed(seed, "new_event_validation"));
      check_provenance(training, part.test, fraction, settings.event_tag);
      if (training.train.empty()) throw DataError(fmt::format("seed {} fraction {}: empty training set", seed, fraction));
      // Tuning sees out-of-domain data only, so the 0% point stays free of
      // in-domain influence.
      if (si == 0 && fi == 0) configs = tuned_configs(plan, part.out_of_domain, run_dir, &result.chosen_hyperparams);
      const fs::path dir = run_dir / fmt::format("seed_{}", seed) / fmt::format("fraction_{}", fraction);
      fs::create_directories(dir);
      write_file_atomic(dir / "test_digest.txt", digest + "\n");

      std::size_t in_domain_train = 0;
      for (const auto* pool : {&training.train, &training.val}) {
        for (const auto& s : *pool) in_domain_train += is_in_domain(s, settings.event_tag) ? 1 : 0;
      }
      auto add_point = [&](const std::string& model, const std::vector<PredictionRecord>& records) {
        CurvePoint p{seed, fraction, model, analysis::compute_metrics(labeled(records), gold_of(records)),
                     training.train.size(), in_domain_train, training.val.size(), part.test.size()};
        curve_csv += fmt::format("{},{},{},{:.6f},{:.6f},{},{},{},{}\n", seed, fraction, model, p.metrics.f1,
                                 p.metrics.accuracy, p.train_size, p.in_domain_train, p.val_size, p.test_size);
        result.points.push_back(std::move(p));
      };

      std::vector<std::vector<PredictionRecord>> members;
      for (const auto& base : configs) {
        BackendConfig config = base;
        config.seed = backend_seed(seed, base);
        UnitOutcome unit = run_unit(config, training.train, training.val, part.test, dir, plan.save_models);
        result.truncated_inputs += unit.truncated;
        const std::string name(backends::to_string(config.kind));
        add_point(name, unit.records);
        members.push_back(std::move(unit.records));
        if (options.on_unit_done) options.on_unit_done(fmt::format("seed_{}/fraction_{}/{}", seed, fraction, name));
      }
      if (plan.has_ensemble()) add_point(kEnsembleModel, run_ensemble(plan, members, dir).records);
    }
  }

  const double n_seeds = static_cast<double>(plan.seeds.size());
  for (const auto& p : result.points) {
    MeanMetrics& m = result.mean[p.model][p.fraction];
    m.accuracy += p.metrics.accuracy / n_seeds;
    m.f1 += p.metrics.f1 / n_seeds;
  }
  std::string mean_csv = "fraction,model,f1,accuracy\n";
  for (int f : settings.fractions) {
    for (const std::string& model : plan.model_names()) {
      const MeanMetrics& m = result.mean[model][f];
      mean_csv += fmt::format("{},{},{:.6f},{:.6f}\n", f, model, m.f1, m.accuracy);
    }
  }
  std::string improvement_csv = "model,f1_at_zero,f1_at_next,delta_points\n";
  if (settings.fractions.size() >= 2 && settings.fractions[0] == 0) {
    const int next = settings.fractions[1];
    double sum = 0.0;
    std::size_t members = 0;
    for (const std::string& model : plan.model_names()) {
      Improvement imp{model, result.mean[model][0].f1, result.mean[model][next].f1, 0.0};
      imp.delta = 100.0 * (imp.f1_at_next - imp.f1_at_zero);
      if (model != kEnsembleModel) {
        sum += imp.delta;
        ++members;
      }
      improvement_csv += fmt::format("{},{:.6f},{:.6f},{:.4f}\n", model, imp.f1_at_zero, imp.f1_at_next, imp.delta);
      result.improvements.push_back(std::move(imp));
    }
    result.mean_improvement = sum / static_cast<double>(members);
    improvement_csv += fmt::format("mean_of_backends,,,{:.4f}\n", result.mean_improvement);
  }
  write_file_atomic(run_dir / "curve.csv", curve_csv);
  write_file_atomic(run_dir / "curve_mean.csv", mean_csv);
  write_file_atomic(run_dir / "improvement.csv", improvement_csv);
  result.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  write_run_json(run_dir, plan, result.to_json(), started);
  return result;
}

}  // namespace deceptkit::experiments
