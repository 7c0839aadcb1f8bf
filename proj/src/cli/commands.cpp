#include "deceptkit/cli/commands.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "deceptkit/analysis/audit.hpp"
#include "deceptkit/analysis/exports.hpp"
#include "deceptkit/backends/model_io.hpp"
#include "deceptkit/cli/report.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/hash.hpp"
#include "deceptkit/common/unicode.hpp"
#include "deceptkit/corpus/corpus_io.hpp"
#include "deceptkit/corpus/fixture.hpp"
#include "deceptkit/corpus/ingest.hpp"
#include "deceptkit/corpus/splits.hpp"
#include "deceptkit/corpus/validate.hpp"
#include "deceptkit/experiments/records.hpp"
#include "deceptkit/experiments/runner.hpp"

namespace deceptkit::cli {

namespace fs = std::filesystem;
using experiments::ExperimentPlan;
using experiments::Protocol;
using nlohmann::json;

namespace {

void require_complete(const RunEntry& entry) {
  if (entry.status != RunStatus::kComplete) {
    throw RunStateError(fmt::format("run {} is {}, not complete{}", entry.id, to_string(entry.status),
                                    entry.error.empty() ? "" : " (" + entry.error + ")"));
  }
}

ExperimentPlan apply_overrides(ExperimentPlan plan, const RunCommandOptions& options) {
  if (options.seed) plan.seeds = {*options.seed};
  if (!options.backends.empty()) {
    std::vector<backends::BackendConfig> kept;
    std::vector<double> weights;
    for (const auto& name : options.backends) {
      const backends::BackendKind kind = backends::parse_backend_kind(name);
      const auto it = std::find_if(plan.backends.begin(), plan.backends.end(),
                                   [&](const backends::BackendConfig& b) { return b.kind == kind; });
      if (it == plan.backends.end()) throw ConfigError("backend " + name + " is not part of plan " + plan.name);
      kept.push_back(*it);
      if (!plan.ensemble.options.weights.empty()) {
        weights.push_back(plan.ensemble.options.weights[static_cast<std::size_t>(it - plan.backends.begin())]);
      }
    }
    plan.backends = std::move(kept);
    plan.ensemble.options.weights = std::move(weights);
  }
  if (!options.fractions.empty()) {
    if (plan.protocol != Protocol::kNewEvent) throw ConfigError("--fractions applies to new_event plans only");
    plan.new_event.fractions = options.fractions;
  }
  // Revalidate and pin data paths so the snapshot works from any directory.
  json j = plan.to_json();
  j["corpus"] = fs::absolute(plan.corpus).lexically_normal().string();
  j["catalog"] = fs::absolute(plan.catalog).lexically_normal().string();
  return ExperimentPlan::from_json(j);
}

struct RunData {
  ExperimentPlan plan;
  corpus::Corpus corpus;
};

RunData load_run_data(const RunEntry& entry) {
  RunData d{ExperimentPlan::from_json(entry.plan), {}};
  d.corpus = corpus::load_corpus(d.plan.corpus);
  return d;
}

std::string default_model(const ExperimentPlan& plan) {
  return plan.has_ensemble() ? std::string(experiments::kEnsembleModel)
                             : std::string(backends::to_string(plan.backends.front().kind));
}

// Directory holding predictions/, models/ and history/ for one seed (and
// fraction, for new-event runs).
fs::path unit_dir(const RunEntry& entry, const ExperimentPlan& plan, std::optional<std::uint64_t> seed,
                  std::optional<int> fraction) {
  const std::uint64_t s = seed.value_or(plan.seeds.front());
  if (std::find(plan.seeds.begin(), plan.seeds.end(), s) == plan.seeds.end()) {
    throw ConfigError(fmt::format("run {} has no seed {}", entry.id, s));
  }
  fs::path dir = entry.dir / fmt::format("seed_{}", s);
  if (plan.protocol == Protocol::kNewEvent) {
    const int f = fraction.value_or(plan.new_event.fractions.back());
    const auto& fr = plan.new_event.fractions;
    if (std::find(fr.begin(), fr.end(), f) == fr.end()) throw ConfigError(fmt::format("run {} has no fraction {}", entry.id, f));
    dir /= fmt::format("fraction_{}", f);
  } else if (fraction) {
    throw ConfigError("--fraction applies to new_event runs only");
  }
  return dir;
}

std::string unit_tag(const ExperimentPlan& plan, std::optional<std::uint64_t> seed, std::optional<int> fraction) {
  std::string tag = fmt::format("seed{}", seed.value_or(plan.seeds.front()));
  if (plan.protocol == Protocol::kNewEvent) tag += fmt::format("_f{}", fraction.value_or(plan.new_event.fractions.back()));
  return tag;
}

backends::TrainedModel load_saved_model(const fs::path& unit, const std::string& backend, const std::string& run_id) {
  const fs::path dir = unit / "models" / backend;
  if (!fs::exists(dir / "model.json")) {
    throw ConfigError("run " + run_id + " has no saved " + backend + " model at " + dir.string() +
                      " (set save_models in the plan)");
  }
  return backends::load_model(dir, backends::parse_backend_kind(backend));
}

std::vector<corpus::TextSample> samples_for(const corpus::Corpus& corpus,
                                            const std::vector<experiments::PredictionRecord>& records) {
  std::vector<corpus::TextSample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const corpus::TextSample* s = corpus.find(r.sample_id);
    if (s == nullptr) throw DataError("prediction for " + r.sample_id + " has no sample in the run's corpus");
    out.push_back(*s);
  }
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const RunStateError*>(&e) ||
      dynamic_cast<const IngestError*>(&e) || dynamic_cast<const LabelMapError*>(&e) ||
      dynamic_cast<const FormatError*>(&e) || dynamic_cast<const UnsupportedBackendError*>(&e)) {
    return kExitValidation;
  }
  return kExitRuntime;
}

int cmd_ingest(const IngestOptions& options, std::ostream& out) {
  corpus::DatasetCatalog catalog = corpus::DatasetCatalog::load(options.catalog);
  fs::path raw_root = options.raw_root;
  if (options.fixture) {
    raw_root = (options.out.has_parent_path() ? options.out.parent_path() : fs::path(".")) / "fixture_raw";
    fs::remove_all(raw_root);
    corpus::write_fixture_raw(catalog, raw_root, options.seed);
    catalog = corpus::fixture_catalog(catalog);
    out << "wrote synthetic raw data to " << raw_root.string() << "\n";
  }

  corpus::Corpus corpus;
  corpus::CorpusManifestExtras extras;
  extras.seeds = {options.seed};
  std::vector<std::string> missing;
  std::size_t dropped = 0, empty = 0;
  for (const auto& spec : catalog.specs()) {
    try {
      corpus::IngestResult r = corpus::ingest_dataset(spec, raw_root / spec.raw_subdir);
      dropped += r.dropped_by_label;
      empty += r.empty_text;
      for (const auto& w : r.warnings) spdlog::warn("{}", w);
      extras.raw_checksums[std::string(corpus::dataset_key(spec.id))] = r.file_checksums;
      corpus.append(std::move(r.samples));
    } catch (const IngestError& e) {
      if (std::string(e.what()).find("not found") == std::string::npos) throw;
      missing.push_back(e.what());
    }
  }
  if (!missing.empty()) {
    std::string message = fmt::format("{} of {} datasets have missing raw files under {}:", missing.size(),
                                      catalog.specs().size(), raw_root.string());
    for (const auto& m : missing) message += "\n  - " + m;
    throw IngestError(message);
  }

  const corpus::ValidationReport report =
      corpus::validate_corpus(corpus, catalog, corpus::assign_splits(corpus, catalog, options.seed));
  const std::string text = report.to_text() +
                           fmt::format("rows dropped by label rules: {}\nrows with empty text: {}\n", dropped, empty);
  if (options.out.has_parent_path()) fs::create_directories(options.out.parent_path());
  write_file_atomic(options.out.string() + ".report.txt", text);
  out << text;
  if (!report.clean() && !options.allow_warnings) {
    out << "validation flagged problems; corpus not written (use --allow-warnings to write it anyway)\n";
    return kExitValidation;
  }
  corpus::export_corpus(corpus, options.out, extras);
  out << fmt::format("wrote {} samples to {}\n", corpus.size(), options.out.string());
  return kExitOk;
}

std::string cmd_run(const RunCommandOptions& options, std::ostream& out) {
  RunRegistry registry(options.runs_root);
  RunEntry entry;
  if (!options.resume.empty()) {
    entry = registry.get(options.resume);
    if (entry.status == RunStatus::kComplete) {
      throw RunStateError("run " + entry.id + " is complete and immutable; start a new run instead");
    }
    out << "resuming run " << entry.id << " (" << to_string(entry.status) << ")\n";
  } else {
    if (options.plan.empty()) throw ConfigError("run needs --config <plan> or --resume <run id>");
    const ExperimentPlan plan = apply_overrides(ExperimentPlan::load(options.plan), options);
    if (!fs::exists(plan.corpus)) {
      throw ConfigError("corpus " + plan.corpus + " does not exist; run `deceptkit ingest` first");
    }
    entry = registry.create(plan, sha256_file(plan.corpus));
    out << "created run " << entry.id << "\n";
  }

  const ExperimentPlan plan = ExperimentPlan::from_json(entry.plan);
  const corpus::Corpus corpus = corpus::load_corpus(plan.corpus);
  if (!entry.corpus_sha256.empty() && sha256_file(plan.corpus) != entry.corpus_sha256) {
    throw DataError("corpus " + plan.corpus + " changed since run " + entry.id + " started");
  }
  const corpus::DatasetCatalog catalog = corpus::DatasetCatalog::load(plan.catalog);
  registry.transition(entry, RunStatus::kRunning);
  try {
    if (plan.protocol == Protocol::kGeneral) {
      experiments::run_general(plan, corpus, catalog, entry.dir);
    } else {
      experiments::run_new_event(plan, corpus, catalog, entry.dir);
    }
  } catch (const std::exception& e) {
    registry.transition(entry, RunStatus::kFailed, e.what());
    out << "run " << entry.id << " failed; continue it with `deceptkit run --resume " << entry.id << "`\n";
    throw;
  }
  registry.transition(entry, RunStatus::kComplete);
  out << "run " << entry.id << " complete: " << entry.dir.string() << "\n";
  return entry.id;
}

std::string cmd_report(const fs::path& runs_root, const std::string& run_id) {
  const RunEntry entry = RunRegistry(runs_root).get(run_id);
  require_complete(entry);
  return render_report(entry, json::parse(read_file(entry.dir / "result.json")));
}

std::vector<fs::path> cmd_analyze(const AnalyzeOptions& options, std::ostream& out) {
  const RunEntry entry = RunRegistry(options.runs_root).get(options.run_id);
  require_complete(entry);
  const bool wants_any =
      !options.fpr_keywords.empty() || !options.errors.empty() || options.embeddings || !options.attention.empty();
  if (!wants_any) throw ConfigError("analyze needs at least one of --fpr-keywords, --errors, --embeddings, --attention");

  const ExperimentPlan plan = ExperimentPlan::from_json(entry.plan);
  const fs::path unit = unit_dir(entry, plan, options.seed, options.fraction);
  const std::string tag = unit_tag(plan, options.seed, options.fraction);
  const fs::path analysis_dir = entry.dir / "analysis";
  fs::create_directories(analysis_dir);
  std::vector<fs::path> written;

  std::optional<RunData> data;
  auto predictions_of = [&](const std::string& model) {
    if (!data) data = load_run_data(entry);
    const fs::path file = unit / "predictions" / (model + ".csv");
    if (!fs::exists(file)) throw ConfigError("run " + entry.id + " has no predictions for model " + model);
    auto records = experiments::read_predictions(file);
    auto samples = samples_for(data->corpus, records);
    return std::make_pair(experiments::labeled(records), std::move(samples));
  };

  const std::string model = options.model.empty() ? default_model(plan) : options.model;
  if (!options.fpr_keywords.empty()) {
    const auto [preds, samples] = predictions_of(model);
    const auto rows = analysis::fpr_by_keyword(preds, samples, options.fpr_keywords);
    const fs::path csv = analysis_dir / fmt::format("keyword_fpr_{}_{}.csv", model, tag);
    analysis::write_keyword_table(rows, csv);
    out << fmt::format("| Keyword | Negatives | FP | FPR (%) |\n|---|---:|---:|---:|\n");
    for (const auto& r : rows) {
      out << fmt::format("| {} | {} | {} | {} |\n", r.keyword, r.matched_negatives, r.false_positives,
                         r.undefined ? "undefined" : fmt::format("{:.2f}", 100.0 * r.fpr));
    }
    if (!rows.empty()) out << fmt::format("overall FPR: {:.2f}%\n", 100.0 * rows.front().baseline_fpr);
    written.push_back(csv);
  }
  if (!options.errors.empty()) {
    const analysis::ErrorType type = analysis::parse_error_type(options.errors);
    const auto [preds, samples] = predictions_of(model);
    const auto errors = analysis::sample_errors(preds, samples, type, options.k, plan.seeds.front());
    const fs::path csv = analysis_dir / fmt::format("errors_{}_{}_{}.csv", analysis::to_string(type), model, tag);
    analysis::write_error_samples(errors, csv);
    out << fmt::format("{} {} samples of model {}\n", errors.size(), analysis::to_string(type), model);
    written.push_back(csv);
  }
  if (options.embeddings) {
    const std::string backend =
        options.model.empty() || options.model == experiments::kEnsembleModel ? "transformer_finetune" : options.model;
    const backends::TrainedModel trained = load_saved_model(unit, backend, entry.id);
    const auto [preds, samples] = predictions_of(backend);
    analysis::TsneOptions tsne;
    tsne.perplexity = options.perplexity;
    tsne.seed = plan.seeds.front();
    const auto exported = analysis::export_embeddings(trained, samples, preds, tsne);
    const fs::path dir = analysis_dir / fmt::format("embeddings_{}_{}", backend, tag);
    analysis::write_embedding_export(exported, dir);
    out << fmt::format("embedded {} test samples\n", exported.rows.size());
    written.push_back(dir);
  }
  if (!options.attention.empty()) {
    const backends::TrainedModel trained = load_saved_model(unit, "transformer_finetune", entry.id);
    const auto exported = analysis::export_attention(trained, unicode::normalize_text(options.attention));
    const fs::path file = analysis_dir / fmt::format("attention_{}_{}.json", tag, sha256_hex(options.attention).substr(0, 8));
    analysis::write_attention_export(exported, file);
    for (std::size_t t = 0; t < exported.tokens.size(); ++t) {
      out << fmt::format("{:>16} {:.4f}\n", exported.tokens[t], exported.head_mean[t]);
    }
    written.push_back(file);
  }
  for (const auto& p : written) out << "wrote " << p.string() << "\n";
  return written;
}

void cmd_models_list(const fs::path& runs_root, std::ostream& out) {
  std::size_t n = 0;
  for (const auto& entry : RunRegistry(runs_root).list()) {
    if (entry.status != RunStatus::kComplete) continue;
    std::vector<fs::path> found;
    for (const auto& f : fs::recursive_directory_iterator(entry.dir)) {
      if (f.path().filename() == "model.json" && f.path().parent_path().parent_path().filename() == "models") {
        found.push_back(f.path().parent_path());
      }
    }
    std::sort(found.begin(), found.end());
    for (const auto& dir : found) {
      const json meta = json::parse(read_file(dir / "model.json"));
      out << fmt::format("{}  {}  {}\n", entry.id, meta.value("backend_kind", dir.filename().string()),
                         fs::relative(dir, entry.dir).string());
      ++n;
    }
  }
  if (n == 0) out << "no saved models (runs save models when the plan sets save_models)\n";
}

void cmd_models_export(const fs::path& runs_root, const std::string& run_id, const std::string& backend,
                       std::optional<std::uint64_t> seed, std::optional<int> fraction, const fs::path& dest,
                       std::ostream& out) {
  const RunEntry entry = RunRegistry(runs_root).get(run_id);
  require_complete(entry);
  const ExperimentPlan plan = ExperimentPlan::from_json(entry.plan);
  const backends::TrainedModel model = load_saved_model(unit_dir(entry, plan, seed, fraction), backend, run_id);
  backends::export_model(model, dest);
  out << "exported " << backend << " from run " << run_id << " to " << dest.string() << "\n";
}

void cmd_models_load(const fs::path& dir, const std::vector<std::string>& texts, std::ostream& out) {
  const backends::TrainedModel model = backends::load_model(dir);
  out << fmt::format("backend: {}\nparameters: {}\nbest epoch: {}\ntraining data fingerprint: {}\n",
                     backends::to_string(model.kind()), model.classifier().parameters().count(), model.best_epoch(),
                     model.corpus_fingerprint());
  if (texts.empty()) return;
  std::vector<corpus::TextSample> samples;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    corpus::TextSample s;
    s.id = fmt::format("input:{}", i);
    s.text = unicode::normalize_text(texts[i]);
    samples.push_back(std::move(s));
  }
  const auto batch = backends::predict_proba(model, samples);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto& p = batch.predictions[i];
    out << fmt::format("{}\tp_deceptive={:.4f}\t{}\n", to_string(p.argmax()), p.probs[1], texts[i]);
  }
}

}  // namespace deceptkit::cli
