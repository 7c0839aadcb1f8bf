#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "deceptkit/cli/commands.hpp"
#include "deceptkit/common/fs.hpp"

namespace {

using namespace deceptkit;

std::vector<int> parse_fractions(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("--fractions expects comma-separated integers, got '" + text + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Holistic deception detection: ingest corpora, train backends, run protocols, analyze runs"};
  app.require_subcommand(1);
  std::string runs_root = "runs";
  std::string log_level = "info";
  app.add_option("--runs-dir", runs_root, "Run registry directory")->capture_default_str();
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  cli::IngestOptions ingest;
  std::string ingest_catalog = ingest.catalog, ingest_raw = ingest.raw_root, ingest_out = ingest.out;
  auto* ingest_cmd = app.add_subcommand("ingest", "Build and validate the unified corpus");
  ingest_cmd->add_option("--config", ingest_catalog, "Dataset catalog")->capture_default_str();
  ingest_cmd->add_option("--raw", ingest_raw, "Root of the raw dataset directories")->capture_default_str();
  ingest_cmd->add_option("--out", ingest_out, "Corpus file to write")->capture_default_str();
  ingest_cmd->add_flag("--fixture", ingest.fixture, "Generate and ingest the synthetic mini corpus");
  ingest_cmd->add_flag("--allow-warnings", ingest.allow_warnings, "Write the corpus even when validation flags problems");
  ingest_cmd->add_option("--seed", ingest.seed, "Seed for fixture generation and the leakage check");

  cli::RunCommandOptions run;
  std::string run_plan, run_backends, run_fractions;
  std::uint64_t run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Execute an experiment plan as a new run");
  run_cmd->add_option("--config", run_plan, "Experiment plan");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Run this single seed instead of the plan's seeds");
  run_cmd->add_option("--backends", run_backends, "Comma-separated subset of the plan's backends");
  run_cmd->add_option("--fractions", run_fractions, "Comma-separated in-domain percentages (new_event plans)");
  run_cmd->add_option("--resume", run.resume, "Continue an unfinished run");

  std::string report_id, report_out;
  auto* report_cmd = app.add_subcommand("report", "Render a complete run as Markdown");
  report_cmd->add_option("run_id", report_id, "Run id")->required();
  report_cmd->add_option("--out", report_out, "Also write the report to this file");

  cli::AnalyzeOptions analyze;
  std::string keywords;
  std::uint64_t analyze_seed = 0;
  int analyze_fraction = 0;
  auto* analyze_cmd = app.add_subcommand("analyze", "Bias audit, error samples and exports for a complete run");
  analyze_cmd->add_option("run_id", analyze.run_id, "Run id")->required();
  analyze_cmd->add_option("--model", analyze.model, "char_cnn, sentence_encoder_head, transformer_finetune or ensemble");
  auto* analyze_seed_opt = analyze_cmd->add_option("--seed", analyze_seed, "Seed (default: the plan's first)");
  auto* analyze_fraction_opt = analyze_cmd->add_option("--fraction", analyze_fraction, "Fraction of a new_event run");
  analyze_cmd->add_option("--fpr-keywords", keywords, "Comma-separated keywords for the FPR audit");
  analyze_cmd->add_option("--errors", analyze.errors, "false_positive or false_negative");
  analyze_cmd->add_option("-k", analyze.k, "Number of error samples")->capture_default_str();
  analyze_cmd->add_flag("--embeddings", analyze.embeddings, "t-SNE export of encoder sentence vectors");
  analyze_cmd->add_option("--perplexity", analyze.perplexity, "t-SNE perplexity")->capture_default_str();
  analyze_cmd->add_option("--attention", analyze.attention, "Export classification-token attention for this text");

  auto* models_cmd = app.add_subcommand("models", "List, export or load saved models");
  models_cmd->require_subcommand(1);
  models_cmd->add_subcommand("list", "Saved models of complete runs");
  std::string export_id, export_backend, export_dest;
  std::uint64_t export_seed = 0;
  int export_fraction = 0;
  auto* export_cmd = models_cmd->add_subcommand("export", "Copy a saved model out of a run");
  export_cmd->add_option("run_id", export_id, "Run id")->required();
  export_cmd->add_option("--backend", export_backend, "Backend name")->required();
  auto* export_seed_opt = export_cmd->add_option("--seed", export_seed, "Seed (default: the plan's first)");
  auto* export_fraction_opt = export_cmd->add_option("--fraction", export_fraction, "Fraction of a new_event run");
  export_cmd->add_option("--out", export_dest, "Destination directory")->required();
  std::string load_dir;
  std::vector<std::string> load_texts;
  auto* load_cmd = models_cmd->add_subcommand("load", "Load a model directory and optionally classify texts");
  load_cmd->add_option("dir", load_dir, "Model directory")->required();
  load_cmd->add_option("--text", load_texts, "Text to classify (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitValidation;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (ingest_cmd->parsed()) {
      ingest.catalog = ingest_catalog;
      ingest.raw_root = ingest_raw;
      ingest.out = ingest_out;
      return cli::cmd_ingest(ingest, std::cout);
    }
    if (run_cmd->parsed()) {
      run.plan = run_plan;
      run.runs_root = runs_root;
      if (*seed_opt) run.seed = run_seed;
      if (!run_backends.empty()) run.backends = CLI::detail::split(run_backends, ',');
      if (!run_fractions.empty()) run.fractions = parse_fractions(run_fractions);
      cli::cmd_run(run, std::cout);
      return cli::kExitOk;
    }
    if (report_cmd->parsed()) {
      const std::string text = cli::cmd_report(runs_root, report_id);
      std::cout << text;
      if (!report_out.empty()) write_file_atomic(report_out, text);
      return cli::kExitOk;
    }
    if (analyze_cmd->parsed()) {
      analyze.runs_root = runs_root;
      if (*analyze_seed_opt) analyze.seed = analyze_seed;
      if (*analyze_fraction_opt) analyze.fraction = analyze_fraction;
      if (!keywords.empty()) analyze.fpr_keywords = CLI::detail::split(keywords, ',');
      cli::cmd_analyze(analyze, std::cout);
      return cli::kExitOk;
    }
    if (models_cmd->got_subcommand("list")) {
      cli::cmd_models_list(runs_root, std::cout);
    } else if (export_cmd->parsed()) {
      std::optional<std::uint64_t> seed;
      std::optional<int> fraction;
      if (*export_seed_opt) seed = export_seed;
      if (*export_fraction_opt) fraction = export_fraction;
      cli::cmd_models_export(runs_root, export_id, export_backend, seed, fraction, export_dest, std::cout);
    } else if (load_cmd->parsed()) {
      cli::cmd_models_load(load_dir, load_texts, std::cout);
    }
    return cli::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  }
}
