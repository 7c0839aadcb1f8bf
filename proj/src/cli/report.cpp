#include "deceptkit/cli/report.hpp"

#include <fmt/format.h>

#include "deceptkit/backends/config.hpp"
#include "deceptkit/corpus/types.hpp"
#include "deceptkit/experiments/plan.hpp"

namespace deceptkit::cli {

using nlohmann::json;

namespace {

struct Column {
  std::string model;
  std::string title;
};

std::vector<Column> table_columns() {
  return {{"char_cnn", "Char-CNN"},
          {"sentence_encoder_head", "SBERT"},
          {"transformer_finetune", "BERT"},
          {experiments::kEnsembleModel, "Ensemble"}};
}

std::string percent(const json& mean, const std::string& model, const std::string& row, const char* metric) {
  if (!mean.contains(model) || !mean[model].contains(row)) return "n/a";
  return fmt::format("{:.2f}", 100.0 * mean[model][row][metric].get<double>());
}

std::string render_general(const json& result) {
  const json& mean = result.at("mean");
  std::string out = "| Dataset |";
  std::string rule = "|---|";
  for (const auto& c : table_columns()) {
    out += fmt::format(" {0} Acc (%) | {0} F1 (%) |", c.title);
    rule += "---:|---:|";
  }
  out += "\n" + rule + "\n";
  auto row = [&](const std::string& title, const std::string& key) {
    out += "| " + title + " |";
    for (const auto& c : table_columns()) {
      out += fmt::format(" {} | {} |", percent(mean, c.model, key, "accuracy"), percent(mean, c.model, key, "f1"));
    }
    out += "\n";
  };
  for (const auto id : corpus::kAllDatasets) {
    row(std::string(corpus::dataset_display_name(id)), std::string(corpus::dataset_key(id)));
  }
  row("Total", "total");
  out += "\nTotal pools every test prediction. Size-weighted mean of the per-dataset scores:\n\n";
  out += "| Model | Acc (%) | F1 (%) |\n|---|---:|---:|\n";
  for (const auto& c : table_columns()) {
    if (!mean.contains(c.model)) continue;
    out += fmt::format("| {} | {} | {} |\n", c.title, percent(mean, c.model, "total_weighted", "accuracy"),
                       percent(mean, c.model, "total_weighted", "f1"));
  }
  if (result.value("truncated_inputs", 0) > 0) {
    out += fmt::format("\n{} test inputs were truncated to the encoder token limit.\n",
                       result["truncated_inputs"].get<std::size_t>());
  }
  return out;
}

std::string render_new_event(const json& result, const json& plan) {
  const json& mean = result.at("mean");
  std::string out = "| In-domain data (%) |";
  std::string rule = "|---:|";
  std::vector<Column> columns;
  for (const auto& c : table_columns()) {
    if (mean.contains(c.model)) {
      columns.push_back(c);
      out += " " + c.title + " F1 (%) |";
      rule += "---:|";
    }
  }
  out += "\n" + rule + "\n";
  for (const auto& f : plan.at("new_event").at("fractions")) {
    const std::string key = std::to_string(f.get<int>());
    out += "| " + key + " |";
    for (const auto& c : columns) out += " " + percent(mean, c.model, key, "f1") + " |";
    out += "\n";
  }
  const json& imp = result.at("improvements");
  if (!imp.empty()) {
    out += "\nF1 change from 0% to the next fraction (points):\n\n| Model | Delta |\n|---|---:|\n";
    for (const auto& i : imp) {
      std::string title = i.at("model").get<std::string>();
      for (const auto& c : table_columns()) {
        if (c.model == title) title = c.title;
      }
      out += fmt::format("| {} | {:+.2f} |\n", title, i.at("delta").get<double>());
    }
    out += fmt::format("| Mean of backends | {:+.2f} |\n", result.at("mean_improvement").get<double>());
  }
  return out;
}

}  // namespace

std::string render_report(const RunEntry& entry, const json& result_doc) {
  const json& plan = entry.plan;
  const json& result = result_doc.at("result");
  std::string seeds;
  for (const auto& s : plan.at("seeds")) seeds += (seeds.empty() ? "" : ", ") + std::to_string(s.get<std::uint64_t>());
  std::string out = fmt::format("# {} ({})\n\nProtocol: {}. Seeds: {}. Scores are means over seeds.\n\n",
                                plan.at("name").get<std::string>(), entry.id, plan.at("protocol").get<std::string>(),
                                seeds);
  out += result.at("protocol") == "general" ? render_general(result) : render_new_event(result, plan);
  out += fmt::format("\nWall clock: {:.1f} s.\n", result.value("wall_seconds", 0.0));
  return out;
}

}  // namespace deceptkit::cli
