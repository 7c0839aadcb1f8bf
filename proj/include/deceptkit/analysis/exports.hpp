#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "deceptkit/analysis/metrics.hpp"
#include "deceptkit/analysis/tsne.hpp"
#include "deceptkit/backends/model.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::analysis {

struct EmbeddingRow {
  std::string sample_id;
  double x = 0.0;
  double y = 0.0;
  Label gold = Label::kNonDeceptive;
  Label predicted = Label::kNonDeceptive;
  bool misclassified = false;
};

struct EmbeddingExport {
  std::vector<EmbeddingRow> rows;  // sample order
  nn::Matrix vectors;              // one sentence vector per row
  backends::BackendKind backend = backends::BackendKind::kTransformerFinetune;
  TsneOptions tsne;
  TsneMethod method = TsneMethod::kExact;
};

// Sentence vectors of an encoder model (the classification token's final
// hidden state for the transformer backend, the pooled vector for the
// sentence-encoder backend) projected to two dimensions with t-SNE.
EmbeddingExport export_embeddings(const backends::TrainedModel& model, std::span<const corpus::TextSample> samples,
                                  std::span<const LabeledPrediction> predictions, const TsneOptions& options = {});

// Writes embeddings.csv, vectors.safetensors and manifest.json into `dir`.
void write_embedding_export(const EmbeddingExport& exported, const std::filesystem::path& dir);

struct AttentionExport {
  std::string text;
  std::vector<std::string> tokens;
  nn::Matrix weights;  // heads x tokens, from the classification token, final layer
  std::vector<double> head_mean;
  bool truncated = false;

  nlohmann::ordered_json to_json() const;
};

// Requires the transformer backend.
AttentionExport export_attention(const backends::TrainedModel& model, std::string_view text);

void write_attention_export(const AttentionExport& exported, const std::filesystem::path& json_path);

}  // namespace deceptkit::analysis
