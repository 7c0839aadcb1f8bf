#include "deceptkit/analysis/exports.hpp"

#include <map>
#include <sstream>

#include <fmt/format.h>

#include "deceptkit/backends/encoder_models.hpp"
#include "deceptkit/common/csv.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/nn/safetensors.hpp"

namespace deceptkit::analysis {

namespace fs = std::filesystem;
using backends::BackendKind;
using nlohmann::json;

namespace {

nn::RowVector sentence_vector(const backends::Classifier& net, const std::string& text) {
  switch (net.kind()) {
    case BackendKind::kTransformerFinetune:
      return dynamic_cast<const backends::TransformerClassifier&>(net).cls_embedding(text);
    case BackendKind::kSentenceEncoderHead:
      return dynamic_cast<const backends::SentenceHeadClassifier&>(net).sentence_embedding(text);
    case BackendKind::kCharCnn:
      break;
  }
  throw UnsupportedBackendError("embedding export needs an encoder backend, got " +
                                std::string(backends::to_string(net.kind())));
}

}  // namespace

EmbeddingExport export_embeddings(const backends::TrainedModel& model, std::span<const corpus::TextSample> samples,
                                  std::span<const LabeledPrediction> predictions, const TsneOptions& options) {
  if (model.kind() == BackendKind::kCharCnn) {
    throw UnsupportedBackendError("embedding export needs an encoder backend, got char_cnn");
  }
  std::map<std::string, Label> predicted;
  for (const auto& p : predictions) {
    if (!predicted.emplace(p.sample_id, p.predicted).second) {
      throw DataError("sample '" + p.sample_id + "' is predicted twice");
    }
  }
  if (predicted.size() != samples.size()) {
    throw DataError(fmt::format("{} predictions for {} samples", predicted.size(), samples.size()));
  }

  EmbeddingExport out;
  out.backend = model.kind();
  out.tsne = options;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto it = predicted.find(samples[i].id);
    if (it == predicted.end()) throw DataError("no prediction for sample '" + samples[i].id + "'");
    const nn::RowVector v = sentence_vector(model.classifier(), samples[i].text);
    if (i == 0) out.vectors.resize(static_cast<Eigen::Index>(samples.size()), v.cols());
    out.vectors.row(static_cast<Eigen::Index>(i)) = v;
    out.rows.push_back({samples[i].id, 0.0, 0.0, samples[i].label, it->second, it->second != samples[i].label});
  }
  const TsneResult projected = tsne(out.vectors, options);
  out.method = projected.method;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    out.rows[i].x = projected.coordinates(static_cast<Eigen::Index>(i), 0);
    out.rows[i].y = projected.coordinates(static_cast<Eigen::Index>(i), 1);
  }
  return out;
}

void write_embedding_export(const EmbeddingExport& exported, const fs::path& dir) {
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "sample_id,x,y,gold,predicted,misclassified\n";
  for (const auto& r : exported.rows) {
    csv << csv_escape(r.sample_id) << ',' << fmt::format("{:.17g},{:.17g}", r.x, r.y) << ',' << to_string(r.gold)
        << ',' << to_string(r.predicted) << ',' << (r.misclassified ? "true" : "false") << '\n';
  }
  write_file_atomic(dir / "embeddings.csv", csv.str());
  nn::write_safetensors(dir / "vectors.safetensors", {{"vectors", &exported.vectors}},
                        {{"rows", "embeddings.csv"}, {"backend", std::string(backends::to_string(exported.backend))}});
  std::size_t errors = 0;
  for (const auto& r : exported.rows) errors += r.misclassified ? 1 : 0;
  json manifest = {{"backend", backends::to_string(exported.backend)},
                   {"samples", exported.rows.size()},
                   {"misclassified", errors},
                   {"vector_dimension", exported.vectors.cols()},
                   {"vectors", "vectors.safetensors"},
                   {"coordinates", "embeddings.csv"},
                   {"tsne", exported.tsne.to_json()},
                   {"tsne_method_used", to_string(exported.method)}};
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

AttentionExport export_attention(const backends::TrainedModel& model, std::string_view text) {
  if (model.kind() != BackendKind::kTransformerFinetune) {
    throw UnsupportedBackendError("attention export needs the transformer_finetune backend, got " +
                                  std::string(backends::to_string(model.kind())));
  }
  const auto& net = dynamic_cast<const backends::TransformerClassifier&>(model.classifier());
  const auto map = net.cls_attention(text);
  AttentionExport out;
  out.text = std::string(text);
  out.tokens = map.tokens;
  out.weights = map.weights;
  out.truncated = net.encode(text).truncated;
  const Eigen::RowVectorXd mean = map.weights.colwise().mean();
  out.head_mean.assign(mean.data(), mean.data() + mean.size());
  return out;
}

nlohmann::ordered_json AttentionExport::to_json() const {
  nlohmann::ordered_json heads = nlohmann::ordered_json::array();
  for (Eigen::Index h = 0; h < weights.rows(); ++h) {
    heads.push_back(std::vector<double>(weights.row(h).data(), weights.row(h).data() + weights.cols()));
  }
  return {{"text", text},        {"tokens", tokens},       {"heads", weights.rows()},
          {"truncated", truncated}, {"weights", heads},     {"head_mean", head_mean}};
}

void write_attention_export(const AttentionExport& exported, const fs::path& json_path) {
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  write_file_atomic(json_path, exported.to_json().dump(2) + "\n");
}

}  // namespace deceptkit::analysis
