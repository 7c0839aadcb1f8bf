#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deceptkit/backends/classifier.hpp"
#include "deceptkit/backends/wordpiece.hpp"
#include "deceptkit/nn/encoder.hpp"

namespace deceptkit::backends {

inline constexpr const char* kModelCacheEnv = "DECEPTKIT_MODEL_CACHE";

// Directory holding config.json, vocab.txt and model.safetensors for a
// pretrained encoder: `identifier` itself when it names a directory,
// otherwise $DECEPTKIT_MODEL_CACHE/<identifier>.
std::filesystem::path resolve_checkpoint(const std::string& identifier);

struct EncoderSetup {
  nn::EncoderConfig config;
  WordPieceTokenizer tokenizer;
  std::string checkpoint;  // empty for a randomly initialized encoder
  std::optional<std::filesystem::path> weights;
};

// Pretrained checkpoint when hyperparams["checkpoint"] is non-empty;
// otherwise a vocabulary built from `train` and the scratch geometry.
EncoderSetup prepare_encoder(const BackendConfig& config, std::span<const corpus::TextSample> train);

struct AttentionMap {
  std::vector<std::string> tokens;
  // heads x tokens: attention from the classification token, final layer.
  nn::Matrix weights;
};

// Common part of the two encoder backends.
class EncoderClassifier : public Classifier {
 public:
  const WordPieceTokenizer& tokenizer() const { return tokenizer_; }
  const nn::TransformerEncoder& encoder() const { return encoder_; }
  std::size_t max_tokens() const { return max_tokens_; }

  EncodedText encode(std::string_view text) const { return tokenizer_.encode(text, max_tokens_); }

  void save_assets(const std::filesystem::path& dir) const override;

 protected:
  EncoderClassifier(EncoderSetup setup, std::size_t max_tokens);
  void init_encoder(Rng& rng, const std::optional<std::filesystem::path>& weights);
  nlohmann::json encoder_architecture() const;

  WordPieceTokenizer tokenizer_;
  std::string checkpoint_;
  std::size_t max_tokens_;
  nn::TransformerEncoder encoder_;
};

// Fine-tunes the whole encoder with one linear layer on the classification
// token's final hidden vector.
class TransformerClassifier : public EncoderClassifier {
 public:
  TransformerClassifier(EncoderSetup setup, std::size_t max_tokens, double dropout);

  void init(Rng& rng, const std::optional<std::filesystem::path>& weights);

  BackendKind kind() const override { return BackendKind::kTransformerFinetune; }
  nn::RowVector logits(std::string_view text, bool* truncated = nullptr) const override;
  double accumulate(std::string_view text, int target, double scale, Rng& rng, int* predicted) override;
  nlohmann::json architecture() const override;

  // Final hidden vector of the classification token.
  nn::RowVector cls_embedding(std::string_view text) const;
  AttentionMap cls_attention(std::string_view text) const;

 private:
  double dropout_;
  nn::Linear classifier_;
};

enum class Pooling { kMean, kMax, kMin };

// Pools the encoder's token vectors into a sentence vector and classifies it
// with two ReLU hidden layers and a linear output layer.
class SentenceHeadClassifier : public EncoderClassifier {
 public:
  SentenceHeadClassifier(EncoderSetup setup, std::size_t max_tokens, Pooling pooling, int hidden_units,
                         double dropout, bool freeze_encoder);

  void init(Rng& rng, const std::optional<std::filesystem::path>& weights);
  // Scales the learning rate of the appended layers relative to the encoder.
  void set_head_lr_scale(double scale);

  BackendKind kind() const override { return BackendKind::kSentenceEncoderHead; }
  nn::RowVector logits(std::string_view text, bool* truncated = nullptr) const override;
  double accumulate(std::string_view text, int target, double scale, Rng& rng, int* predicted) override;
  nlohmann::json architecture() const override;

  nn::RowVector sentence_embedding(std::string_view text) const;
  bool frozen() const { return freeze_encoder_; }

 private:
  nn::RowVector pool(const nn::Matrix& tokens, std::vector<Eigen::Index>* argext) const;

  Pooling pooling_;
  int hidden_units_;
  double dropout_;
  bool freeze_encoder_;
  nn::Linear dense1_, dense2_, classifier_;
};

Pooling parse_pooling(const std::string& name);
std::string to_string(Pooling pooling);

}  // namespace deceptkit::backends
