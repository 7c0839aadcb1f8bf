#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "deceptkit/common/rng.hpp"
#include "deceptkit/nn/layers.hpp"

namespace deceptkit::nn {

struct EncoderConfig {
  int vocab_size = 30522;
  int hidden = 768;
  int layers = 12;
  int heads = 12;
  int intermediate = 3072;
  int max_position = 512;
  int type_vocab = 2;
  double layer_norm_eps = 1e-12;
  double dropout = 0.1;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  // Reads a pretrained checkpoint's config.json (BERT field names).
  static EncoderConfig from_checkpoint_config(const nlohmann::json& j);
};

struct EncoderBlockCache {
  AttentionCache attention;
  Matrix attention_mask;
  LayerNormCache attention_norm;
  Matrix hidden;  // output of the first layer norm
  Matrix intermediate;  // before the activation
  Matrix activated;
  Matrix output_mask;
  LayerNormCache output_norm;
};

struct EncoderCache {
  std::vector<int> ids;
  Matrix embedding_mask;
  LayerNormCache embedding_norm;
  std::vector<EncoderBlockCache> blocks;
};

// Post-norm bidirectional transformer encoder (BERT layout). Parameter
// names follow the usual checkpoint naming under the given prefix so
// pretrained weights map one to one.
class TransformerEncoder {
 public:
  TransformerEncoder(ParameterStore& store, const std::string& prefix, const EncoderConfig& config);

  void init(Rng& rng);

  // Encodes one unpadded token sequence to (tokens x hidden). With rng set
  // dropout is active (training); `cache` records what backward() needs and
  // `attention` receives each block's per-head attention matrices.
  Matrix forward(const std::vector<int>& ids, Rng* rng, EncoderCache* cache,
                 std::vector<std::vector<Matrix>>* attention = nullptr) const;
  void backward(const Matrix& dout, const EncoderCache& cache) const;

  // Loads weights from a pretrained safetensors file. Linear weights are
  // stored transposed in checkpoints; names may carry a "bert." prefix and
  // older "gamma"/"beta" layer-norm names.
  void load_checkpoint(const std::filesystem::path& weights) const;

  const EncoderConfig& config() const { return config_; }
  const std::string& prefix() const { return prefix_; }

 private:
  struct Block {
    MultiHeadSelfAttention attention;
    LayerNorm attention_norm;
    Linear intermediate;
    Linear output;
    LayerNorm output_norm;
  };

  ParameterStore& store_;
  std::string prefix_;
  EncoderConfig config_;
  Embedding words_, positions_, types_;
  LayerNorm embedding_norm_;
  std::vector<Block> blocks_;
};

}  // namespace deceptkit::nn
