#include "deceptkit/backends/classifier.hpp"

#include "deceptkit/backends/char_cnn.hpp"
#include "deceptkit/backends/encoder_models.hpp"
#include "deceptkit/common/error.hpp"

namespace deceptkit::backends {

std::unique_ptr<Classifier> make_classifier(const BackendConfig& config, std::span<const corpus::TextSample> train,
                                            Rng& rng) {
  const auto& h = config.hyperparams;
  switch (config.kind) {
    case BackendKind::kCharCnn: {
      auto net = std::make_unique<CharCnnClassifier>(CharCnnGeometry::from_hyperparams(h));
      net->init(rng);
      return net;
    }
    case BackendKind::kTransformerFinetune: {
      EncoderSetup setup = prepare_encoder(config, train);
      const auto weights = setup.weights;
      auto net = std::make_unique<TransformerClassifier>(std::move(setup), config.max_token_limit,
                                                         h.at("dropout").get<double>());
      net->init(rng, weights);
      return net;
    }
    case BackendKind::kSentenceEncoderHead: {
      EncoderSetup setup = prepare_encoder(config, train);
      const auto weights = setup.weights;
      auto net = std::make_unique<SentenceHeadClassifier>(
          std::move(setup), config.max_token_limit, parse_pooling(h.at("pooling").get<std::string>()),
          h.at("hidden_units").get<int>(), h.at("dropout").get<double>(), h.at("freeze_encoder").get<bool>());
      net->init(rng, weights);
      net->set_head_lr_scale(h.at("head_learning_rate").get<double>() / h.at("learning_rate").get<double>());
      return net;
    }
  }
  throw UnsupportedBackendError("unknown backend kind");
}

std::unique_ptr<Classifier> restore_classifier(BackendKind kind, const nlohmann::json& a,
                                               const std::filesystem::path& dir) {
  try {
    if (kind == BackendKind::kCharCnn) return std::make_unique<CharCnnClassifier>(CharCnnGeometry::from_json(a));
    EncoderSetup setup{nn::EncoderConfig::from_json(a.at("encoder")),
                       WordPieceTokenizer::from_file(dir / "vocab.txt", a.at("lowercase").get<bool>()),
                       a.at("checkpoint").get<std::string>(), std::nullopt};
    const auto max_tokens = a.at("max_tokens").get<std::size_t>();
    if (kind == BackendKind::kTransformerFinetune) {
      return std::make_unique<TransformerClassifier>(std::move(setup), max_tokens, a.at("dropout").get<double>());
    }
    return std::make_unique<SentenceHeadClassifier>(std::move(setup), max_tokens,
                                                    parse_pooling(a.at("pooling").get<std::string>()),
                                                    a.at("hidden_units").get<int>(), a.at("dropout").get<double>(),
                                                    a.at("freeze_encoder").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": bad architecture record: " + e.what());
  }
}

}  // namespace deceptkit::backends
