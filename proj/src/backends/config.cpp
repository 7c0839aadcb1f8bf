#include "deceptkit/backends/config.hpp"

#include "deceptkit/common/error.hpp"

namespace deceptkit::backends {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::kCharCnn: return "char_cnn";
    case BackendKind::kTransformerFinetune: return "transformer_finetune";
    case BackendKind::kSentenceEncoderHead: return "sentence_encoder_head";
  }
  return "unknown";
}

BackendKind parse_backend_kind(std::string_view text) {
  for (BackendKind kind : kAllBackends) {
    if (to_string(kind) == text) return kind;
  }
  throw ConfigError("unknown backend kind '" + std::string(text) +
                    "' (expected char_cnn, transformer_finetune or sentence_encoder_head)");
}

std::string_view display_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::kCharCnn: return "Char-CNN";
    case BackendKind::kTransformerFinetune: return "BERT";
    case BackendKind::kSentenceEncoderHead: return "SBERT";
  }
  return "unknown";
}

namespace {

// Geometry of a randomly initialized encoder, used when no pretrained
// checkpoint is configured.
json scratch_encoder() {
  return {{"vocab_size", 4000}, {"hidden", 64}, {"layers", 2}, {"heads", 4}, {"intermediate", 128},
          {"max_position", 512}};
}

json common_training(int epochs, int batch_size, double learning_rate) {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"lr_schedule", "constant"},
          {"clip_norm", 0.0},
          {"weight_decay", 0.0},
          {"patience", 2},
          {"stop_on_perfect_train", false}};
}

json default_hyperparams(BackendKind kind) {
  switch (kind) {
    case BackendKind::kCharCnn: {
      json h = common_training(10, 128, 5e-4);
      h["alphabet"] = "";
      h["max_length"] = 1014;
      h["filters"] = 256;
      h["conv_layers"] = json::array({{{"width", 7}, {"pool", 3}},
                                      {{"width", 7}, {"pool", 3}},
                                      {{"width", 3}, {"pool", 1}},
                                      {{"width", 3}, {"pool", 1}},
                                      {{"width", 3}, {"pool", 1}},
                                      {{"width", 3}, {"pool", 3}}});
      h["fc_units"] = 1024;
      h["dropout"] = 0.5;
      return h;
    }
    case BackendKind::kTransformerFinetune: {
      json h = common_training(3, 16, 3e-5);
      h["lr_schedule"] = "linear";
      h["clip_norm"] = 1.0;
      h["weight_decay"] = 0.01;
      h["checkpoint"] = "bert-base-uncased";
      h["lowercase"] = true;
      h["dropout"] = 0.1;
      h["scratch_encoder"] = scratch_encoder();
      return h;
    }
    case BackendKind::kSentenceEncoderHead: {
      json h = common_training(10, 16, 2e-5);
      h["lr_schedule"] = "linear";
      h["clip_norm"] = 1.0;
      h["head_learning_rate"] = 1e-3;
      h["checkpoint"] = "sentence-transformers/all-MiniLM-L6-v2";
      h["lowercase"] = true;
      h["pooling"] = "mean";
      h["hidden_units"] = 256;
      h["dropout"] = 0.1;
      h["freeze_encoder"] = false;
      h["scratch_encoder"] = scratch_encoder();
      return h;
    }
  }
  return json::object();
}

json default_grid(BackendKind kind) {
  switch (kind) {
    case BackendKind::kCharCnn:
      return {{"dropout", {0.3, 0.5}}, {"fc_units", {512, 1024}}, {"batch_size", {64, 128}}};
    case BackendKind::kTransformerFinetune:
      return {{"epochs", {2, 3, 4}}, {"learning_rate", {2e-5, 3e-5, 5e-5}}};
    case BackendKind::kSentenceEncoderHead:
      return {{"hidden_units", {128, 256}}, {"batch_size", {16, 32}}, {"epochs", {5, 10, 20}}};
  }
  return json::object();
}

void validate(const BackendConfig& c) {
  const json defaults = default_hyperparams(c.kind);
  for (const auto& [key, value] : c.hyperparams.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError("unknown hyperparameter '" + key + "' for backend " + std::string(to_string(c.kind)));
    }
  }
  for (const auto& [key, values] : c.grid.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError("grid names unknown hyperparameter '" + key + "' for backend " +
                        std::string(to_string(c.kind)));
    }
    if (!values.is_array() || values.empty()) {
      throw ConfigError("grid entry '" + key + "' must be a non-empty list of candidates");
    }
  }
  if (c.get<int>("epochs") < 1) throw ConfigError("epochs must be at least 1");
  if (c.get<int>("batch_size") < 1) throw ConfigError("batch_size must be at least 1");
  const auto schedule = c.get<std::string>("lr_schedule");
  if (schedule != "constant" && schedule != "linear") {
    throw ConfigError("lr_schedule must be 'constant' or 'linear', got '" + schedule + "'");
  }
  if (c.kind == BackendKind::kSentenceEncoderHead) {
    const auto pooling = c.get<std::string>("pooling");
    if (pooling != "mean" && pooling != "max" && pooling != "min") {
      throw ConfigError("pooling must be mean, max or min, got '" + pooling + "'");
    }
  }
  if (c.max_token_limit < 3 || c.max_token_limit > kMaxEncoderTokens) {
    throw ConfigError("max_token_limit must be between 3 and " + std::to_string(kMaxEncoderTokens));
  }
}

}  // namespace

BackendConfig BackendConfig::defaults(BackendKind kind) {
  BackendConfig c;
  c.kind = kind;
  c.hyperparams = default_hyperparams(kind);
  c.grid = default_grid(kind);
  return c;
}

BackendConfig BackendConfig::from_json(const json& j) {
  try {
    BackendConfig c = defaults(parse_backend_kind(j.at("backend_kind").get<std::string>()));
    if (j.contains("hyperparams")) {
      for (const auto& [key, value] : j["hyperparams"].items()) {
        if (!c.hyperparams.contains(key)) {
          throw ConfigError("unknown hyperparameter '" + key + "' for backend " + std::string(to_string(c.kind)));
        }
        if (c.hyperparams[key].is_object() && value.is_object()) {
          c.hyperparams[key].merge_patch(value);
        } else {
          c.hyperparams[key] = value;
        }
      }
    }
    if (j.contains("grid")) c.grid = j["grid"];
    c.max_token_limit = j.value("max_token_limit", c.max_token_limit);
    c.seed = j.value("seed", c.seed);
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("backend config: ") + e.what());
  }
}

json BackendConfig::to_json() const {
  return {{"backend_kind", to_string(kind)},
          {"hyperparams", hyperparams},
          {"grid", grid},
          {"max_token_limit", max_token_limit},
          {"seed", seed}};
}

BackendConfig BackendConfig::with(const json& overrides) const {
  BackendConfig c = *this;
  for (const auto& [key, value] : overrides.items()) {
    if (!c.hyperparams.contains(key)) {
      throw ConfigError("unknown hyperparameter '" + key + "' for backend " + std::string(to_string(kind)));
    }
    c.hyperparams[key] = value;
  }
  validate(c);
  return c;
}

std::vector<json> BackendConfig::grid_points() const {
  std::vector<json> points = {json::object()};
  for (const auto& [key, values] : grid.items()) {
    std::vector<json> next;
    for (const auto& point : points) {
      for (const auto& v : values) {
        json p = point;
        p[key] = v;
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  return points;
}

}  // namespace deceptkit::backends
