#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "deceptkit/backends/char_cnn.hpp"
#include "deceptkit/backends/cross_validate.hpp"
#include "deceptkit/backends/encoder_models.hpp"
#include "deceptkit/backends/model_io.hpp"
#include "deceptkit/backends/wordpiece.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/hash.hpp"
#include "deceptkit/nn/safetensors.hpp"
#include "deceptkit/nn/layers.hpp"
#include "gradcheck.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"
#include "tiny_configs.hpp"

using namespace deceptkit;
using namespace deceptkit::backends;
using nlohmann::json;
using deceptkit::testing::synthetic_samples;
using deceptkit::testing::TempDir;
using deceptkit::testing::tiny_char_cnn;
using deceptkit::testing::tiny_encoder;

namespace {

std::filesystem::path tiny_bert_dir() { return deceptkit::testing::source_dir() / "tests" / "data" / "tiny_bert"; }

double max_prob_difference(const PredictionBatch& a, const PredictionBatch& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.predictions.size(); ++i) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      worst = std::max(worst, std::abs(a.predictions[i].probs[c] - b.predictions[i].probs[c]));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("backend configuration") {
  CHECK(parse_backend_kind("transformer_finetune") == BackendKind::kTransformerFinetune);
  CHECK_THROWS_AS(parse_backend_kind("svm"), ConfigError);
  CHECK(display_name(BackendKind::kSentenceEncoderHead) == "SBERT");

  const auto cnn = BackendConfig::defaults(BackendKind::kCharCnn);
  CHECK(cnn.get<int>("max_length") == 1014);
  CHECK(cnn.get<int>("filters") == 256);
  CHECK(cnn.grid_points().size() == 8);
  const auto bert = BackendConfig::defaults(BackendKind::kTransformerFinetune);
  CHECK(bert.get<int>("batch_size") == 16);
  CHECK(bert.get<double>("learning_rate") == doctest::Approx(3e-5));
  CHECK(bert.grid_points().size() == 9);
  CHECK(BackendConfig::defaults(BackendKind::kSentenceEncoderHead).grid_points().size() == 12);

  CHECK_THROWS_AS(BackendConfig::from_json({{"backend_kind", "char_cnn"}, {"hyperparams", {{"filtrs", 3}}}}), ConfigError);
  CHECK_THROWS_AS(BackendConfig::from_json({{"backend_kind", "char_cnn"}, {"grid", {{"dropout", json::array()}}}}),
                  ConfigError);
  const auto round = BackendConfig::from_json(tiny_char_cnn().to_json());
  CHECK(round.hyperparams == tiny_char_cnn().hyperparams);
  CHECK(round.seed == 7);
}

TEST_CASE("character encoding") {
  const Alphabet alphabet(default_alphabet());
  CHECK(alphabet.size() == 70);
  const auto ab = encode_chars("ab", alphabet, 4);
  CHECK(ab.indices == std::vector<int>{0, 1, Alphabet::kBlank, Alphabet::kBlank});
  CHECK(encode_chars("AB", alphabet, 4).indices == ab.indices);
  CHECK(encode_chars("abcdef", alphabet, 3).indices == std::vector<int>{0, 1, 2});
  CHECK(encode_chars("\xE6\x97\xA5", alphabet, 2).indices == std::vector<int>{Alphabet::kBlank, Alphabet::kBlank});
  CHECK(encode_chars("\n", alphabet, 1).indices[0] == 69);
  CHECK(encode_chars("-", alphabet, 1).indices[0] == alphabet.index(U'-'));
  CHECK_THROWS_AS(encode_chars("a", alphabet, 0), ConfigError);
}

TEST_CASE("Char-CNN forward shapes") {
  CharCnnGeometry g = CharCnnGeometry::from_hyperparams(tiny_char_cnn().hyperparams);
  CharCnnClassifier net(g);
  Rng rng(1);
  net.init(rng);
  std::vector<CharEncoding> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(net.encode("sample text number " + std::to_string(i)));
  const auto logits = net.forward(batch);
  CHECK(logits.rows() == 8);
  CHECK(logits.cols() == 2);

  const std::vector<CharEncoding> blank = {net.encode("")};
  CHECK(net.forward(blank).allFinite());

  const std::vector<CharEncoding> wrong = {encode_chars("abc", Alphabet(default_alphabet()), 10)};
  try {
    net.forward(wrong);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).rfind("conv1", 0) == 0);
  }

  CharCnnGeometry too_short = g;
  too_short.max_length = 6;
  CHECK_THROWS_WITH_AS(too_short.flattened_length(), doctest::Contains("conv2"), ShapeError);

  CharCnnGeometry full;
  full.conv_layers = CharCnnGeometry::from_hyperparams(BackendConfig::defaults(BackendKind::kCharCnn).hyperparams)
                         .conv_layers;
  CHECK(full.flattened_length() == 34 * 256);
}

TEST_CASE("Char-CNN gradients match finite differences") {
  CharCnnGeometry g;
  g.max_length = 32;
  g.filters = 8;
  g.conv_layers = {{3, 2}, {3, 2}};
  g.fc_units = 16;
  g.dropout = 0.5;
  CharCnnClassifier net(g);
  Rng rng(3);
  net.init(rng);
  const auto input = net.encode("win a free prize, call now!!");
  net.parameters().zero_grad();
  net.loss(input, 1, true);
  const auto result = deceptkit::testing::check_parameter_gradients(net.parameters(),
                                                                     [&] { return net.loss(input, 1, false); });
  CHECK_MESSAGE(result.max_relative_error <= 1e-4, result.worst);
  CHECK(result.checked == net.parameters().count());
}

TEST_CASE("encoder classifiers' gradients match finite differences") {
  const auto train = synthetic_samples(20, 1);
  for (BackendKind kind : {BackendKind::kTransformerFinetune, BackendKind::kSentenceEncoderHead}) {
    CAPTURE(to_string(kind));
    BackendConfig config = tiny_encoder(kind, 1, 0.0);
    if (kind == BackendKind::kSentenceEncoderHead) config.hyperparams["pooling"] = "max";
    Rng rng(2);
    auto net = make_classifier(config, train, rng);
    const std::string text = "claim your free prize today";
    net->parameters().zero_grad();
    net->accumulate(text, 1, 1.0, rng, nullptr);
    auto loss = [&] {
      nn::RowVector d;
      return nn::softmax_cross_entropy(net->logits(text), 1, &d);
    };
    const auto result = deceptkit::testing::check_parameter_gradients(net->parameters(), loss);
    CHECK_MESSAGE(result.max_relative_error <= 1e-4, result.worst);
  }
}

TEST_CASE("WordPiece tokenizer matches the reference tokenizer") {
  const auto tok = WordPieceTokenizer::from_file(tiny_bert_dir() / "vocab.txt", true);
  const auto expected = json::parse(read_file(tiny_bert_dir() / "expected.json"));
  for (const auto& record : expected) {
    const auto encoded = tok.encode(record["text"].get<std::string>(), 512);
    CHECK(encoded.tokens == record["tokens"].get<std::vector<std::string>>());
    CHECK(encoded.ids == record["ids"].get<std::vector<int>>());
    CHECK_FALSE(encoded.truncated);
  }
}

TEST_CASE("encoder inputs are truncated to the token limit") {
  const auto train = synthetic_samples(20, 2);
  std::string long_text;
  for (int i = 0; i < 600; ++i) long_text += "budget ";
  const auto tok = WordPieceTokenizer::build(std::vector<std::string>{long_text}, 50, true);
  const auto encoded = tok.encode(long_text, 512);
  CHECK(encoded.ids.size() == 512);
  CHECK(encoded.full_length == 602);
  CHECK(encoded.truncated);
  CHECK(encoded.ids.front() == tok.cls_id());
  CHECK(encoded.ids.back() == tok.sep_id());

  Rng rng(1);
  auto net = make_classifier(tiny_encoder(BackendKind::kTransformerFinetune), train, rng);
  std::vector<corpus::TextSample> inputs = {train[0], train[1]};
  inputs[1].text = long_text;
  const auto batch = predict_proba(*net, inputs);
  CHECK(batch.truncated == 1);
  CHECK(std::isfinite(batch.predictions[1].probs[0]));
}

TEST_CASE("pretrained checkpoints are resolved and loaded") {
  BackendConfig config = BackendConfig::defaults(BackendKind::kTransformerFinetune);
  config.hyperparams["checkpoint"] = tiny_bert_dir().string();
  CHECK_THROWS_AS(prepare_encoder(config, {}), ConfigError);  // position table shorter than 512
  config.max_token_limit = 64;
  Rng rng(1);
  const auto train = synthetic_samples(4, 1);
  auto net = make_classifier(config, train, rng);
  const auto& transformer = dynamic_cast<const TransformerClassifier&>(*net);
  const auto expected = json::parse(read_file(tiny_bert_dir() / "expected.json"));
  const auto attention = transformer.cls_attention(expected[0]["text"].get<std::string>());
  CHECK(attention.tokens == expected[0]["tokens"].get<std::vector<std::string>>());
  const auto ref = expected[0]["cls_attention"].get<std::vector<std::vector<double>>>();
  for (std::size_t h = 0; h < ref.size(); ++h) {
    for (std::size_t t = 0; t < ref[h].size(); ++t) CHECK(std::abs(attention.weights(h, t) - ref[h][t]) < 1e-5);
  }

  config.hyperparams["checkpoint"] = "no-such-model";
  ::setenv(kModelCacheEnv, tiny_bert_dir().parent_path().c_str(), 1);
  CHECK_THROWS_WITH_AS(prepare_encoder(config, {}), doctest::Contains("no-such-model"), ConfigError);
  config.hyperparams["checkpoint"] = "tiny_bert";
  CHECK(resolve_checkpoint("tiny_bert") == tiny_bert_dir());
  CHECK_NOTHROW(prepare_encoder(config, {}));
  ::unsetenv(kModelCacheEnv);
}

TEST_CASE("training rejects empty and overlapping data") {
  const auto train = synthetic_samples(10, 1);
  CHECK_THROWS_AS(train_backend(tiny_char_cnn(), {}, train), TrainingError);
  const std::vector<corpus::TextSample> val = {train[3]};
  CHECK_THROWS_WITH_AS(train_backend(tiny_char_cnn(), train, val), doctest::Contains(train[3].id.c_str()), SplitError);
}

TEST_CASE("training is reproducible and learns a separable task") {
  const auto train = synthetic_samples(64, 1, "tr");
  const auto val = synthetic_samples(16, 2, "va");
  const auto test = synthetic_samples(40, 3, "te");
  BackendConfig config = tiny_char_cnn();
  config.hyperparams["epochs"] = 8;
  config.hyperparams["patience"] = 8;
  const auto a = train_backend(config, train, val);
  const auto b = train_backend(config, train, val);
  CHECK(max_prob_difference(predict_proba(a, test), predict_proba(b, test)) == 0.0);
  CHECK(a.history().size() == b.history().size());

  std::size_t correct = 0;
  const auto batch = predict_proba(a, test);
  for (std::size_t i = 0; i < test.size(); ++i) correct += batch.predictions[i].argmax() == test[i].label ? 1 : 0;
  CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) >= 0.75);

  config.seed = 8;
  const auto c = train_backend(config, train, val);
  CHECK(max_prob_difference(predict_proba(a, test), predict_proba(c, test)) > 0.0);
}

TEST_CASE("early stopping keeps the best validation epoch") {
  const auto train = synthetic_samples(32, 1, "tr");
  const auto val = synthetic_samples(8, 2, "va");
  BackendConfig config = tiny_char_cnn();
  config.hyperparams["epochs"] = 6;
  const auto model = train_backend(config, train, val);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& r : model.history()) {
    REQUIRE(r.val_f1.has_value());
    if (*r.val_f1 > best) {
      best = *r.val_f1;
      best_epoch = r.epoch;
    }
  }
  CHECK(model.best_epoch() == best_epoch);
  CHECK(model.history().size() <= static_cast<std::size_t>(best_epoch + 2));
  CHECK(train_backend(config, train, {}).best_epoch() == 6);

  config.hyperparams["stop_on_perfect_train"] = true;
  config.hyperparams["epochs"] = 20;
  config.hyperparams["patience"] = 20;
  const auto perfect = train_backend(config, train, {});
  REQUIRE(perfect.history().back().eval_train_accuracy.has_value());
  if (perfect.history().size() < 20) CHECK(*perfect.history().back().eval_train_accuracy == 1.0);
}

TEST_CASE("a frozen sentence encoder keeps its weights") {
  const auto train = synthetic_samples(16, 1);
  BackendConfig config = tiny_encoder(BackendKind::kSentenceEncoderHead);
  config.hyperparams["freeze_encoder"] = true;
  Rng rng(derive_seed(config.seed, "init"));
  const auto fresh = make_classifier(config, train, rng);
  const auto model = train_backend(config, train, {});
  std::size_t encoder_tensors = 0;
  bool head_changed = false;
  for (const auto& p : fresh->parameters().all()) {
    const auto* trained = model.classifier().parameters().find(p->name);
    REQUIRE(trained != nullptr);
    if (p->name.rfind("bert.", 0) == 0) {
      ++encoder_tensors;
      CHECK_MESSAGE(trained->value == p->value, p->name);
    } else if (trained->value != p->value) {
      head_changed = true;
    }
  }
  CHECK(encoder_tensors > 0);
  CHECK(head_changed);
}

TEST_CASE("probabilities are normalized and order-preserving") {
  const auto train = synthetic_samples(16, 1);
  for (BackendKind kind : kAllBackends) {
    CAPTURE(to_string(kind));
    const BackendConfig config = kind == BackendKind::kCharCnn ? tiny_char_cnn() : tiny_encoder(kind);
    const auto model = train_backend(config, train, {});
    auto inputs = synthetic_samples(6, 9, "p");
    inputs.push_back(inputs[2]);
    inputs.back().id = "p:dup";
    const auto batch = predict_proba(model, inputs);
    REQUIRE(batch.predictions.size() == inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      CHECK(batch.predictions[i].sample_id == inputs[i].id);
      CHECK(batch.predictions[i].backend == kind);
      CHECK(batch.predictions[i].probs[0] + batch.predictions[i].probs[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(batch.predictions.back().probs == batch.predictions[2].probs);
    CHECK_THROWS_AS(predict_proba(model, {}), DataError);
  }
}

TEST_CASE("model export and load round-trip") {
  TempDir dir;
  const auto train = synthetic_samples(16, 1);
  const auto probe = synthetic_samples(6, 4, "p");
  for (BackendKind kind : kAllBackends) {
    CAPTURE(to_string(kind));
    const BackendConfig config = kind == BackendKind::kCharCnn ? tiny_char_cnn() : tiny_encoder(kind);
    const auto model = train_backend(config, train, {});
    const auto path = dir / std::string(to_string(kind));
    export_model(model, path);
    const auto loaded = load_model(path, kind);
    CHECK(loaded.corpus_fingerprint() == model.corpus_fingerprint());
    CHECK(loaded.best_epoch() == model.best_epoch());
    CHECK(loaded.history().size() == model.history().size());
    CHECK(loaded.config().to_json() == model.config().to_json());
    CHECK(max_prob_difference(predict_proba(model, probe), predict_proba(loaded, probe)) <= 1e-6);

    const BackendKind other = kind == BackendKind::kCharCnn ? BackendKind::kTransformerFinetune : BackendKind::kCharCnn;
    CHECK_THROWS_AS(load_model(path, other), UnsupportedBackendError);
  }

  const auto path = dir / "char_cnn";
  std::string weights = read_file(path / "weights.safetensors");
  weights[weights.size() - 1] ^= 0x01;
  write_file_atomic(path / "weights.safetensors", weights);
  CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("checksum"), FormatError);
  CHECK_THROWS_AS(load_model(dir / "nowhere"), FormatError);
}

TEST_CASE("load rejects weights that do not fit the configuration") {
  TempDir dir;
  const auto train = synthetic_samples(8, 1);
  const auto model = train_backend(tiny_char_cnn(), train, {});
  export_model(model, dir / "m");
  auto meta = json::parse(read_file(dir / "m" / "model.json"));

  // Drop a tensor and re-sign the file.
  std::vector<nn::Matrix> values;
  std::vector<nn::NamedTensor> tensors;
  nn::SafetensorsReader reader(dir / "m" / "weights.safetensors");
  for (const auto& name : reader.names()) {
    if (name != "fc2.bias") values.push_back(reader.read(name));
  }
  std::size_t i = 0;
  for (const auto& name : reader.names()) {
    if (name != "fc2.bias") tensors.push_back({name, &values[i++]});
  }
  nn::write_safetensors(dir / "m" / "weights.safetensors", tensors, reader.metadata());
  meta["weights_sha256"] = sha256_hex(read_file(dir / "m" / "weights.safetensors"));
  write_file_atomic(dir / "m" / "model.json", meta.dump(2));
  CHECK_THROWS_WITH_AS(load_model(dir / "m"), doctest::Contains("fc2.bias"), FormatError);

  meta["version"] = 99;
  write_file_atomic(dir / "m" / "model.json", meta.dump(2));
  CHECK_THROWS_WITH_AS(load_model(dir / "m"), doctest::Contains("version"), FormatError);
}

TEST_CASE("stratified folds balance labels") {
  const auto samples = synthetic_samples(30, 1);
  const auto folds = stratified_folds(samples, 3, 5);
  std::array<std::array<int, 2>, 3> counts{};
  for (std::size_t i = 0; i < samples.size(); ++i) ++counts[folds[i]][class_index(samples[i].label)];
  for (const auto& c : counts) {
    CHECK(c[0] == 5);
    CHECK(c[1] == 5);
  }
  CHECK(stratified_folds(samples, 3, 5) == folds);
  CHECK_THROWS_AS(stratified_folds(samples, 1, 5), ConfigError);
}

TEST_CASE("cross-validation selects by mean F1 and prefers smaller models on ties") {
  TempDir dir;
  const auto train = synthetic_samples(30, 1);

  BackendConfig single = tiny_char_cnn();
  single.grid = json::object();
  int calls = 0;
  auto constant = [&calls](const BackendConfig&, std::span<const corpus::TextSample>,
                           std::span<const corpus::TextSample>) {
    ++calls;
    return 0.5;
  };
  const auto one = cross_validate(single, train, 3, constant);
  CHECK(one.table.size() == 1);
  CHECK(calls == 3);
  CHECK(one.best == json::object());

  BackendConfig config = tiny_char_cnn();
  config.grid = {{"fc_units", {32, 16}}, {"dropout", {0.3, 0.5}}};
  auto dominant = [](const BackendConfig& c, std::span<const corpus::TextSample>,
                     std::span<const corpus::TextSample>) {
    return c.get<double>("dropout") == 0.5 && c.get<int>("fc_units") == 32 ? 0.9 : 0.6;
  };
  const auto best = cross_validate(config, train, 3, dominant);
  CHECK(best.best == json{{"dropout", 0.5}, {"fc_units", 32}});
  CHECK(best.table[best.best_index].mean_f1 == doctest::Approx(0.9));

  auto tied = [](const BackendConfig&, std::span<const corpus::TextSample>, std::span<const corpus::TextSample>) {
    return 0.7;
  };
  const auto tie = cross_validate(config, train, 3, tied);
  CHECK(tie.best["fc_units"] == 16);
  CHECK(tie.best["dropout"] == 0.3);

  write_cv_table(best, dir / "cv.csv");
  const auto csv = read_file(dir / "cv.csv");
  CHECK(csv.find("mean_f1") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("default fold evaluator trains and scores") {
  const auto train = synthetic_samples(24, 1, "a");
  const auto held = synthetic_samples(12, 2, "b");
  const double f1 = default_fold_evaluator(tiny_char_cnn(), train, held);
  CHECK(f1 >= 0.0);
  CHECK(f1 <= 1.0);
}
