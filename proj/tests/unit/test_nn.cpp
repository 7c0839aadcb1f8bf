#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/nn/encoder.hpp"
#include "deceptkit/nn/layers.hpp"
#include "deceptkit/nn/optim.hpp"
#include "deceptkit/nn/safetensors.hpp"
#include "gradcheck.hpp"
#include "temp_dir.hpp"

using namespace deceptkit;
using namespace deceptkit::nn;
using deceptkit::testing::check_parameter_gradients;
using deceptkit::testing::relative_error;
using deceptkit::testing::TempDir;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

void randomize(ParameterStore& store, Rng& rng, double scale) {
  for (const auto& p : store.all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += scale * rng.normal();
  }
}

// Loss sum(probe .* y) has gradient `probe` with respect to y.
double probe_loss(const Matrix& y, const Matrix& probe) { return y.cwiseProduct(probe).sum(); }

template <typename Forward>
double max_input_error(Matrix& x, const Matrix& dx, Forward forward, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = forward();
    x.data()[i] = saved - h;
    const double down = forward();
    x.data()[i] = saved;
    worst = std::max(worst, relative_error(dx.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

}  // namespace

TEST_CASE("linear, layer norm and GELU gradients match finite differences") {
  Rng rng(1);
  ParameterStore store;
  Linear a(store, "a", 4, 5);
  LayerNorm norm(store, "norm", 5, 1e-12);
  Linear b(store, "b", 5, 3);
  randomize(store, rng, 0.5);
  Matrix x = random_matrix(3, 4, rng);
  const Matrix probe = random_matrix(3, 3, rng);

  auto forward = [&] {
    return probe_loss(b.forward(gelu(norm.forward(a.forward(x), nullptr))), probe);
  };
  store.zero_grad();
  const Matrix h1 = a.forward(x);
  LayerNormCache cache;
  const Matrix h2 = norm.forward(h1, &cache);
  const Matrix h3 = gelu(h2);
  const Matrix d3 = b.backward(h3, probe);
  const Matrix dx = a.backward(x, norm.backward(gelu_backward(h2, d3), cache));

  const auto result = check_parameter_gradients(store, forward);
  CHECK_MESSAGE(result.max_relative_error <= 1e-4, result.worst);
  CHECK(max_input_error(x, dx, forward) <= 1e-4);
}

TEST_CASE("convolution and max pooling gradients match finite differences") {
  Rng rng(2);
  ParameterStore store;
  Conv1d conv(store, "conv", 3, 4, 3);
  randomize(store, rng, 0.5);
  Matrix x = random_matrix(11, 3, rng);
  const Matrix probe = random_matrix(3, 4, rng);
  auto forward = [&] { return probe_loss(max_pool(relu(conv.forward(x)), 3, nullptr), probe); };

  store.zero_grad();
  const Matrix a = relu(conv.forward(x));
  std::vector<Eigen::Index> argmax;
  const Matrix pooled = max_pool(a, 3, &argmax);
  CHECK(pooled.rows() == 3);
  const Matrix dx = conv.backward(x, relu_backward(a, max_pool_backward(probe, argmax, a.rows())));
  const auto result = check_parameter_gradients(store, forward);
  CHECK_MESSAGE(result.max_relative_error <= 1e-4, result.worst);
  CHECK(max_input_error(x, dx, forward) <= 1e-4);
}

TEST_CASE("one-hot convolution equals dense convolution on the one-hot matrix") {
  Rng rng(3);
  ParameterStore store;
  Conv1d conv(store, "conv", 5, 2, 3);
  randomize(store, rng, 1.0);
  const std::vector<int> indices = {0, 4, -1, 2, 2, 1, -1};
  Matrix onehot = Matrix::Zero(7, 5);
  for (int t = 0; t < 7; ++t) {
    if (indices[t] >= 0) onehot(t, indices[t]) = 1.0;
  }
  CHECK((conv.forward_indices(indices) - conv.forward(onehot)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention gradients match finite differences") {
  Rng rng(4);
  ParameterStore store;
  MultiHeadSelfAttention attn(store, "attn", 8, 2);
  randomize(store, rng, 0.4);
  Matrix x = random_matrix(5, 8, rng);
  const Matrix probe = random_matrix(5, 8, rng);
  auto forward = [&] { return probe_loss(attn.forward(x, nullptr), probe); };
  store.zero_grad();
  AttentionCache cache;
  std::vector<Matrix> probs;
  attn.forward(x, &cache, &probs);
  REQUIRE(probs.size() == 2);
  for (const auto& p : probs) CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  const Matrix dx = attn.backward(probe, cache);
  const auto result = check_parameter_gradients(store, forward);
  CHECK_MESSAGE(result.max_relative_error <= 1e-4, result.worst);
  CHECK(max_input_error(x, dx, forward) <= 1e-4);
}

TEST_CASE("encoder gradients match finite differences") {
  Rng rng(5);
  ParameterStore store;
  EncoderConfig config;
  config.vocab_size = 12;
  config.hidden = 8;
  config.layers = 2;
  config.heads = 2;
  config.intermediate = 12;
  config.max_position = 8;
  config.dropout = 0.0;
  TransformerEncoder encoder(store, "bert", config);
  encoder.init(rng);
  randomize(store, rng, 0.3);
  const std::vector<int> ids = {2, 5, 7, 7, 3};
  const Matrix probe = random_matrix(5, 8, rng);
  auto forward = [&] { return probe_loss(encoder.forward(ids, nullptr, nullptr), probe); };
  store.zero_grad();
  EncoderCache cache;
  encoder.forward(ids, nullptr, &cache);
  encoder.backward(probe, cache);
  const auto result = check_parameter_gradients(store, forward);
  CHECK_MESSAGE(result.max_relative_error <= 1e-4, result.worst);
}

TEST_CASE("encoder reproduces the reference implementation on a pretrained checkpoint") {
  const auto dir = deceptkit::testing::source_dir() / "tests" / "data" / "tiny_bert";
  const auto config_json = nlohmann::json::parse(read_file(dir / "config.json"));
  const EncoderConfig config = EncoderConfig::from_checkpoint_config(config_json);
  ParameterStore store;
  TransformerEncoder encoder(store, "bert", config);
  encoder.load_checkpoint(dir / "model.safetensors");

  const auto expected = nlohmann::json::parse(read_file(dir / "expected.json"));
  REQUIRE(expected.size() == 4);
  for (const auto& record : expected) {
    const auto ids = record["ids"].get<std::vector<int>>();
    std::vector<std::vector<Matrix>> attention;
    const Matrix hidden = encoder.forward(ids, nullptr, nullptr, &attention);
    const auto ref = record["hidden"].get<std::vector<std::vector<double>>>();
    double worst = 0.0;
    for (std::size_t t = 0; t < ref.size(); ++t) {
      for (std::size_t c = 0; c < ref[t].size(); ++c) worst = std::max(worst, std::abs(hidden(t, c) - ref[t][c]));
    }
    CHECK_MESSAGE(worst < 1e-4, record["text"].get<std::string>());
    const auto ref_attn = record["cls_attention"].get<std::vector<std::vector<double>>>();
    const auto& last = attention.back();
    REQUIRE(last.size() == ref_attn.size());
    for (std::size_t h = 0; h < last.size(); ++h) {
      for (std::size_t t = 0; t < ref_attn[h].size(); ++t) CHECK(std::abs(last[h](0, t) - ref_attn[h][t]) < 1e-5);
    }
  }
}

TEST_CASE("checkpoint loading rejects missing tensors") {
  TempDir dir;
  ParameterStore store;
  EncoderConfig config;
  config.vocab_size = 10;
  config.hidden = 4;
  config.layers = 1;
  config.heads = 1;
  config.intermediate = 4;
  config.max_position = 4;
  TransformerEncoder encoder(store, "bert", config);
  const Matrix m = Matrix::Ones(10, 4);
  write_safetensors(dir / "partial.safetensors", {{"embeddings.word_embeddings.weight", &m}});
  CHECK_THROWS_AS(encoder.load_checkpoint(dir / "partial.safetensors"), FormatError);
}

TEST_CASE("safetensors round-trips F64 and decodes reduced precisions") {
  TempDir dir;
  Rng rng(6);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(1, 7, rng);
  write_safetensors(dir / "t.safetensors", {{"a", &a}, {"b", &b}}, {{"k", "v"}});
  SafetensorsReader reader(dir / "t.safetensors");
  CHECK(reader.read("a") == a);
  CHECK(reader.read("b") == b);
  CHECK(reader.metadata().at("k") == "v");
  CHECK_THROWS_AS(reader.read("c"), FormatError);

  // 1.5 as F32, BF16 and F16; -2 as F16.
  std::string header = R"({"f32":{"dtype":"F32","shape":[1],"data_offsets":[0,4]},)"
                       R"("bf16":{"dtype":"BF16","shape":[1],"data_offsets":[4,6]},)"
                       R"("f16":{"dtype":"F16","shape":[2],"data_offsets":[6,10]}})";
  while (header.size() % 8 != 0) header.push_back(' ');
  std::string blob;
  const std::uint64_t len = header.size();
  blob.append(reinterpret_cast<const char*>(&len), 8);
  blob += header;
  const unsigned char data[] = {0x00, 0x00, 0xC0, 0x3F, 0xC0, 0x3F, 0x00, 0x3E, 0x00, 0xC0};
  blob.append(reinterpret_cast<const char*>(data), sizeof data);
  write_file_atomic(dir / "mixed.safetensors", blob);
  SafetensorsReader mixed(dir / "mixed.safetensors");
  CHECK(mixed.read("f32")(0, 0) == 1.5);
  CHECK(mixed.read("bf16")(0, 0) == 1.5);
  CHECK(mixed.read("f16")(0, 0) == 1.5);
  CHECK(mixed.read("f16")(0, 1) == -2.0);

  write_file_atomic(dir / "short.safetensors", blob.substr(0, blob.size() - 3));
  CHECK_THROWS_AS(SafetensorsReader(dir / "short.safetensors"), FormatError);
}

TEST_CASE("Adam descends a quadratic") {
  ParameterStore store;
  Parameter& p = store.create("w", 1, 2);
  p.value << 3.0, -2.0;
  Adam adam(store);
  for (int i = 0; i < 2000; ++i) {
    store.zero_grad();
    p.grad = 2.0 * p.value;
    adam.step(0.01);
  }
  CHECK(p.value.norm() < 1e-2);
}

TEST_CASE("frozen parameters are left untouched") {
  ParameterStore store;
  Parameter& p = store.create("frozen.w", 1, 1);
  Parameter& q = store.create("live.w", 1, 1);
  store.set_trainable("frozen.", false);
  Adam adam(store);
  p.grad.setOnes();
  q.grad.setOnes();
  adam.step(0.1);
  CHECK(p.value(0, 0) == 0.0);
  CHECK(q.value(0, 0) < 0.0);
}

TEST_CASE("softmax cross-entropy") {
  RowVector z(2);
  z << 0.0, 0.0;
  RowVector d;
  CHECK(softmax_cross_entropy(z, 1, &d) == doctest::Approx(std::log(2.0)));
  CHECK(d(0) == doctest::Approx(0.5));
  CHECK(d(1) == doctest::Approx(-0.5));
  z << 1000.0, -1000.0;
  CHECK(std::isfinite(softmax_cross_entropy(z, 1, &d)));
  CHECK(softmax_rows(Matrix(z)).sum() == doctest::Approx(1.0));
}

TEST_CASE("shape errors name the layer") {
  ParameterStore store;
  Linear fc(store, "fc1", 4, 2);
  try {
    fc.forward(Matrix::Zero(1, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("fc1") != std::string::npos);
  }
}
