#include <doctest.h>

#include <algorithm>
#include <set>

#include <json.hpp>

#include "deceptkit/analysis/audit.hpp"
#include "deceptkit/analysis/exports.hpp"
#include "deceptkit/analysis/metrics.hpp"
#include "deceptkit/analysis/tsne.hpp"
#include "deceptkit/backends/model.hpp"
#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/common/rng.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace deceptkit;
using namespace deceptkit::analysis;
using deceptkit::testing::synthetic_samples;
using deceptkit::testing::TempDir;

namespace {

constexpr Label D = Label::kDeceptive;
constexpr Label N = Label::kNonDeceptive;

struct Fixture {
  std::vector<LabeledPrediction> predictions;
  std::map<std::string, Label> gold;
};

// A prediction set with the requested confusion counts.
Fixture confusion(const std::string& prefix, std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  Fixture f;
  std::size_t n = 0;
  auto add = [&](std::size_t count, Label predicted, Label gold) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::string id = prefix + std::to_string(n++);
      f.predictions.push_back({id, predicted});
      f.gold[id] = gold;
    }
  };
  add(tp, D, D);
  add(fp, D, N);
  add(fn, N, D);
  add(tn, N, N);
  return f;
}

corpus::TextSample sample(const std::string& id, const std::string& text, Label label) {
  corpus::TextSample s;
  s.id = id;
  s.text = text;
  s.label = label;
  return s;
}

nn::Matrix blobs(std::size_t per_blob, std::uint64_t seed, std::vector<int>* labels) {
  Rng rng(seed);
  nn::Matrix x(static_cast<Eigen::Index>(3 * per_blob), 10);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int blob = static_cast<int>(i / static_cast<Eigen::Index>(per_blob));
    if (labels != nullptr) labels->push_back(blob);
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = rng.normal() + (c == blob ? 20.0 : 0.0);
  }
  return x;
}

// Fraction of points whose nearest embedded neighbour shares their blob.
double neighbour_purity(const nn::Matrix& y, const std::vector<int>& labels) {
  std::size_t pure = 0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    double best = 1e300;
    Eigen::Index arg = -1;
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      if (j == i) continue;
      const double d = (y.row(i) - y.row(j)).squaredNorm();
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    pure += labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(arg)] ? 1 : 0;
  }
  return static_cast<double>(pure) / static_cast<double>(y.rows());
}

}  // namespace

TEST_CASE("metrics from a hand-computed confusion matrix") {
  const auto f = confusion("a", 3, 1, 2, 4);
  const auto m = compute_metrics(f.predictions, f.gold);
  CHECK(m.counts == ConfusionCounts{3, 1, 2, 4});
  CHECK(m.accuracy == 0.7);
  CHECK(m.f1 == 6.0 / 9.0);
  CHECK(m.fpr == 0.2);
  CHECK(m.support_deceptive == 5);
  CHECK(m.support_non_deceptive == 5);

  auto shuffled = f.predictions;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto again = compute_metrics(shuffled, f.gold);
  CHECK(again.accuracy == m.accuracy);
  CHECK(again.f1 == m.f1);

  const auto perfect = confusion("p", 4, 0, 0, 6);
  CHECK(compute_metrics(perfect.predictions, perfect.gold).accuracy == 1.0);
  CHECK(compute_metrics(perfect.predictions, perfect.gold).f1 == 1.0);

  const auto negatives = confusion("n", 0, 0, 0, 5);
  const auto degenerate = compute_metrics(negatives.predictions, negatives.gold);
  CHECK(degenerate.f1 == 0.0);
  CHECK(degenerate.f1_degenerate);
  CHECK_FALSE(m.f1_degenerate);
}

TEST_CASE("metrics reject mismatched ids") {
  auto f = confusion("a", 1, 1, 1, 1);
  f.predictions.back().sample_id = "elsewhere";
  CHECK_THROWS_AS(compute_metrics(f.predictions, f.gold), DataError);
  auto g = confusion("a", 1, 1, 1, 1);
  g.predictions.push_back(g.predictions.front());
  CHECK_THROWS_AS(compute_metrics(g.predictions, g.gold), DataError);
  CHECK_THROWS_AS(metrics_from_counts({}), DataError);
}

TEST_CASE("pooled totals") {
  const auto a = confusion("a", 3, 1, 2, 4);
  const auto b = confusion("b", 1, 0, 1, 8);
  auto gold = a.gold;
  gold.insert(b.gold.begin(), b.gold.end());
  const auto total = aggregate_total({a.predictions, b.predictions}, gold);
  CHECK(total.pooled.accuracy == 0.8);
  CHECK(total.pooled.counts == ConfusionCounts{4, 1, 3, 12});
  CHECK(total.pooled.f1 == 8.0 / 12.0);
  CHECK(total.weighted_accuracy == doctest::Approx((10 * 0.7 + 10 * 0.9) / 20));

  const auto single = aggregate_total({a.predictions}, a.gold);
  const auto direct = compute_metrics(a.predictions, a.gold);
  CHECK(single.pooled.accuracy == direct.accuracy);
  CHECK(single.pooled.f1 == direct.f1);
  CHECK(single.weighted_f1 == doctest::Approx(direct.f1));

  CHECK_THROWS_AS(aggregate_total({}, gold), DataError);
  CHECK_THROWS_AS(aggregate_total({a.predictions, a.predictions}, gold), DataError);
}

TEST_CASE("whole-word keyword matching") {
  CHECK(contains_word("Donald Trump said", "trump"));
  CHECK(contains_word("TRUMP", "trump"));
  CHECK(contains_word("Trump's plan", "Trump"));
  CHECK(contains_word("(trump)", "trump"));
  CHECK_FALSE(contains_word("a trumpet solo", "trump"));
  CHECK_FALSE(contains_word("antitrump", "trump"));
  CHECK(contains_word("Bill Gates funds", "bill gates"));
  CHECK(contains_word("Obáma spoke", "obama"));
  CHECK_FALSE(contains_word("", "obama"));
  CHECK_FALSE(contains_word("obama", ""));
}

TEST_CASE("false-positive rate by keyword") {
  std::vector<corpus::TextSample> samples = {
      sample("1", "Trump rally today", N),        sample("2", "trump visits the city", N),
      sample("3", "statement by TRUMP", N),       sample("4", "What Trump said", N),
      sample("5", "Trump wins the prize now", D), sample("6", "weather report", N),
      sample("7", "Obama speech", D),             sample("8", "trumpet lessons", N),
  };
  std::vector<LabeledPrediction> predictions = {{"1", D}, {"2", N}, {"3", N}, {"4", N},
                                                {"5", D}, {"6", D}, {"7", N}, {"8", D}};
  const std::vector<std::string> keywords = {"trump", "obama", "gates"};
  const auto rows = fpr_by_keyword(predictions, samples, keywords);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].matched_negatives == 4);
  CHECK(rows[0].false_positives == 1);
  CHECK(rows[0].fpr == 0.25);
  CHECK_FALSE(rows[0].undefined);
  CHECK(rows[0].baseline_fpr == 0.5);  // 3 of 6 negatives
  CHECK(rows[1].undefined);            // Obama only occurs in a deceptive text
  CHECK(rows[2].undefined);
  for (const auto& r : rows) CHECK(r.false_positives <= r.matched_negatives);

  CHECK_THROWS_AS(fpr_by_keyword(predictions, samples, std::vector<std::string>{}), ConfigError);
  predictions.pop_back();
  CHECK_THROWS_AS(fpr_by_keyword(predictions, samples, keywords), DataError);

  TempDir dir;
  write_keyword_table(rows, dir / "audit.csv");
  const auto csv = read_file(dir / "audit.csv");
  CHECK(csv.find("trump,4,1,0.250000,false,0.500000") != std::string::npos);
  CHECK(csv.find("gates,0,0,,true,0.500000") != std::string::npos);
}

TEST_CASE("error sampling") {
  std::vector<corpus::TextSample> samples;
  std::vector<LabeledPrediction> predictions;
  for (int i = 0; i < 20; ++i) {
    const std::string id = "s" + std::to_string(i);
    // s0..s4 false positives, s5..s9 true negatives, s10..s19 true positives.
    samples.push_back(sample(id, "text " + id, i < 10 ? N : D));
    predictions.push_back({id, i < 5 || i >= 10 ? D : N});
  }
  CHECK(sample_errors(predictions, samples, ErrorType::kFalseNegative, 3, 1).empty());
  const auto all = sample_errors(predictions, samples, ErrorType::kFalsePositive, 5, 1);
  REQUIRE(all.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(all[i].sample_id == "s" + std::to_string(i));
  CHECK(sample_errors(predictions, samples, ErrorType::kFalsePositive, 50, 1).size() == 5);

  const auto a = sample_errors(predictions, samples, ErrorType::kFalsePositive, 2, 9);
  const auto b = sample_errors(predictions, samples, ErrorType::kFalsePositive, 2, 9);
  REQUIRE(a.size() == 2);
  CHECK(a[0].sample_id == b[0].sample_id);
  CHECK(a[1].sample_id == b[1].sample_id);
  CHECK(a[0].gold == N);
  CHECK(a[0].predicted == D);
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (const auto& e : sample_errors(predictions, samples, ErrorType::kFalsePositive, 1, seed)) seen.insert(e.sample_id);
  }
  CHECK(seen.size() == 5);
  CHECK_THROWS_AS(sample_errors(predictions, samples, ErrorType::kFalsePositive, 0, 1), ConfigError);
  CHECK(parse_error_type("false_negative") == ErrorType::kFalseNegative);
}

TEST_CASE("t-SNE preserves cluster structure with both gradients") {
  std::vector<int> labels;
  const nn::Matrix x = blobs(40, 3, &labels);
  for (TsneMethod method : {TsneMethod::kExact, TsneMethod::kBarnesHut}) {
    CAPTURE(to_string(method));
    TsneOptions options;
    options.method = method;
    options.iterations = 500;
    const auto a = tsne(x, options);
    CHECK(a.method == method);
    CHECK(a.coordinates.rows() == x.rows());
    CHECK(a.coordinates.cols() == 2);
    CHECK(a.coordinates.allFinite());
    CHECK(neighbour_purity(a.coordinates, labels) >= 0.95);
    CHECK(tsne(x, options).coordinates == a.coordinates);
    options.seed = 1;
    CHECK(tsne(x, options).coordinates != a.coordinates);
  }
}

TEST_CASE("t-SNE keeps duplicated points together") {
  nn::Matrix x = blobs(40, 4, nullptr);
  x.row(7) = x.row(50);
  for (TsneMethod method : {TsneMethod::kExact, TsneMethod::kBarnesHut}) {
    CAPTURE(to_string(method));
    TsneOptions options;
    options.method = method;
    options.iterations = 500;
    const auto y = tsne(x, options).coordinates;
    std::vector<double> distances;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < y.rows(); ++j) distances.push_back((y.row(i) - y.row(j)).norm());
    }
    std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(distances.size() / 2),
                     distances.end());
    const double median = distances[distances.size() / 2];
    CHECK((y.row(7) - y.row(50)).norm() < 0.05 * median);
  }
}

TEST_CASE("t-SNE rejects too few samples for the perplexity") {
  const nn::Matrix x = nn::Matrix::Random(50, 4);
  CHECK_THROWS_WITH_AS(tsne(x), doctest::Contains("perplexity of at most 16.33"), DataError);
  TsneOptions options;
  options.perplexity = 16;
  options.iterations = 10;
  CHECK_NOTHROW(tsne(x, options));
  options.perplexity = 0;
  CHECK_THROWS_AS(tsne(x, options), ConfigError);
}

TEST_CASE("attention export") {
  backends::BackendConfig config = backends::BackendConfig::defaults(backends::BackendKind::kTransformerFinetune);
  config.hyperparams["checkpoint"] = (deceptkit::testing::source_dir() / "tests" / "data" / "tiny_bert").string();
  config.hyperparams["epochs"] = 1;
  config.max_token_limit = 64;
  const auto train = synthetic_samples(8, 1);
  const auto model = backends::train_backend(config, train, {});

  const auto probe = export_attention(model, "if you have bank account or you can open new one then we need you !");
  CHECK(probe.weights.rows() == 4);
  CHECK(probe.weights.cols() == static_cast<Eigen::Index>(probe.tokens.size()));
  CHECK(probe.tokens.front() == "[CLS]");
  CHECK(probe.tokens.back() == "[SEP]");
  for (Eigen::Index h = 0; h < probe.weights.rows(); ++h) CHECK(std::abs(probe.weights.row(h).sum() - 1.0) <= 1e-5);
  double mean_sum = 0.0;
  for (double w : probe.head_mean) mean_sum += w;
  CHECK(mean_sum == doctest::Approx(1.0));

  const auto single = export_attention(model, "hello");
  CHECK(single.weights.rows() == 4);
  CHECK(single.weights.cols() == 3);

  TempDir dir;
  write_attention_export(probe, dir / "attention.json");
  const auto j = nlohmann::json::parse(read_file(dir / "attention.json"));
  CHECK(j["tokens"].size() == probe.tokens.size());
  CHECK(j["weights"].size() == 4);

  backends::BackendConfig cnn = backends::BackendConfig::defaults(backends::BackendKind::kCharCnn);
  cnn.hyperparams["max_length"] = 32;
  cnn.hyperparams["filters"] = 4;
  cnn.hyperparams["conv_layers"] = nlohmann::json::array({{{"width", 3}, {"pool", 1}}});
  cnn.hyperparams["fc_units"] = 4;
  cnn.hyperparams["epochs"] = 1;
  const auto cnn_model = backends::train_backend(cnn, train, {});
  CHECK_THROWS_AS(export_attention(cnn_model, "hello"), UnsupportedBackendError);
  CHECK_THROWS_AS(export_embeddings(cnn_model, train, {}), UnsupportedBackendError);
}

TEST_CASE("embedding export") {
  backends::BackendConfig config = backends::BackendConfig::defaults(backends::BackendKind::kTransformerFinetune);
  config.hyperparams["checkpoint"] = "";
  config.hyperparams["scratch_encoder"] = {{"vocab_size", 200}, {"hidden", 16}, {"layers", 1},
                                           {"heads", 2},        {"intermediate", 32}, {"max_position", 64}};
  config.hyperparams["epochs"] = 2;
  config.hyperparams["learning_rate"] = 1e-3;
  const auto train = synthetic_samples(24, 1, "tr");
  const auto test = synthetic_samples(40, 2, "te");
  const auto model = backends::train_backend(config, train, {});
  const auto probs = backends::predict_proba(model, test);
  std::vector<LabeledPrediction> predictions;
  for (const auto& p : probs.predictions) predictions.push_back({p.sample_id, p.argmax()});

  TsneOptions options;
  options.perplexity = 5;
  options.iterations = 250;
  const auto a = export_embeddings(model, test, predictions, options);
  REQUIRE(a.rows.size() == test.size());
  CHECK(a.vectors.rows() == 40);
  CHECK(a.vectors.cols() == 16);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(a.rows[i].sample_id == test[i].id);
    CHECK(a.rows[i].misclassified == (a.rows[i].gold != a.rows[i].predicted));
    CHECK(std::isfinite(a.rows[i].x));
    ids.insert(a.rows[i].sample_id);
  }
  CHECK(ids.size() == test.size());
  const auto b = export_embeddings(model, test, predictions, options);
  for (std::size_t i = 0; i < test.size(); ++i) {
    CHECK(a.rows[i].x == b.rows[i].x);
    CHECK(a.rows[i].y == b.rows[i].y);
  }
  CHECK_THROWS_AS(export_embeddings(model, test, predictions), DataError);
  predictions.pop_back();
  CHECK_THROWS_AS(export_embeddings(model, test, predictions, options), DataError);

  TempDir dir;
  write_embedding_export(a, dir / "emb");
  CHECK(std::filesystem::exists(dir / "emb" / "vectors.safetensors"));
  const auto manifest = nlohmann::json::parse(read_file(dir / "emb" / "manifest.json"));
  CHECK(manifest["tsne"]["perplexity"] == 5.0);
  CHECK(manifest["samples"] == 40);
  const auto csv = read_file(dir / "emb" / "embeddings.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 41);
}

TEST_CASE("Barnes-Hut with full neighbourhoods and zero angle equals the exact gradient") {
  Rng rng(4);
  nn::Matrix x(30, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  TsneOptions options;
  options.perplexity = 29.0 / 3.0;
  options.theta = 0.0;
  options.iterations = 20;
  options.method = TsneMethod::kExact;
  const auto exact = tsne(x, options).coordinates;
  options.method = TsneMethod::kBarnesHut;
  const auto bh = tsne(x, options).coordinates;
  CHECK((exact - bh).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + exact.cwiseAbs().maxCoeff()));
}
