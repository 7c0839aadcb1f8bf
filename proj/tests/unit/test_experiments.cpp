#include <doctest.h>

#include <algorithm>
#include <set>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/fs.hpp"
#include "deceptkit/corpus/splits.hpp"
#include "deceptkit/experiments/new_event.hpp"
#include "deceptkit/experiments/plan.hpp"
#include "deceptkit/experiments/records.hpp"
#include "deceptkit/experiments/runner.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"
#include "tiny_configs.hpp"

using namespace deceptkit;
using namespace deceptkit::experiments;
using corpus::DatasetId;
using corpus::TextSample;
using deceptkit::testing::TempDir;
using nlohmann::json;

namespace {

json plan_json(const std::string& protocol) {
  return {{"schema_version", 1},
          {"name", "fixture"},
          {"protocol", protocol},
          {"corpus", "corpus.jsonl"},
          {"seeds", {0, 1}},
          {"backends",
           json::array({deceptkit::testing::tiny_char_cnn().to_json(),
                        deceptkit::testing::tiny_encoder(backends::BackendKind::kSentenceEncoderHead).to_json()})}};
}

const corpus::Corpus& fixture() {
  static const corpus::Corpus c = deceptkit::testing::fixture_corpus();
  return c;
}

const corpus::DatasetCatalog& catalog() { return deceptkit::testing::repo_catalog(); }

std::vector<TextSample> pool_of(std::size_t n, std::size_t deceptive_every) {
  std::vector<TextSample> pool;
  for (std::size_t i = 0; i < n; ++i) {
    TextSample s;
    s.id = "covid_zenodo:" + std::to_string(i);
    s.text = "text " + std::to_string(i);
    s.label = i % deceptive_every == 0 ? Label::kDeceptive : Label::kNonDeceptive;
    s.dataset = DatasetId::kCovidZenodo;
    s.event_tag = "covid";
    pool.push_back(s);
  }
  return pool;
}

std::set<std::string> ids(const std::vector<TextSample>& samples) {
  std::set<std::string> out;
  for (const auto& s : samples) out.insert(s.id);
  return out;
}

std::size_t count_label(const std::vector<TextSample>& samples, Label label) {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const TextSample& s) { return s.label == label; }));
}

}  // namespace

TEST_CASE("plan parsing, validation and round trip") {
  const ExperimentPlan plan = ExperimentPlan::from_json(plan_json("general"));
  CHECK(plan.protocol == Protocol::kGeneral);
  CHECK(plan.seeds == std::vector<std::uint64_t>{0, 1});
  CHECK(plan.catalog == "config/datasets.json");
  CHECK(plan.model_names() == std::vector<std::string>{"char_cnn", "sentence_encoder_head", "ensemble"});
  CHECK(plan.new_event.fractions == std::vector<int>{0, 20, 40, 60, 80, 100});
  CHECK(ExperimentPlan::from_json(plan.to_json()).to_json() == plan.to_json());

  json bad = plan_json("general");
  bad["epochs"] = 3;
  CHECK_THROWS_AS(ExperimentPlan::from_json(bad), ConfigError);
  bad = plan_json("general");
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(ExperimentPlan::from_json(bad), ConfigError);
  bad = plan_json("new_event");
  bad["new_event"] = {{"fractions", {0, 40, 20}}};
  CHECK_THROWS_AS(ExperimentPlan::from_json(bad), ConfigError);
  bad = plan_json("general");
  bad["backends"].push_back(bad["backends"][0]);
  CHECK_THROWS_AS(ExperimentPlan::from_json(bad), ConfigError);
  bad = plan_json("general");
  bad["ensemble"] = {{"weights", {1.0}}};
  CHECK_THROWS_AS(ExperimentPlan::from_json(bad), ConfigError);
  bad = plan_json("sideways");
  CHECK_THROWS_AS(ExperimentPlan::from_json(bad), ConfigError);

  json single = plan_json("general");
  single["backends"].erase(1);
  CHECK_FALSE(ExperimentPlan::from_json(single).has_ensemble());
}

TEST_CASE("prediction records round-trip exactly") {
  TempDir dir;
  std::vector<PredictionRecord> records = {
      {"liar:1", DatasetId::kLiar, Label::kDeceptive, {0.1234567890123456789, 1.0 - 0.1234567890123456789},
       Label::kDeceptive},
      {"sms_spam:\"q\",x", DatasetId::kSmsSpam, Label::kNonDeceptive, {1.0 / 3.0, 2.0 / 3.0}, Label::kDeceptive}};
  write_predictions(records, dir / "p.csv");
  CHECK(read_predictions(dir / "p.csv") == records);

  write_file_atomic(dir / "bad.csv", "id,label\n");
  CHECK_THROWS_AS(read_predictions(dir / "bad.csv"), FormatError);
  write_file_atomic(dir / "short.csv", "sample_id,dataset,gold,p_non_deceptive,p_deceptive,predicted\nx,liar,deceptive\n");
  CHECK_THROWS_AS(read_predictions(dir / "short.csv"), FormatError);
}

TEST_CASE("nested in-domain subsets are stratified and nested for every fraction pair") {
  const auto pool = pool_of(203, 20);  // 11 deceptive, 192 non-deceptive
  const std::vector<int> fractions = {0, 20, 40, 60, 80, 100};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto subsets = nested_subsets(pool, fractions, seed);
    REQUIRE(subsets.size() == fractions.size());
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      CHECK(count_label(subsets[i], Label::kDeceptive) == 11 * fractions[i] / 100);
      CHECK(count_label(subsets[i], Label::kNonDeceptive) == 192 * fractions[i] / 100);
      for (std::size_t j = i + 1; j < fractions.size(); ++j) {
        const auto small = ids(subsets[i]);
        const auto large = ids(subsets[j]);
        CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
      }
    }
    CHECK(subsets.front().empty());
    CHECK(ids(subsets.back()) == ids(pool));
    CHECK(ids(nested_subsets(pool, fractions, seed)[2]) == ids(subsets[2]));
  }
  CHECK(ids(nested_subsets(pool, fractions, 0)[2]) != ids(nested_subsets(pool, fractions, 1)[2]));

  // Shuffling the pool does not change which samples are chosen.
  auto shuffled = pool;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(ids(nested_subsets(shuffled, fractions, 3)[1]) == ids(nested_subsets(pool, fractions, 3)[1]));
}

TEST_CASE("training composition holds out a stratified validation share") {
  auto out_domain = deceptkit::testing::synthetic_samples(101, 1, "sms_spam");
  const auto in_domain = pool_of(50, 5);
  const TrainValSplit split = compose_training(out_domain, in_domain, 0.2, 9);
  CHECK(split.train.size() + split.val.size() == 151);
  CHECK(count_label(split.val, Label::kDeceptive) == (50 + 10) / 5);
  CHECK(count_label(split.val, Label::kNonDeceptive) == (51 + 40) / 5);
  std::set<std::string> all = ids(split.train);
  for (const auto& id : ids(split.val)) CHECK(all.insert(id).second);
  CHECK(all.size() == 151);
  CHECK(compose_training(out_domain, in_domain, 0.0, 9).val.empty());
}

TEST_CASE("provenance check rejects in-domain data at fraction zero and test leakage") {
  const auto out_domain = deceptkit::testing::synthetic_samples(20, 1, "sms_spam");
  const auto in_domain = pool_of(10, 2);
  const auto test = pool_of(3, 2);
  std::vector<TextSample> fresh_test;
  for (auto s : test) {
    s.id = "covid_aaai:" + s.id;
    fresh_test.push_back(s);
  }
  const TrainValSplit clean = compose_training(out_domain, {}, 0.2, 1);
  CHECK_NOTHROW(check_provenance(clean, fresh_test, 0, "covid"));
  const TrainValSplit mixed = compose_training(out_domain, std::span(in_domain).first(2), 0.2, 1);
  CHECK_THROWS_AS(check_provenance(mixed, fresh_test, 0, "covid"), ProvenanceError);
  CHECK_NOTHROW(check_provenance(mixed, fresh_test, 20, "covid"));
  // in_domain ids overlap with `test` ids.
  CHECK_THROWS_AS(check_provenance(mixed, test, 20, "covid"), ProvenanceError);
}

TEST_CASE("new-event partition separates the event's datasets") {
  const auto splits = corpus::assign_splits(fixture(), catalog(), 0);
  const NewEventPartition part = partition_new_event(fixture(), splits, "covid");
  for (const auto& s : part.out_of_domain) {
    CHECK_FALSE(is_in_domain(s, "covid"));
    CHECK(splits.at(s.id) != corpus::Split::kTest);
  }
  for (const auto& s : part.in_domain) CHECK(splits.at(s.id) != corpus::Split::kTest);
  std::set<DatasetId> test_sets;
  for (const auto& s : part.test) {
    test_sets.insert(s.dataset);
    CHECK(splits.at(s.id) == corpus::Split::kTest);
  }
  CHECK(test_sets == std::set<DatasetId>{DatasetId::kCovidZenodo, DatasetId::kCovidAaai});
  CHECK(part.in_domain.size() + part.test.size() == 100);
  CHECK_THROWS_AS(partition_new_event(fixture(), splits, "election"), DataError);
}

TEST_CASE("general run on the fixture: structure, persisted metrics, resume and reproducibility") {
  namespace fs = std::filesystem;
  const ExperimentPlan plan = ExperimentPlan::from_json(plan_json("general"));
  TempDir full_dir, resumed_dir;
  const GeneralResult full = run_general(plan, fixture(), catalog(), full_dir.path());

  REQUIRE(full.seeds.size() == 2);
  for (const auto& seed : full.seeds) {
    REQUIRE(seed.models.size() == 3);
    const fs::path seed_dir = full_dir / ("seed_" + std::to_string(seed.seed));
    const auto splits = corpus::assign_splits(fixture(), catalog(), seed.seed);
    const auto test_ids = splits.ids_in(corpus::Split::kTest);
    for (const auto& [model, metrics] : seed.models) {
      CHECK(metrics.per_dataset.size() == 10);
      std::size_t per_dataset_total = 0;
      for (const auto& [id, r] : metrics.per_dataset) per_dataset_total += r.counts.total();
      CHECK(metrics.total.pooled.counts.total() == per_dataset_total);

      // Every test sample exactly once, and metrics recomputed from disk
      // equal the in-memory ones.
      const auto records = read_predictions(seed_dir / "predictions" / (model + ".csv"));
      std::multiset<std::string> seen;
      for (const auto& r : records) seen.insert(r.sample_id);
      CHECK(seen == std::multiset<std::string>(test_ids.begin(), test_ids.end()));
      const ModelMetrics again = metrics_from_records(records);
      CHECK(again.total.pooled.counts == metrics.total.pooled.counts);
      CHECK(again.total.pooled.f1 == metrics.total.pooled.f1);
      for (const auto& [id, r] : metrics.per_dataset) CHECK(again.per_dataset.at(id).accuracy == r.accuracy);
    }
    CHECK(fs::exists(seed_dir / "history" / "char_cnn.csv"));
    CHECK(fs::exists(seed_dir / "ensemble.jsonl"));
    CHECK(fs::exists(seed_dir / "splits.csv"));
  }
  for (const char* file : {"plan.json", "result.json", "metrics.csv", "metrics_mean.csv"}) {
    CHECK(fs::exists(full_dir / file));
  }
  const auto& mean = full.mean.at("ensemble");
  CHECK(mean.size() == 12);
  CHECK(mean.at("total").accuracy ==
        doctest::Approx((full.seeds[0].models.at("ensemble").total.pooled.accuracy +
                         full.seeds[1].models.at("ensemble").total.pooled.accuracy) /
                        2));
  const json doc = json::parse(read_file(full_dir / "result.json"));
  CHECK(doc.at("plan") == plan.to_json());
  CHECK(doc.at("environment").contains("compiler"));

  // Interrupt after the first unit, then resume: the completed unit is
  // reused and the outputs match the uninterrupted run byte for byte.
  RunOptions interrupt;
  interrupt.on_unit_done = [](const std::string&) { throw TrainingError("interrupted"); };
  CHECK_THROWS_AS(run_general(plan, fixture(), catalog(), resumed_dir.path(), interrupt), TrainingError);
  const fs::path first_unit = resumed_dir / "seed_0" / "predictions" / "char_cnn.csv";
  REQUIRE(fs::exists(first_unit));
  CHECK_FALSE(fs::exists(resumed_dir / "seed_0" / "predictions" / "sentence_encoder_head.csv"));
  const auto stamp = fs::last_write_time(first_unit);

  std::vector<std::string> units;
  RunOptions record;
  record.on_unit_done = [&](const std::string& unit) { units.push_back(unit); };
  run_general(plan, fixture(), catalog(), resumed_dir.path(), record);
  CHECK(units.size() == 4);
  CHECK(fs::last_write_time(first_unit) == stamp);
  for (const char* seed : {"seed_0", "seed_1"}) {
    for (const char* model : {"char_cnn", "sentence_encoder_head", "ensemble"}) {
      const fs::path rel = fs::path(seed) / "predictions" / (std::string(model) + ".csv");
      CHECK_MESSAGE(read_file(full_dir / rel.string()) == read_file(resumed_dir / rel.string()), rel.string());
    }
  }
  CHECK(read_file(full_dir / "metrics.csv") == read_file(resumed_dir / "metrics.csv"));

  // A stale checkpoint for a different test set is refused.
  write_predictions(std::vector<PredictionRecord>{{"x:1", DatasetId::kLiar, Label::kDeceptive, {0.5, 0.5},
                                                   Label::kNonDeceptive}},
                    resumed_dir / "seed_0" / "predictions" / "char_cnn.csv");
  CHECK_THROWS_AS(run_general(plan, fixture(), catalog(), resumed_dir.path()), DataError);

  ExperimentPlan wrong = plan;
  wrong.protocol = Protocol::kNewEvent;
  CHECK_THROWS_AS(run_general(wrong, fixture(), catalog(), full_dir / "other"), ConfigError);
}

TEST_CASE("new-event run on the fixture: curve, fixed test set and provenance") {
  namespace fs = std::filesystem;
  json j = plan_json("new_event");
  j["seeds"] = {0};
  j["backends"].erase(1);
  const ExperimentPlan plan = ExperimentPlan::from_json(j);
  TempDir dir;
  const NewEventResult result = run_new_event(plan, fixture(), catalog(), dir.path());

  REQUIRE(result.points.size() == 6);
  std::size_t previous_in_domain = 0;
  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const CurvePoint& p = result.points[i];
    CHECK(p.fraction == plan.new_event.fractions[i]);
    CHECK(p.model == "char_cnn");
    CHECK(p.test_size == result.points.front().test_size);
    CHECK(p.in_domain_train >= previous_in_domain);
    previous_in_domain = p.in_domain_train;
    CHECK(read_file(dir / ("seed_0/fraction_" + std::to_string(p.fraction) + "/test_digest.txt")) ==
          result.test_digest.at(0) + "\n");
  }
  CHECK(result.points.front().in_domain_train == 0);
  CHECK(result.points.back().in_domain_train > 0);
  REQUIRE(result.improvements.size() == 1);
  CHECK(result.improvements[0].delta ==
        doctest::Approx(100.0 * (result.points[1].metrics.f1 - result.points[0].metrics.f1)));
  CHECK(result.mean_improvement == result.improvements[0].delta);

  const std::string curve = read_file(dir / "curve.csv");
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 7);
  const std::string mean = read_file(dir / "curve_mean.csv");
  CHECK(mean.rfind("fraction,model,f1,accuracy\n0,char_cnn,", 0) == 0);
  CHECK(fs::exists(dir / "improvement.csv"));
  CHECK(fs::exists(dir / "result.json"));
}
