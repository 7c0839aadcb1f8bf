#include "deceptkit/corpus/types.hpp"

#include <algorithm>
#include <string>

#include "deceptkit/common/error.hpp"

namespace deceptkit::corpus {

namespace {

struct DatasetNames {
  DatasetId id;
  std::string_view key;
  std::string_view display;
};

constexpr std::array<DatasetNames, 10> kNames = {{
    {DatasetId::kPheme, "pheme", "PHEME"},
    {DatasetId::kLiar, "liar", "Liar"},
    {DatasetId::kFnnGossipcop, "fnn_gossipcop", "FNN-Gossipcop"},
    {DatasetId::kFnnPolitifact, "fnn_politifact", "FNN-Politifact"},
    {DatasetId::kRashkinPolitifact, "rashkin_politifact", "Rashkin-Politifact"},
    {DatasetId::kRashkinNewsfiles, "rashkin_newsfiles", "Rashkin-Newsfiles"},
    {DatasetId::kCovidZenodo, "covid_zenodo", "COVID-Zenodo"},
    {DatasetId::kCovidAaai, "covid_aaai", "COVID-AAAI"},
    {DatasetId::kEnron, "enron", "ENRON email spam"},
    {DatasetId::kSmsSpam, "sms_spam", "SMS Spam"},
}};

}  // namespace

std::string_view dataset_key(DatasetId id) { return kNames[static_cast<std::size_t>(id)].key; }

std::string_view dataset_display_name(DatasetId id) { return kNames[static_cast<std::size_t>(id)].display; }

DatasetId parse_dataset_id(std::string_view key) {
  for (const auto& names : kNames) {
    if (names.key == key) return names.id;
  }
  throw ConfigError("unknown dataset_id '" + std::string(key) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw FormatError("unknown split '" + std::string(text) + "'");
}

Corpus::Corpus(std::vector<TextSample> samples) { append(std::move(samples)); }

void Corpus::add(TextSample sample) {
  index_.try_emplace(sample.id, samples_.size());
  samples_.push_back(std::move(sample));
}

void Corpus::append(std::vector<TextSample> samples) {
  samples_.reserve(samples_.size() + samples.size());
  for (auto& s : samples) add(std::move(s));
}

const TextSample* Corpus::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &samples_[it->second];
}

bool Corpus::operator==(const Corpus& other) const {
  if (samples_.size() != other.samples_.size()) return false;
  auto sorted = [](const std::vector<TextSample>& v) {
    std::vector<const TextSample*> out;
    for (const auto& s : v) out.push_back(&s);
    std::stable_sort(out.begin(), out.end(), [](const TextSample* a, const TextSample* b) { return a->id < b->id; });
    return out;
  };
  const auto a = sorted(samples_);
  const auto b = sorted(other.samples_);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

std::vector<const TextSample*> Corpus::of_dataset(DatasetId id) const {
  std::vector<const TextSample*> out;
  for (const auto& s : samples_) {
    if (s.dataset == id) out.push_back(&s);
  }
  return out;
}

}  // namespace deceptkit::corpus
