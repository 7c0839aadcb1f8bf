#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "deceptkit/common/label.hpp"

namespace deceptkit::corpus {

// The ten source datasets, in the row order of the results table.
enum class DatasetId {
  kPheme,
  kLiar,
  kFnnGossipcop,
  kFnnPolitifact,
  kRashkinPolitifact,
  kRashkinNewsfiles,
  kCovidZenodo,
  kCovidAaai,
  kEnron,
  kSmsSpam,
};

inline constexpr std::array<DatasetId, 10> kAllDatasets = {
    DatasetId::kPheme,        DatasetId::kLiar,        DatasetId::kFnnGossipcop,
    DatasetId::kFnnPolitifact, DatasetId::kRashkinPolitifact, DatasetId::kRashkinNewsfiles,
    DatasetId::kCovidZenodo,  DatasetId::kCovidAaai,   DatasetId::kEnron,
    DatasetId::kSmsSpam,
};

// Stable machine key, e.g. "rashkin_politifact".
std::string_view dataset_key(DatasetId id);
// Human-readable name used in reports, e.g. "Rashkin-Politifact".
std::string_view dataset_display_name(DatasetId id);
// Throws ConfigError naming the key when it is not one of the ten.
DatasetId parse_dataset_id(std::string_view key);

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct TextSample {
  std::string id;  // "<dataset key>:<source row key>", unique in a corpus
  std::string text;  // normalized, never empty
  Label label = Label::kNonDeceptive;  // always LabelMap(original_label)
  DatasetId dataset = DatasetId::kPheme;
  std::string original_label;
  std::optional<Split> split;  // split shipped with the raw data, if any
  std::optional<std::string> event_tag;

  bool operator==(const TextSample&) const = default;
};

// An ingested, unified corpus. Samples keep insertion order; lookups by id
// go through an index rebuilt on every mutation.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<TextSample> samples);

  void add(TextSample sample);
  void append(std::vector<TextSample> samples);

  const std::vector<TextSample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  // Returns nullptr when absent. With duplicate ids the first one wins.
  const TextSample* find(std::string_view id) const;

  std::vector<const TextSample*> of_dataset(DatasetId id) const;

  // Same samples regardless of order.
  bool operator==(const Corpus& other) const;

 private:
  std::vector<TextSample> samples_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace deceptkit::corpus
