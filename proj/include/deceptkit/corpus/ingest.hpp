#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deceptkit/corpus/dataset_spec.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::corpus {

struct IngestResult {
  DatasetId dataset = DatasetId::kPheme;
  std::vector<TextSample> samples;
  std::size_t dropped_by_label = 0;  // rows removed by a drop rule
  std::size_t empty_text = 0;        // rows whose text normalized to ""
  std::vector<std::string> warnings;  // count mismatches and skipped rows
  std::map<std::string, std::string> file_checksums;  // relative path -> sha256
};

// Reads one dataset from `raw_location` (the dataset's own directory).
// Throws IngestError naming the file and row on unparseable input and
// LabelMapError naming the label when a label has no rule.
IngestResult ingest_dataset(const DatasetSpec& spec, const std::filesystem::path& raw_location);

// Checks per-class and per-split counts against spec.expected and returns
// one message per mismatch.
std::vector<std::string> check_expected_counts(const DatasetSpec& spec, const std::vector<TextSample>& samples);

}  // namespace deceptkit::corpus
