#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "deceptkit/corpus/dataset_spec.hpp"
#include "deceptkit/corpus/splits.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::corpus {

struct DatasetCountRow {
  DatasetId dataset;
  std::size_t total = 0;
  std::size_t deceptive = 0;
  std::size_t non_deceptive = 0;
  std::vector<std::string> mismatches;  // empty when expectations hold
};

struct LeakageFinding {
  std::string text_sha256;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct ValidationReport {
  std::vector<DatasetCountRow> datasets;
  std::vector<std::string> group_mismatches;
  std::vector<std::string> duplicate_ids;
  std::vector<LeakageFinding> leakage;

  bool counts_ok() const;
  // True when nothing at all was flagged.
  bool clean() const;
  std::string to_text() const;
};

// Never throws on data problems; every finding lands in the report.
// Leakage is checked only when a split assignment is supplied.
ValidationReport validate_corpus(const Corpus& corpus, const DatasetCatalog& catalog,
                                 const std::optional<SplitAssignment>& splits = std::nullopt);

}  // namespace deceptkit::corpus
