#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deceptkit/corpus/dataset_spec.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::corpus {

enum class SplitPolicy { kProvided, kRandom602020 };

std::string_view to_string(SplitPolicy policy);

// id -> split for one seed.
struct SplitAssignment {
  std::map<std::string, Split> splits;
  std::uint64_t seed = 0;
  SplitPolicy policy = SplitPolicy::kRandom602020;

  // Throws SplitError when the id is unassigned.
  Split at(const std::string& id) const;
  std::vector<std::string> ids_in(Split split) const;
  // Adds all entries of `other`; throws SplitError on an id present in both.
  void merge(const SplitAssignment& other);
};

// Random policy: stratified by label; per class floor(n * 0.2) samples go
// to validation and floor(n * 0.2) to test, the remainder to train. Samples
// are ordered by id before shuffling, so the result depends only on the set
// of samples and the seed. Provided policy copies each sample's raw split
// and throws SplitError when one is missing.
SplitAssignment make_splits(const std::vector<TextSample>& samples, SplitPolicy policy, std::uint64_t seed);

// Applies each dataset's policy (provided when spec.provided_splits) with a
// per-dataset seed derived from `seed`.
SplitAssignment assign_splits(const Corpus& corpus, const DatasetCatalog& catalog, std::uint64_t seed);

}  // namespace deceptkit::corpus
