#include "deceptkit/corpus/splits.hpp"

#include <algorithm>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/rng.hpp"

namespace deceptkit::corpus {

std::string_view to_string(SplitPolicy policy) {
  return policy == SplitPolicy::kProvided ? "provided" : "random_60_20_20";
}

Split SplitAssignment::at(const std::string& id) const {
  const auto it = splits.find(id);
  if (it == splits.end()) throw SplitError("sample " + id + " has no split assignment");
  return it->second;
}

std::vector<std::string> SplitAssignment::ids_in(Split split) const {
  std::vector<std::string> out;
  for (const auto& [id, s] : splits) {
    if (s == split) out.push_back(id);
  }
  return out;
}

void SplitAssignment::merge(const SplitAssignment& other) {
  for (const auto& [id, split] : other.splits) {
    if (!splits.emplace(id, split).second) throw SplitError("sample " + id + " assigned twice");
  }
}

SplitAssignment make_splits(const std::vector<TextSample>& samples, SplitPolicy policy, std::uint64_t seed) {
  SplitAssignment out;
  out.seed = seed;
  out.policy = policy;

  if (policy == SplitPolicy::kProvided) {
    for (const auto& s : samples) {
      if (!s.split) throw SplitError("provided split policy but sample " + s.id + " has no split field");
      if (!out.splits.emplace(s.id, *s.split).second) throw SplitError("duplicate sample id " + s.id);
    }
    return out;
  }

  std::array<std::vector<std::string>, kNumClasses> by_class;
  for (const auto& s : samples) by_class[class_index(s.label)].push_back(s.id);

  Rng rng(seed);
  for (auto& ids : by_class) {
    std::sort(ids.begin(), ids.end());
    rng.shuffle(std::span<std::string>(ids));
    const std::size_t n = ids.size();
    // Cumulative rounding keeps each split within one sample of its share.
    const std::size_t test_end = (2 * n + 5) / 10;  // round(n * 0.2)
    const std::size_t val_end = (4 * n + 5) / 10;   // round(n * 0.4)
    for (std::size_t i = 0; i < n; ++i) {
      const Split split = i < test_end ? Split::kTest : (i < val_end ? Split::kVal : Split::kTrain);
      if (!out.splits.emplace(ids[i], split).second) throw SplitError("duplicate sample id " + ids[i]);
    }
  }
  return out;
}

SplitAssignment assign_splits(const Corpus& corpus, const DatasetCatalog& catalog, std::uint64_t seed) {
  SplitAssignment out;
  out.seed = seed;
  for (DatasetId id : kAllDatasets) {
    std::vector<TextSample> members;
    for (const auto* s : corpus.of_dataset(id)) members.push_back(*s);
    if (members.empty()) continue;
    const bool provided = catalog.contains(id) && catalog.spec(id).provided_splits;
    const SplitPolicy policy = provided ? SplitPolicy::kProvided : SplitPolicy::kRandom602020;
    out.merge(make_splits(members, policy, derive_seed(seed, dataset_key(id))));
  }
  return out;
}

}  // namespace deceptkit::corpus
