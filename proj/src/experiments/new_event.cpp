#include "deceptkit/experiments/new_event.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

#include "deceptkit/common/error.hpp"
#include "deceptkit/common/hash.hpp"
#include "deceptkit/common/rng.hpp"

namespace deceptkit::experiments {

using corpus::Split;
using corpus::TextSample;

namespace {

// Indices of each class, ordered by id and then shuffled.
std::array<std::vector<std::size_t>, kNumClasses> shuffled_by_class(std::span<const TextSample> samples,
                                                                    std::uint64_t seed) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a].id < samples[b].id; });
  std::array<std::vector<std::size_t>, kNumClasses> classes;
  for (std::size_t i : order) classes[class_index(samples[i].label)].push_back(i);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(classes[c]));
  }
  return classes;
}

std::size_t take_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

}  // namespace

bool is_in_domain(const TextSample& sample, const std::string& event_tag) {
  return sample.event_tag.has_value() && *sample.event_tag == event_tag;
}

NewEventPartition partition_new_event(const corpus::Corpus& corpus, const corpus::SplitAssignment& splits,
                                      const std::string& event_tag) {
  NewEventPartition part;
  for (const auto& s : corpus.samples()) {
    const Split split = splits.at(s.id);
    if (is_in_domain(s, event_tag)) {
      (split == Split::kTest ? part.test : part.in_domain).push_back(s);
    } else if (split != Split::kTest) {
      part.out_of_domain.push_back(s);
    }
  }
  if (part.in_domain.empty() && part.test.empty()) {
    throw DataError("no sample carries the event tag '" + event_tag + "'");
  }
  if (part.test.empty()) throw DataError("the in-domain datasets for '" + event_tag + "' have no test samples");
  return part;
}

std::vector<std::vector<TextSample>> nested_subsets(std::span<const TextSample> pool, std::span<const int> fractions,
                                                    std::uint64_t seed) {
  const auto classes = shuffled_by_class(pool, derive_seed(seed, "in_domain_subsets"));
  std::vector<std::vector<TextSample>> subsets;
  for (int f : fractions) {
    if (f < 0 || f > 100) throw ConfigError(fmt::format("fraction {} is not a percentage", f));
    std::vector<char> chosen(pool.size(), 0);
    for (const auto& members : classes) {
      const std::size_t n = take_count(members.size(), f / 100.0);
      for (std::size_t i = 0; i < n; ++i) chosen[members[i]] = 1;
    }
    std::vector<TextSample> subset;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (chosen[i]) subset.push_back(pool[i]);
    }
    subsets.push_back(std::move(subset));
  }
  return subsets;
}

TrainValSplit compose_training(std::span<const TextSample> out_of_domain, std::span<const TextSample> in_domain_subset,
                               double validation_fraction, std::uint64_t seed) {
  std::vector<TextSample> pool(out_of_domain.begin(), out_of_domain.end());
  pool.insert(pool.end(), in_domain_subset.begin(), in_domain_subset.end());
  const auto classes = shuffled_by_class(pool, derive_seed(seed, "validation_holdout"));
  std::vector<char> to_val(pool.size(), 0);
  for (const auto& members : classes) {
    const std::size_t n = take_count(members.size(), validation_fraction);
    for (std::size_t i = 0; i < n; ++i) to_val[members[i]] = 1;
  }
  TrainValSplit out;
  for (std::size_t i = 0; i < pool.size(); ++i) (to_val[i] ? out.val : out.train).push_back(std::move(pool[i]));
  return out;
}

void check_provenance(const TrainValSplit& training, std::span<const TextSample> test, int fraction,
                      const std::string& event_tag) {
  std::unordered_set<std::string> test_ids;
  for (const auto& s : test) test_ids.insert(s.id);
  for (const auto* part : {&training.train, &training.val}) {
    for (const auto& s : *part) {
      if (test_ids.count(s.id) != 0) throw ProvenanceError("test sample " + s.id + " is in the training data");
      if (fraction == 0 && is_in_domain(s, event_tag)) {
        throw ProvenanceError("in-domain sample " + s.id + " is in the training data at fraction 0");
      }
    }
  }
}

std::string sample_digest(std::span<const TextSample> samples) {
  Sha256 h;
  for (const auto& s : samples) {
    h.update(s.id);
    h.update(std::string_view("\x1f", 1));
    h.update(to_string(s.label));
    h.update(std::string_view("\x1f", 1));
    h.update(s.text);
    h.update(std::string_view("\x1e", 1));
  }
  return h.hex_digest();
}

}  // namespace deceptkit::experiments
