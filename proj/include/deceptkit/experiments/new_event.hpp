#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deceptkit/corpus/splits.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::experiments {

// One seed's view of the corpus for the new-event protocol. Training pools
// hold each dataset's train and validation splits; the test set is the
// union of the in-domain datasets' test splits.
struct NewEventPartition {
  std::vector<corpus::TextSample> out_of_domain;
  std::vector<corpus::TextSample> in_domain;
  std::vector<corpus::TextSample> test;
};

bool is_in_domain(const corpus::TextSample& sample, const std::string& event_tag);

// Throws DataError when no sample carries the tag or the in-domain datasets
// have no test samples.
NewEventPartition partition_new_event(const corpus::Corpus& corpus, const corpus::SplitAssignment& splits,
                                      const std::string& event_tag);

// In-domain subsets for each fraction (percent), stratified by label: each
// class is shuffled once and the first floor(n_c * f / 100) samples are
// taken, so a smaller fraction's subset is a prefix of every larger one.
// Subsets keep the pool's order.
std::vector<std::vector<corpus::TextSample>> nested_subsets(std::span<const corpus::TextSample> pool,
                                                            std::span<const int> fractions, std::uint64_t seed);

struct TrainValSplit {
  std::vector<corpus::TextSample> train;
  std::vector<corpus::TextSample> val;
};

// Pools the samples and moves floor(n_c * validation_fraction) of each class
// to validation after a seeded shuffle of the id-ordered pool.
TrainValSplit compose_training(std::span<const corpus::TextSample> out_of_domain,
                               std::span<const corpus::TextSample> in_domain_subset, double validation_fraction,
                               std::uint64_t seed);

// Throws ProvenanceError when a test id occurs in the training data, or when
// `fraction` is 0 and any training sample carries the event tag.
void check_provenance(const TrainValSplit& training, std::span<const corpus::TextSample> test, int fraction,
                      const std::string& event_tag);

// Digest of the ids, labels and texts of a sample list, order-sensitive.
std::string sample_digest(std::span<const corpus::TextSample> samples);

}  // namespace deceptkit::experiments
