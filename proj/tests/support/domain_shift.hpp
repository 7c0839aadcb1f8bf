#pragma once

#include <string>
#include <vector>

#include "deceptkit/common/rng.hpp"
#include "deceptkit/corpus/types.hpp"

namespace deceptkit::testing {

// A pooled corpus whose event datasets use their own label vocabulary:
// out-of-domain sets signal deception with one word list, the "covid" sets
// with a disjoint one, so a model that never saw in-domain data has nothing
// to go on there. Both labels are balanced within every dataset.
inline corpus::Corpus domain_shift_corpus(std::uint64_t seed, std::size_t per_dataset = 160) {
  using corpus::DatasetId;
  static const std::vector<std::string> ood_deceptive = {"free", "prize", "winner", "claim", "cash", "urgent",
                                                         "bonus", "offer"};
  static const std::vector<std::string> ood_honest = {"meeting", "agenda", "report", "notes", "schedule", "project",
                                                      "review", "budget"};
  static const std::vector<std::string> event_deceptive = {"hoax", "miracle", "bleach", "plandemic", "microchip",
                                                           "coverup", "garlic", "5g"};
  static const std::vector<std::string> event_honest = {"vaccine", "trial", "hospital", "study", "cases", "doses",
                                                        "clinic", "masks"};
  static const std::vector<std::string> filler = {"the", "a", "today", "please", "people", "for", "now", "our",
                                                  "said", "new"};
  static const std::vector<std::string> event_words = {"covid", "pandemic", "virus", "lockdown"};

  struct Source {
    DatasetId id;
    bool event;
    bool provided;
  };
  const Source sources[] = {{DatasetId::kSmsSpam, false, false},
                            {DatasetId::kEnron, false, false},
                            {DatasetId::kPheme, false, false},
                            {DatasetId::kCovidZenodo, true, false},
                            {DatasetId::kCovidAaai, true, true}};
  Rng rng(seed);
  corpus::Corpus out;
  for (const auto& src : sources) {
    for (std::size_t i = 0; i < per_dataset; ++i) {
      const bool deceptive = i % 2 == 1;
      const auto& signal = src.event ? (deceptive ? event_deceptive : event_honest)
                                     : (deceptive ? ood_deceptive : ood_honest);
      std::string text;
      const std::size_t words = 6 + rng.uniform_index(5);
      for (std::size_t w = 0; w < words; ++w) {
        const double u = rng.uniform();
        const auto& pool = u < 0.5 ? signal : (src.event && u < 0.7 ? event_words : filler);
        if (!text.empty()) text += ' ';
        text += pool[rng.uniform_index(pool.size())];
      }
      corpus::TextSample s;
      s.id = std::string(corpus::dataset_key(src.id)) + ":" + std::to_string(i);
      s.text = text;
      s.label = deceptive ? Label::kDeceptive : Label::kNonDeceptive;
      s.dataset = src.id;
      s.original_label = deceptive ? "fake" : "real";
      if (src.event) s.event_tag = "covid";
      if (src.provided) {
        // 60/20/20 by position, keeping both labels in every split.
        const std::size_t block = i * 5 / per_dataset;
        s.split = block < 3 ? corpus::Split::kTrain : block < 4 ? corpus::Split::kVal : corpus::Split::kTest;
      }
      out.add(std::move(s));
    }
  }
  return out;
}

}  // namespace deceptkit::testing
